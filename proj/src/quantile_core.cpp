#include "dqf/quantile_core.hpp"

#include "dqf/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <thread>

namespace dqf {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double std_normal_quantile(double u) {
  static const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, u);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

// X0(z) * phi(z) for the standardised (a = 0, b = 1) quantile function.
// The H factor and the normal density are merged so heavy tails do not overflow.
double weighted_standard_gh(double g, double h, double z) {
  const double e2 = -0.5 * (1.0 - h) * z * z;
  if (std::abs(g) < kGZeroThreshold) return z * std::exp(e2) * kInvSqrt2Pi;
  const double gz = g * z;
  if (std::abs(gz) < 1.0) return std::expm1(gz) / g * std::exp(e2) * kInvSqrt2Pi;
  return (std::exp(gz + e2) - std::exp(e2)) / g * kInvSqrt2Pi;
}

using Vec4 = std::array<double, 4>;

// Integrand of the four L-moment integrals after u = Phi(z), z = t / (1 - t^2).
Vec4 lmoment_integrand(double g, double h, double t) {
  const double one_minus = 1.0 - t * t;
  if (one_minus <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  const double z = t / one_minus;
  const double jac = (1.0 + t * t) / (one_minus * one_minus);
  const double base = weighted_standard_gh(g, h, z) * jac;
  if (!std::isfinite(base) || base == 0.0) return {0.0, 0.0, 0.0, 0.0};
  const double p = std_normal_cdf(z);
  return {base, base * (2.0 * p - 1.0), base * ((6.0 * p - 6.0) * p + 1.0),
          base * (((20.0 * p - 30.0) * p + 12.0) * p - 1.0)};
}

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double lo, hi;
  Vec4 value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment gauss_kronrod(double g, double h, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  Vec4 kronrod{}, gauss{};
  const Vec4 fc = lmoment_integrand(g, h, center);
  for (int k = 0; k < 4; ++k) {
    kronrod[k] = fc[k] * kWgk[7];
    gauss[k] = fc[k] * kWg[3];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const Vec4 f1 = lmoment_integrand(g, h, center - dx);
    const Vec4 f2 = lmoment_integrand(g, h, center + dx);
    for (int k = 0; k < 4; ++k) {
      kronrod[k] += kWgk[j] * (f1[k] + f2[k]);
      if (j % 2 == 1) gauss[k] += kWg[j / 2] * (f1[k] + f2[k]);
    }
  }
  Segment s{lo, hi, {}, 0.0};
  for (int k = 0; k < 4; ++k) {
    s.value[k] = kronrod[k] * half;
    s.error = std::max(s.error, std::abs((kronrod[k] - gauss[k]) * half));
  }
  return s;
}

// Standardised L-moments (a = 0, b = 1).
Vec4 standard_lmoments(double g, double h) {
  constexpr double kRelTol = 1e-11;
  constexpr int kMaxSegments = 4000;
  std::priority_queue<Segment> queue;
  constexpr int kInitial = 8;
  for (int i = 0; i < kInitial; ++i) {
    const double lo = -1.0 + 2.0 * i / kInitial;
    const double hi = -1.0 + 2.0 * (i + 1) / kInitial;
    queue.push(gauss_kronrod(g, h, lo, hi));
  }
  auto totals = [&queue]() {
    auto copy = queue;
    Vec4 sum{};
    double err = 0.0;
    while (!copy.empty()) {
      const auto& s = copy.top();
      for (int k = 0; k < 4; ++k) sum[k] += s.value[k];
      err += s.error;
      copy.pop();
    }
    return std::pair{sum, err};
  };
  // Running totals are tracked incrementally; a full resum is done at the end.
  Vec4 sum{};
  double err = 0.0;
  {
    auto [s, e] = totals();
    sum = s;
    err = e;
  }
  int segments = kInitial;
  while (segments < kMaxSegments) {
    const double scale = std::max(std::abs(sum[1]), 1e-300);
    if (err <= kRelTol * scale) break;
    Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    Segment left = gauss_kronrod(g, h, worst.lo, mid);
    Segment right = gauss_kronrod(g, h, mid, worst.hi);
    for (int k = 0; k < 4; ++k) sum[k] += left.value[k] + right.value[k] - worst.value[k];
    err += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++segments;
  }
  return totals().first;
}

LMoments standard_to_lmoments(const Vec4& s) {
  LMoments m;
  m.l1 = s[0];
  m.l2 = s[1];
  m.l3 = s[2];
  m.l4 = s[3];
  m.tau3 = s[2] / s[1];
  m.tau4 = s[3] / s[1];
  return m;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

constexpr double kLogitBound = 40.0;

struct Objective {
  double tau3, tau4;
  int evaluations = 0;

  double operator()(double g, double x) {
    ++evaluations;
    x = std::clamp(x, -kLogitBound, kLogitBound);
    const Vec4 s = standard_lmoments(g, logistic(x));
    const double d3 = s[2] / s[1] - tau3;
    const double d4 = s[3] / s[1] - tau4;
    const double f = d3 * d3 + d4 * d4;
    return std::isfinite(f) ? f : std::numeric_limits<double>::max();
  }
};

struct SimplexResult {
  std::array<double, 2> x;
  double f;
  bool converged;
};

SimplexResult nelder_mead(Objective& objective, std::array<double, 2> start,
                          std::array<double, 2> step, double ftol, int budget) {
  using Point = std::array<double, 2>;
  std::array<Point, 3> pts = {start, Point{start[0] + step[0], start[1]},
                              Point{start[0], start[1] + step[1]}};
  std::array<double, 3> fs{};
  for (int i = 0; i < 3; ++i) fs[i] = objective(pts[i][0], pts[i][1]);
  const int first = objective.evaluations - 3;
  bool converged = false;
  while (objective.evaluations - first < budget) {
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int l, int r) { return fs[l] < fs[r]; });
    const int best = order[0], mid = order[1], worst = order[2];
    double size = 0.0;
    for (int i = 1; i < 3; ++i)
      for (int k = 0; k < 2; ++k) size = std::max(size, std::abs(pts[order[i]][k] - pts[best][k]));
    if (fs[worst] - fs[best] <= ftol && (size < 1e-9 || fs[best] <= ftol * 1e-6)) {
      converged = true;
      break;
    }
    const Point centroid = {(pts[best][0] + pts[mid][0]) / 2, (pts[best][1] + pts[mid][1]) / 2};
    auto along = [&](double c) {
      return Point{centroid[0] + c * (pts[worst][0] - centroid[0]),
                   centroid[1] + c * (pts[worst][1] - centroid[1])};
    };
    const Point reflected = along(-1.0);
    const double fr = objective(reflected[0], reflected[1]);
    if (fr < fs[best]) {
      const Point expanded = along(-2.0);
      const double fe = objective(expanded[0], expanded[1]);
      if (fe < fr) {
        pts[worst] = expanded;
        fs[worst] = fe;
      } else {
        pts[worst] = reflected;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[mid]) {
      pts[worst] = reflected;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    const Point contracted = along(outside ? -0.5 : 0.5);
    const double fc = objective(contracted[0], contracted[1]);
    if (fc < (outside ? fr : fs[worst])) {
      pts[worst] = contracted;
      fs[worst] = fc;
      continue;
    }
    for (int i : {mid, worst}) {
      for (int k = 0; k < 2; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      fs[i] = objective(pts[i][0], pts[i][1]);
    }
  }
  const int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  return {pts[best], fs[best], converged};
}

// Newton steps on the 2x2 moment-matching system, kept only when they improve.
SimplexResult polish(Objective& objective, SimplexResult r) {
  for (int iter = 0; iter < 12 && r.f > 1e-28; ++iter) {
    const double g = r.x[0];
    const double x = std::clamp(r.x[1], -kLogitBound, kLogitBound);
    auto resid = [&](double gg, double xx) {
      ++objective.evaluations;
      const Vec4 s = standard_lmoments(gg, logistic(xx));
      return std::array<double, 2>{s[2] / s[1] - objective.tau3, s[3] / s[1] - objective.tau4};
    };
    const auto r0 = resid(g, x);
    constexpr double eps = 1e-6;
    const auto rgp = resid(g + eps, x), rgm = resid(g - eps, x);
    const auto rxp = resid(g, x + eps), rxm = resid(g, x - eps);
    const double j11 = (rgp[0] - rgm[0]) / (2 * eps), j21 = (rgp[1] - rgm[1]) / (2 * eps);
    const double j12 = (rxp[0] - rxm[0]) / (2 * eps), j22 = (rxp[1] - rxm[1]) / (2 * eps);
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    const double dg = -(j22 * r0[0] - j12 * r0[1]) / det;
    const double dx = -(-j21 * r0[0] + j11 * r0[1]) / det;
    const double gn = g + dg;
    const double xn = std::clamp(x + dx, -kLogitBound, kLogitBound);
    const double fn = objective(gn, xn);
    if (!(fn < r.f)) break;
    r.x = {gn, xn};
    r.f = fn;
  }
  return r;
}

}  // namespace

double GHParams::scale() const { return std::exp(b_star); }

double gh_transform(const GHParams& p, double z) {
  const double b = std::exp(p.b_star);
  const double hz = std::exp(0.5 * p.h * z * z);
  if (std::abs(p.g) < kGZeroThreshold) return p.a + b * z * hz;
  return p.a + b * std::expm1(p.g * z) / p.g * hz;
}

double gh_quantile(const GHParams& params, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("gh_quantile: u must lie in (0,1)");
  if (!(params.h >= 0.0)) throw DomainError("gh_quantile: h must be non-negative");
  return gh_transform(params, std_normal_quantile(u));
}

LMoments gh_lmoments(const GHParams& params) {
  if (!(params.h >= 0.0)) throw DomainError("gh_lmoments: h must be non-negative");
  if (params.h >= 1.0) throw DomainError("gh_lmoments: h >= 1 gives an infinite mean");
  LMoments m = standard_to_lmoments(standard_lmoments(params.g, params.h));
  const double b = std::exp(params.b_star);
  m.l1 = params.a + b * m.l1;
  m.l2 *= b;
  m.l3 *= b;
  m.l4 *= b;
  return m;
}

LMoments sample_lmoments(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 4) throw DomainError("sample_lmoments: need at least 4 observations");
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  if (s.front() == s.back()) throw DegenerateSampleError("sample_lmoments: all values identical");
  const double nn = static_cast<double>(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double i = static_cast<double>(k);  // i - 1 in one-based ranks
    const double w1 = i / (nn - 1.0);
    const double w2 = w1 * (i - 1.0) / (nn - 2.0);
    const double w3 = w2 * (i - 2.0) / (nn - 3.0);
    b0 += s[k];
    b1 += w1 * s[k];
    b2 += w2 * s[k];
    b3 += w3 * s[k];
  }
  b0 /= nn;
  b1 /= nn;
  b2 /= nn;
  b3 /= nn;
  LMoments m;
  m.l1 = b0;
  m.l2 = 2.0 * b1 - b0;
  m.l3 = 6.0 * b2 - 6.0 * b1 + b0;
  m.l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0;
  if (!(m.l2 > 0.0)) throw DegenerateSampleError("sample_lmoments: zero L-scale");
  m.tau3 = m.l3 / m.l2;
  m.tau4 = m.l4 / m.l2;
  return m;
}

GHFit fit_gh_from_lmoments(const LMoments& sample, const GHFitOptions& options) {
  if (!(sample.l2 > 0.0)) throw DegenerateSampleError("fit_gh: zero sample L-scale");
  Objective objective{sample.tau3, sample.tau4};
  SimplexResult best{{0.0, 0.0}, std::numeric_limits<double>::infinity(), false};
  for (double g0 : {0.0, 0.3, -0.3}) {
    for (double h0 : {0.01, 0.2}) {
      const auto r = nelder_mead(objective, {g0, logit(h0)}, {0.1, 0.5},
                                 options.objective_tolerance, options.max_evaluations_per_start);
      if (r.f < best.f) best = r;
    }
  }
  if (options.polish) best = polish(objective, best);

  GHFit fit;
  fit.params.g = best.x[0];
  fit.params.h = logistic(std::clamp(best.x[1], -kLogitBound, kLogitBound));
  fit.objective = best.f;
  fit.converged = best.converged || best.f <= options.objective_tolerance;
  fit.evaluations = objective.evaluations;
  const LMoments pop = standard_to_lmoments(standard_lmoments(fit.params.g, fit.params.h));
  const double b = sample.l2 / pop.l2;
  fit.params.b_star = std::log(b);
  fit.params.a = sample.l1 - b * pop.l1;
  return fit;
}

GHFit fit_gh(std::span<const double> y, const GHFitOptions& options) {
  return fit_gh_from_lmoments(sample_lmoments(y), options);
}

SymbolError::SymbolError(std::size_t day, const std::string& what)
    : std::runtime_error("day " + std::to_string(day) + ": " + what), day_(day) {}

std::vector<GHFit> construct_symbols(const std::vector<std::vector<double>>& days,
                                     unsigned threads, const GHFitOptions& options) {
  std::vector<GHFit> out(days.size());
  std::vector<std::string> errors(days.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t d = begin; d < days.size(); d += stride) {
      try {
        if (days[d].size() < kMinDaySize)
          throw DataError("fewer than " + std::to_string(kMinDaySize) + " returns");
        out[d] = fit_gh(days[d], options);
      } catch (const std::exception& e) {
        errors[d] = e.what();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(days.size())));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  for (std::size_t d = 0; d < days.size(); ++d)
    if (!errors[d].empty()) throw SymbolError(d, errors[d]);
  return out;
}

}  // namespace dqf
