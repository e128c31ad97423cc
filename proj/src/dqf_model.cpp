#include "dqf/dqf_model.hpp"

#include "dqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dqf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return x.size() > 1 ? s / static_cast<double>(x.size() - 1) : 0.0;
}

// Skewed t with mode zero; shifted evaluations give any mode with the
// same scale and shape without recomputing the constants.
struct HMargin {
  dist::SkewT base;
  HParams p;

  explicit HMargin(const HParams& hp)
      : base(dist::SktParams{0.0, hp.sigma, hp.eta, hp.lambda}), p(hp) {}

  // Returns (log density, cdf) of the Apatosaurus at x given mode mu and weight w.
  std::pair<double, double> eval(double x, double mu, double w) const {
    const double f0 = base.cdf(-mu);
    const double tail = 1.0 - f0;
    double f = 0.0, F = 0.0;
    if (w > 0.0) {
      f += w * base.pdf(x - mu) / tail;
      F += w * std::max(0.0, (base.cdf(x - mu) - f0) / tail);
    }
    if (w < 1.0) {
      f += (1.0 - w) * std::exp(-x / p.iota) / p.iota;
      F += (1.0 - w) * -std::expm1(-x / p.iota);
    }
    return {f > 0.0 ? std::log(f) : kNegInf, F};
  }
};

}  // namespace

MarginParams DqfTheta::margin(int i) const {
  const int o = idx::kMargin[i];
  return {v[o], v[o + 1], v[o + 2], v[o + 3], v[o + 4], v[o + 5], v[o + 6], v[o + 7]};
}

HParams DqfTheta::h() const {
  const int o = idx::kH;
  return {v[o], v[o + 1], v[o + 2], v[o + 3], v[o + 4], v[o + 5], v[o + 6], v[o + 7], v[o + 8]};
}

Eigen::Matrix4d DqfTheta::R() const {
  Eigen::Matrix4d R = Eigen::Matrix4d::Identity();
  const int o = idx::kR;
  R(1, 0) = R(0, 1) = v[o];
  R(2, 0) = R(0, 2) = v[o + 1];
  R(3, 0) = R(0, 3) = v[o + 2];
  R(2, 1) = R(1, 2) = v[o + 3];
  R(3, 1) = R(1, 3) = v[o + 4];
  R(3, 2) = R(2, 3) = v[o + 5];
  return R;
}

const std::array<std::string_view, kThetaDim>& DqfTheta::names() {
  static const std::array<std::string_view, kThetaDim> n = {
      "delta1", "psi1",   "phi1",   "omega1",     "alpha1", "beta1",   "eta1",    "lambda1",
      "delta2", "psi2",   "phi2",   "omega2",     "alpha2", "beta2",   "eta2",    "lambda2",
      "delta3", "psi3",   "phi3",   "omega3",     "alpha3", "beta3",   "eta3",    "lambda3",
      "delta4", "psi4",   "phi4",   "gamma_star", "c",      "sigma",   "eta4",    "lambda4",
      "iota",   "R21",    "R31",    "R41",        "R32",    "R42",     "R43",     "nu"};
  return n;
}

std::vector<double> XiSeries::column(int i) const {
  std::vector<double> out(xi.size());
  for (std::size_t t = 0; t < xi.size(); ++t) out[t] = xi[t][i];
  return out;
}

XiSeries XiSeries::from_params(const std::vector<GHParams>& params, std::vector<std::string> labels) {
  XiSeries s;
  s.xi.reserve(params.size());
  for (const auto& p : params) s.xi.push_back({p.a, p.b_star, p.g, p.h});
  if (labels.empty()) {
    for (std::size_t t = 0; t < params.size(); ++t) labels.push_back(std::to_string(t + 1));
  }
  if (labels.size() != params.size()) throw DataError("XiSeries: label count mismatch");
  s.day = std::move(labels);
  return s;
}

FilterInit filter_init(const XiSeries& xi) {
  if (xi.size() < 2) throw DataError("XiSeries needs at least two days");
  FilterInit init;
  for (int i = 0; i < 3; ++i) {
    const auto col = xi.column(i);
    init.mu0[i] = mean_of(col);
    init.sigma2_0[i] = std::max(variance_of(col), 1e-300);
  }
  init.mu4_0 = mean_of(xi.column(3));
  return init;
}

// ---------------------------------------------------------------------------

std::string region_violation(const DqfTheta& theta) {
  for (int i = 0; i < 3; ++i) {
    const MarginParams m = theta.margin(i);
    const std::string k = std::to_string(i + 1);
    if (!(m.psi + m.phi > -1.0 && m.psi + m.phi < 1.0)) return "psi" + k + " + phi" + k + " outside (-1,1)";
    if (!(m.omega > 0.0)) return "omega" + k + " <= 0";
    if (!(m.alpha >= 0.0) || !(m.beta >= 0.0)) return "alpha" + k + " or beta" + k + " negative";
    if (!(m.alpha + m.beta < 1.0)) return "alpha" + k + " + beta" + k + " >= 1";
    if (!(m.eta > 2.0 && m.eta <= 40.0)) return "eta" + k + " outside (2,40]";
    if (!(m.lambda > -1.0 && m.lambda < 1.0)) return "lambda" + k + " outside (-1,1)";
    if (!std::isfinite(m.delta)) return "delta" + k + " not finite";
  }
  const HParams h = theta.h();
  if (!(h.delta >= 0.0 && h.psi >= 0.0 && h.phi >= 0.0)) return "delta4, psi4 or phi4 negative";
  if (!(h.psi + h.phi < 1.0)) return "psi4 + phi4 >= 1";
  if (!std::isfinite(h.delta)) return "delta4 not finite";
  if (!(h.gamma_star >= -6.0 && h.gamma_star <= 6.0)) return "gamma_star outside [-6,6]";
  if (!(h.c >= 0.0 && h.c <= 1.0)) return "c outside [0,1]";
  if (!(h.sigma > 0.0) || !std::isfinite(h.sigma)) return "sigma <= 0";
  if (!(h.eta > 2.0 && h.eta <= 40.0)) return "eta4 outside (2,40]";
  if (!(h.lambda > -1.0 && h.lambda < 1.0)) return "lambda4 outside (-1,1)";
  if (!(h.iota > 0.0) || !std::isfinite(h.iota)) return "iota <= 0";
  for (int k = 0; k < 6; ++k) {
    const double r = theta[idx::kR + k];
    if (!(r > -1.0 && r < 1.0)) return "correlation outside (-1,1)";
  }
  Eigen::LLT<Eigen::Matrix4d> llt(theta.R());
  if (llt.info() != Eigen::Success) return "R not positive definite";
  const Eigen::Matrix4d L = llt.matrixL();
  if (!(L.diagonal().minCoeff() > 0.0)) return "R not positive definite";
  if (!(theta.nu() > 2.0 && theta.nu() <= 40.0)) return "nu outside (2,40]";
  return {};
}

bool in_region(const DqfTheta& theta) { return region_violation(theta).empty(); }

double h_weight(const HParams& p, double mu4) {
  return 0.5 + 0.5 / (1.0 + std::exp(-std::exp(p.gamma_star) * (mu4 - p.c)));
}

FilterPath filter(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init) {
  if (auto why = region_violation(theta); !why.empty()) throw RegionError("filter: " + why);
  const std::size_t T = xi.size();
  FilterPath path;
  for (int i = 0; i < 3; ++i) {
    const MarginParams m = theta.margin(i);
    auto& mu = path.mu[i];
    auto& s2 = path.sigma2[i];
    mu.resize(T);
    s2.resize(T);
    double mu_prev = init.mu0[i], x_prev = init.mu0[i], s2_prev = init.sigma2_0[i];
    for (std::size_t t = 0; t < T; ++t) {
      const double eps = x_prev - mu_prev;
      mu[t] = m.delta + m.psi * x_prev + m.phi * mu_prev;
      s2[t] = m.omega + m.alpha * eps * eps + m.beta * s2_prev;
      mu_prev = mu[t];
      s2_prev = s2[t];
      x_prev = xi.xi[t][i];
    }
  }
  const HParams h = theta.h();
  path.mu4.resize(T);
  path.w.resize(T);
  double mu_prev = init.mu4_0, x_prev = init.mu4_0;
  for (std::size_t t = 0; t < T; ++t) {
    path.mu4[t] = h.delta + h.psi * x_prev + h.phi * mu_prev;
    path.w[t] = h_weight(h, path.mu4[t]);
    mu_prev = path.mu4[t];
    x_prev = xi.xi[t][3];
  }
  return path;
}

FilterPath filter(const DqfTheta& theta, const XiSeries& xi) {
  return filter(theta, xi, filter_init(xi));
}

OneStepState next_state(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init) {
  const FilterPath path = filter(theta, xi, init);
  const std::size_t T = xi.size();
  OneStepState s;
  for (int i = 0; i < 3; ++i) {
    const MarginParams m = theta.margin(i);
    const double mu_prev = T ? path.mu[i][T - 1] : init.mu0[i];
    const double s2_prev = T ? path.sigma2[i][T - 1] : init.sigma2_0[i];
    const double x_prev = T ? xi.xi[T - 1][i] : init.mu0[i];
    const double eps = x_prev - mu_prev;
    s.mu[i] = m.delta + m.psi * x_prev + m.phi * mu_prev;
    s.sigma2[i] = m.omega + m.alpha * eps * eps + m.beta * s2_prev;
  }
  const HParams h = theta.h();
  const double mu_prev = T ? path.mu4[T - 1] : init.mu4_0;
  const double x_prev = T ? xi.xi[T - 1][3] : init.mu4_0;
  s.mu4 = h.delta + h.psi * x_prev + h.phi * mu_prev;
  s.w = h_weight(h, s.mu4);
  return s;
}

// ---------------------------------------------------------------------------

bool margin_terms(const MarginParams& p, std::span<const double> x, double mu0, double sigma2_0,
                  MarginTerms& out) {
  const std::size_t T = x.size();
  out.logpdf.resize(T);
  out.pit.resize(T);
  const dist::StandardSkewT v(p.eta, p.lambda);
  double mu_prev = mu0, x_prev = mu0, s2_prev = sigma2_0;
  bool ok = true;
  for (std::size_t t = 0; t < T; ++t) {
    const double eps = x_prev - mu_prev;
    const double mu = p.delta + p.psi * x_prev + p.phi * mu_prev;
    const double s2 = p.omega + p.alpha * eps * eps + p.beta * s2_prev;
    const double sd = std::sqrt(s2);
    const double z = (x[t] - mu) / sd;
    out.logpdf[t] = v.logpdf(z) - 0.5 * std::log(s2);
    out.pit[t] = v.cdf(z);
    ok = ok && std::isfinite(out.logpdf[t]) && std::isfinite(out.pit[t]);
    mu_prev = mu;
    s2_prev = s2;
    x_prev = x[t];
  }
  return ok;
}

bool h_terms(const HParams& p, std::span<const double> x, double mu0, MarginTerms& out) {
  const std::size_t T = x.size();
  out.logpdf.resize(T);
  out.pit.resize(T);
  const HMargin m(p);
  double mu_prev = mu0, x_prev = mu0;
  bool ok = true;
  for (std::size_t t = 0; t < T; ++t) {
    const double mu = p.delta + p.psi * x_prev + p.phi * mu_prev;
    if (x[t] < 0.0 || mu < 0.0) return false;
    const auto [lf, F] = m.eval(x[t], mu, h_weight(p, mu));
    out.logpdf[t] = lf;
    out.pit[t] = F;
    ok = ok && std::isfinite(lf) && std::isfinite(F);
    mu_prev = mu;
    x_prev = x[t];
  }
  return ok;
}

bool t_scores(const dist::StudentT& t, std::span<const double> pit, std::vector<double>& out) {
  out.resize(pit.size());
  bool ok = true;
  for (std::size_t k = 0; k < pit.size(); ++k) {
    out[k] = t.quantile(std::clamp(pit[k], dist::kCopulaClamp, 1.0 - dist::kCopulaClamp));
    ok = ok && std::isfinite(out[k]);
  }
  return ok;
}

double logprior(const DqfTheta& theta) {
  if (!in_region(theta)) return kNegInf;
  double lp = 0.0;
  for (int i = 0; i < 3; ++i) {
    lp -= std::log(theta.margin(i).omega);
    lp -= 2.0 * std::log(theta.margin(i).eta);
  }
  const HParams h = theta.h();
  lp -= 2.0 * std::log(h.eta);
  const double r = h.iota / 1e-5;
  lp -= std::log1p(r * r);
  lp -= 2.0 * std::log(theta.nu());
  return lp;
}

double loglik(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init) {
  if (!in_region(theta)) return kNegInf;
  const std::size_t T = xi.size();
  std::array<MarginTerms, 4> terms;
  std::array<std::vector<double>, 4> scores;
  for (int i = 0; i < 3; ++i) {
    const auto col = xi.column(i);
    if (!margin_terms(theta.margin(i), col, init.mu0[i], init.sigma2_0[i], terms[i])) return kNegInf;
  }
  if (!h_terms(theta.h(), xi.column(3), init.mu4_0, terms[3])) return kNegInf;
  const dist::TCopula cop(theta.copula());
  const dist::StudentT t(theta.nu());
  for (int i = 0; i < 4; ++i) {
    if (!t_scores(t, terms[i].pit, scores[i])) return kNegInf;
  }
  double ll = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    const std::array<double, 4> x = {scores[0][k], scores[1][k], scores[2][k], scores[3][k]};
    ll += cop.logdensity_scores(x);
    for (int i = 0; i < 4; ++i) ll += terms[i].logpdf[k];
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

double loglik(const DqfTheta& theta, const XiSeries& xi) { return loglik(theta, xi, filter_init(xi)); }

double logposterior_kernel(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init) {
  const double lp = logprior(theta);
  if (!std::isfinite(lp)) return kNegInf;
  return loglik(theta, xi, init) + lp;
}

double logposterior_kernel(const DqfTheta& theta, const XiSeries& xi) {
  return logposterior_kernel(theta, xi, filter_init(xi));
}

// ---------------------------------------------------------------------------

XiSeries simulate(const DqfTheta& theta, std::size_t T, std::uint64_t seed, std::size_t burn_in) {
  if (auto why = region_violation(theta); !why.empty()) throw RegionError("simulate: " + why);
  Rng rng(seed);
  const dist::TCopula cop(theta.copula());
  std::array<dist::StandardSkewT, 3> v = {
      dist::StandardSkewT(theta.margin(0).eta, theta.margin(0).lambda),
      dist::StandardSkewT(theta.margin(1).eta, theta.margin(1).lambda),
      dist::StandardSkewT(theta.margin(2).eta, theta.margin(2).lambda)};
  std::array<MarginParams, 3> m = {theta.margin(0), theta.margin(1), theta.margin(2)};
  const HParams h = theta.h();

  std::array<double, 3> mu{}, s2{}, x{};
  for (int i = 0; i < 3; ++i) {
    mu[i] = m[i].delta / (1.0 - m[i].psi - m[i].phi);
    s2[i] = m[i].omega / (1.0 - m[i].alpha - m[i].beta);
    x[i] = mu[i];
  }
  double mu4 = h.delta / (1.0 - h.psi - h.phi);
  double x4 = mu4;

  XiSeries out;
  out.xi.reserve(T);
  out.day.reserve(T);
  for (std::size_t step = 0; step < burn_in + T; ++step) {
    auto u = cop.sample(rng);
    for (double& ui : u) ui = std::clamp(ui, dist::kCopulaClamp, 1.0 - dist::kCopulaClamp);
    std::array<double, 4> row{};
    for (int i = 0; i < 3; ++i) {
      const double eps = x[i] - mu[i];
      const double mu_new = m[i].delta + m[i].psi * x[i] + m[i].phi * mu[i];
      s2[i] = m[i].omega + m[i].alpha * eps * eps + m[i].beta * s2[i];
      mu[i] = mu_new;
      x[i] = mu[i] + std::sqrt(s2[i]) * v[i].quantile(u[i]);
      row[i] = x[i];
    }
    mu4 = h.delta + h.psi * x4 + h.phi * mu4;
    const dist::Apatosaurus apat({{mu4, h.sigma, h.eta, h.lambda}, h.iota, h_weight(h, mu4)});
    x4 = apat.quantile(u[3]);
    row[3] = x4;
    if (step >= burn_in) {
      out.xi.push_back(row);
      out.day.push_back(std::to_string(step - burn_in + 1));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

GHParams conditional_mean_params(const DqfTheta& theta, const OneStepState& s, bool* clamped) {
  const HParams h = theta.h();
  const dist::Apatosaurus apat({{s.mu4, h.sigma, h.eta, h.lambda}, h.iota, s.w});
  double hm = apat.mean();
  const bool clamp = !(hm >= 0.0 && hm <= kHForecastMax);
  if (clamp) hm = std::isnan(hm) ? kHForecastMax : std::clamp(hm, 0.0, kHForecastMax);
  if (clamped) *clamped = clamp;
  return {s.mu[0], s.mu[1], s.mu[2], hm};
}

QfForecast forecast_qf(const DqfTheta& theta, const XiSeries& xi, std::span<const double> u_levels,
                       const FilterInit& init) {
  const FilterPath path = filter(theta, xi, init);
  const std::size_t T = xi.size();
  QfForecast out;
  out.params.reserve(T + 1);
  auto push = [&](const OneStepState& s) {
    bool clamped = false;
    const GHParams p = conditional_mean_params(theta, s, &clamped);
    out.clamped_h += clamped;
    std::vector<double> q(u_levels.size());
    for (std::size_t k = 0; k < u_levels.size(); ++k) q[k] = gh_quantile(p, u_levels[k]);
    out.params.push_back(p);
    out.quantiles.push_back(std::move(q));
  };
  for (std::size_t t = 0; t < T; ++t) {
    OneStepState s;
    for (int i = 0; i < 3; ++i) {
      s.mu[i] = path.mu[i][t];
      s.sigma2[i] = path.sigma2[i][t];
    }
    s.mu4 = path.mu4[t];
    s.w = path.w[t];
    push(s);
  }
  push(next_state(theta, xi, init));
  return out;
}

QfForecast forecast_qf(const DqfTheta& theta, const XiSeries& xi, std::span<const double> u_levels) {
  return forecast_qf(theta, xi, u_levels, filter_init(xi));
}

DqfTheta simulation_truth() {
  DqfTheta th;
  th.v = {0.0,   0.06, 0.91, 6e-8, 0.15,  0.84,  8.0,  -0.16,   //
          -0.13, 0.43, 0.53, 5e-3, 0.06,  0.88,  15.0, 0.0,     //
          0.0,   0.05, 0.93, 7e-5, 0.07,  0.92,  18.0, 0.14,    //
          3e-3,  0.22, 0.74, 3.7,  0.03,  0.06,  6.0,  0.15, 1e-4,  //
          -0.3,  -0.1, 0.2,  -0.22, -0.6, 0.12,  15.0};
  return th;
}

DqfTheta initial_theta(const XiSeries& xi) {
  if (xi.size() < 2) throw DataError("initial_theta: need at least two days");
  constexpr double psi = 0.1, phi = 0.8, alpha = 0.05, beta = 0.9;
  // Share of the variance carried by the conditional mean at (psi, phi).
  const double rsig = psi * psi / (1.0 - 2.0 * psi * phi - phi * phi);
  DqfTheta th;
  for (int i = 0; i < 3; ++i) {
    const auto col = xi.column(i);
    const double m = mean_of(col);
    const double var = std::max(variance_of(col), 1e-12);
    const int o = idx::kMargin[i];
    th[o + idx::kDelta] = (1.0 - psi - phi) * m;
    th[o + idx::kPsi] = psi;
    th[o + idx::kPhi] = phi;
    th[o + idx::kOmega] = (1.0 - alpha - beta) * var * (1.0 - rsig);
    th[o + idx::kAlpha] = alpha;
    th[o + idx::kBeta] = beta;
    th[o + idx::kEta] = 10.0;
    th[o + idx::kLambda] = 0.0;
  }
  const auto hcol = xi.column(3);
  const double m4 = std::max(mean_of(hcol), 0.0);
  const double sd4 = std::sqrt(variance_of(hcol));
  th[idx::kH + 0] = 0.1 * m4;
  th[idx::kH + 1] = 0.2;
  th[idx::kH + 2] = 0.7;
  th[idx::kGammaStar] = 2.0;
  th[idx::kC] = std::clamp(m4, 0.0, 1.0);
  th[idx::kSigma] = std::max(sd4, 1e-4);
  th[idx::kEta4] = 10.0;
  th[idx::kLambda4] = 0.0;
  th[idx::kIota] = std::max(0.01 * m4, 1e-6);
  for (int k = 0; k < 6; ++k) th[idx::kR + k] = 0.0;
  th[idx::kNu] = 15.0;
  return th;
}

}  // namespace dqf
