#include "dqf/distributions.hpp"

#include "dqf/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dqf::dist {

namespace {

constexpr double kLogPi = 1.14472988584940017414342735135;

// Uniform draw on the open interval (0, 1).
double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal_quantile: u must lie in (0,1)");
  static const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, u);
}

// ---------------------------------------------------------------------------

StudentT::StudentT(double nu) : nu_(nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("StudentT: nu must be positive");
  log_norm_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * (std::log(nu) + kLogPi);
}

double StudentT::logpdf(double x) const {
  return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_);
}

double StudentT::pdf(double x) const { return std::exp(logpdf(x)); }

double StudentT::cdf(double x) const {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  if (x == 0.0) return 0.5;
  const double x2 = x * x;
  // Lower tail mass 0.5 * I_{nu / (nu + x^2)}(nu / 2, 1 / 2); the complementary
  // form is more accurate when x^2 is small relative to nu.
  double tail;
  if (x2 < nu_) {
    tail = 0.5 * boost::math::ibetac(0.5, 0.5 * nu_, x2 / (nu_ + x2));
  } else {
    tail = 0.5 * boost::math::ibeta(0.5 * nu_, 0.5, nu_ / (nu_ + x2));
  }
  return x < 0.0 ? tail : 1.0 - tail;
}

double StudentT::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("StudentT::quantile: u must lie in (0,1)");
  if (u == 0.5) return 0.0;
  const double p = 2.0 * std::min(u, 1.0 - u);
  double complement = 0.0;
  const double y = boost::math::ibeta_inv(0.5 * nu_, 0.5, p, &complement);
  // y = nu / (nu + x^2), complement = x^2 / (nu + x^2)
  const double x = std::sqrt(nu_ * complement / y);
  return u < 0.5 ? -x : x;
}

double t_cdf(double x, double nu) { return StudentT(nu).cdf(x); }
double t_quantile(double u, double nu) { return StudentT(nu).quantile(u); }

// ---------------------------------------------------------------------------

void validate(const SktParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw DomainError("skewed t: sigma must be > 0");
  if (!(p.eta > 2.0) || !std::isfinite(p.eta)) throw DomainError("skewed t: eta must be > 2");
  if (!(p.lambda > -1.0 && p.lambda < 1.0)) throw DomainError("skewed t: lambda must lie in (-1,1)");
  if (!std::isfinite(p.mu)) throw DomainError("skewed t: mu must be finite");
}

SkewT::SkewT(const SktParams& p)
    : p_(p),
      log_c_(std::lgamma(0.5 * (p.eta + 1.0)) - 0.5 * (kLogPi + std::log(p.eta - 2.0)) -
             std::lgamma(0.5 * p.eta)),
      root_ratio_(std::sqrt(p.eta / (p.eta - 2.0))),
      t_(p.eta) {}

SkewT SkewT::make(const SktParams& p) {
  validate(p);
  return SkewT(p);
}

double SkewT::logpdf(double x) const {
  const double side = x < p_.mu ? 1.0 - p_.lambda : 1.0 + p_.lambda;
  const double s = (x - p_.mu) / (p_.sigma * side);
  return log_c_ - std::log(p_.sigma) - 0.5 * (p_.eta + 1.0) * std::log1p(s * s / (p_.eta - 2.0));
}

double SkewT::pdf(double x) const { return std::exp(logpdf(x)); }

double SkewT::cdf(double x) const {
  if (x < p_.mu) {
    const double s = (x - p_.mu) / (p_.sigma * (1.0 - p_.lambda));
    return (1.0 - p_.lambda) * t_.cdf(s * root_ratio_);
  }
  const double s = (x - p_.mu) / (p_.sigma * (1.0 + p_.lambda));
  return (1.0 + p_.lambda) * t_.cdf(s * root_ratio_) - p_.lambda;
}

double SkewT::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("skt_quantile: u must lie in (0,1)");
  if (u < 0.5 * (1.0 - p_.lambda)) {
    return p_.sigma * (1.0 - p_.lambda) / root_ratio_ * t_.quantile(u / (1.0 - p_.lambda)) + p_.mu;
  }
  // Upper branch inverts (1 + lambda) F_t(.) - lambda = u.
  const double v = std::min((u + p_.lambda) / (1.0 + p_.lambda), 1.0 - 1e-16);
  return p_.sigma * (1.0 + p_.lambda) / root_ratio_ * t_.quantile(v) + p_.mu;
}

double skt_pdf(const SktParams& p, double x) { return SkewT::make(p).pdf(x); }
double skt_cdf(const SktParams& p, double x) { return SkewT::make(p).cdf(x); }
double skt_quantile(const SktParams& p, double u) { return SkewT::make(p).quantile(u); }

// ---------------------------------------------------------------------------

StandardSkewT::StandardSkewT(double eta, double lambda)
    : base_(SkewT::make({0.0, 1.0, eta, lambda})) {
  const double c = std::exp(std::lgamma(0.5 * (eta + 1.0)) - 0.5 * (kLogPi + std::log(eta - 2.0)) -
                            std::lgamma(0.5 * eta));
  a_ = 4.0 * lambda * c * (eta - 2.0) / (eta - 1.0);
  b_ = std::sqrt(1.0 + 3.0 * lambda * lambda - a_ * a_);
  log_b_ = std::log(b_);
}

double StandardSkewT::logpdf(double v) const { return log_b_ + base_.logpdf(a_ + b_ * v); }
double StandardSkewT::pdf(double v) const { return std::exp(logpdf(v)); }
double StandardSkewT::cdf(double v) const { return base_.cdf(a_ + b_ * v); }
double StandardSkewT::quantile(double u) const { return (base_.quantile(u) - a_) / b_; }

double skt_std_pdf(double eta, double lambda, double v) { return StandardSkewT(eta, lambda).pdf(v); }
double skt_std_cdf(double eta, double lambda, double v) { return StandardSkewT(eta, lambda).cdf(v); }

// ---------------------------------------------------------------------------

TruncatedSkewT::TruncatedSkewT(const SktParams& p) : base_(SkewT::make(p)), f0_(base_.cdf(0.0)) {}

double TruncatedSkewT::pdf(double x) const {
  if (x < 0.0) throw DomainError("trskt_pdf: x must be non-negative");
  return base_.pdf(x) / (1.0 - f0_);
}

double TruncatedSkewT::cdf(double x) const {
  if (x < 0.0) throw DomainError("trskt_cdf: x must be non-negative");
  if (std::isinf(x)) return 1.0;
  return std::max(0.0, (base_.cdf(x) - f0_) / (1.0 - f0_));
}

double TruncatedSkewT::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("trskt_quantile: u must lie in (0,1)");
  return std::max(0.0, base_.quantile(u * (1.0 - f0_) + f0_));
}

double TruncatedSkewT::mean() const {
  const SktParams& p = base_.params();
  if (p.mu < 0.0) throw DomainError("trskt_mean: the mode must be non-negative");
  const double c = std::exp(std::lgamma(0.5 * (p.eta + 1.0)) -
                            0.5 * (kLogPi + std::log(p.eta - 2.0)) - std::lgamma(0.5 * p.eta));
  const double left = p.mu / (p.sigma * (1.0 - p.lambda));
  const double u_left = 1.0 + left * left / (p.eta - 2.0);
  const double lp = 1.0 + p.lambda, lm = 1.0 - p.lambda;
  const double bracket = lp * lp - lm * lm * (1.0 - std::pow(u_left, 0.5 * (1.0 - p.eta)));
  return c * p.sigma * ((p.eta - 2.0) / (p.eta - 1.0)) * bracket / (1.0 - f0_) + p.mu;
}

double trskt_pdf(const SktParams& p, double x) { return TruncatedSkewT(p).pdf(x); }
double trskt_cdf(const SktParams& p, double x) { return TruncatedSkewT(p).cdf(x); }
double trskt_quantile(const SktParams& p, double u) { return TruncatedSkewT(p).quantile(u); }
double trskt_mean(const SktParams& p) { return TruncatedSkewT(p).mean(); }

// ---------------------------------------------------------------------------

double exp_pdf(double x, double iota) {
  if (!(iota > 0.0)) throw DomainError("exponential: iota must be > 0");
  if (x < 0.0) throw DomainError("exponential: x must be non-negative");
  return std::exp(-x / iota) / iota;
}

double exp_cdf(double x, double iota) {
  if (!(iota > 0.0)) throw DomainError("exponential: iota must be > 0");
  if (x < 0.0) throw DomainError("exponential: x must be non-negative");
  return -std::expm1(-x / iota);
}

double exp_quantile(double u, double iota) {
  if (!(iota > 0.0)) throw DomainError("exponential: iota must be > 0");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("exp_quantile: u must lie in (0,1)");
  return -iota * std::log1p(-u);
}

void validate(const ApatParams& p) {
  validate(p.skt);
  if (p.skt.mu < 0.0) throw DomainError("apatosaurus: mode must be non-negative");
  if (!(p.iota > 0.0) || !std::isfinite(p.iota)) throw DomainError("apatosaurus: iota must be > 0");
  if (!(p.w >= 0.0 && p.w <= 1.0)) throw DomainError("apatosaurus: w must lie in [0,1]");
}

Apatosaurus::Apatosaurus(const ApatParams& p) : p_(p), trunc_((validate(p), p.skt)) {}

double Apatosaurus::pdf(double x) const {
  if (x < 0.0) throw DomainError("apat_pdf: x must be non-negative");
  double f = 0.0;
  if (p_.w > 0.0) f += p_.w * trunc_.pdf(x);
  if (p_.w < 1.0) f += (1.0 - p_.w) * std::exp(-x / p_.iota) / p_.iota;
  return f;
}

double Apatosaurus::logpdf(double x) const {
  const double f = pdf(x);
  return f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
}

double Apatosaurus::cdf(double x) const {
  if (x < 0.0) throw DomainError("apat_cdf: x must be non-negative");
  double F = 0.0;
  if (p_.w > 0.0) F += p_.w * trunc_.cdf(x);
  if (p_.w < 1.0) F += (1.0 - p_.w) * -std::expm1(-x / p_.iota);
  return F;
}

double Apatosaurus::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("apat_quantile: u must lie in (0,1)");
  if (p_.w >= 1.0) return trunc_.quantile(u);
  const double qe = exp_quantile(u, p_.iota);
  if (p_.w <= 0.0) return qe;
  const double qt = trunc_.quantile(u);
  // The mixture cdf lies between the component cdfs, so the root is bracketed
  // by the component quantiles.
  double lo = std::min(qt, qe), hi = std::max(qt, qe);
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double diff = cdf(x) - u;
    if (diff == 0.0) return x;
    if (diff < 0.0) lo = x; else hi = x;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(x))) break;
    const double f = pdf(x);
    double next = f > 0.0 ? x - diff / f : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

double Apatosaurus::mean() const { return p_.w * trunc_.mean() + (1.0 - p_.w) * p_.iota; }

double Apatosaurus::sample(Rng& rng) const {
  const double label = uniform_open(rng);
  const double u = uniform_open(rng);
  if (label < p_.w) return trunc_.quantile(u);
  return exp_quantile(u, p_.iota);
}

double apat_pdf(const ApatParams& p, double x) { return Apatosaurus(p).pdf(x); }
double apat_cdf(const ApatParams& p, double x) { return Apatosaurus(p).cdf(x); }
double apat_quantile(const ApatParams& p, double u) { return Apatosaurus(p).quantile(u); }
double apat_mean(const ApatParams& p) { return Apatosaurus(p).mean(); }
double apat_sample(const ApatParams& p, Rng& rng) { return Apatosaurus(p).sample(rng); }

// ---------------------------------------------------------------------------

TCopula::TCopula(const CopulaParams& p) : t_(p.nu) {
  if (!(p.nu > 0.0)) throw DomainError("t copula: nu must be positive");
  Eigen::LLT<Eigen::Matrix4d> llt(p.R);
  if (llt.info() != Eigen::Success) throw DomainError("t copula: R is not positive definite");
  L_ = llt.matrixL();
  double half_logdet = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (!(L_(i, i) > 0.0)) throw DomainError("t copula: R is not positive definite");
    half_logdet += std::log(L_(i, i));
  }
  const double nu = p.nu;
  log_norm_ = std::lgamma(0.5 * (nu + 4.0)) - std::lgamma(0.5 * nu) - 2.0 * (std::log(nu) + kLogPi) -
              half_logdet;
}

double TCopula::mvt_logdensity(std::span<const double, 4> x) const {
  std::array<double, 4> y{};
  double q = 0.0;
  for (int i = 0; i < 4; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= L_(i, j) * y[j];
    y[i] = s / L_(i, i);
    q += y[i] * y[i];
  }
  const double nu = t_.nu();
  return log_norm_ - 0.5 * (nu + 4.0) * std::log1p(q / nu);
}

double TCopula::logdensity_scores(std::span<const double, 4> x) const {
  double out = mvt_logdensity(x);
  for (double xi : x) out -= t_.logpdf(xi);
  return out;
}

double TCopula::logdensity(std::span<const double, 4> u) const {
  std::array<double, 4> x{};
  for (int i = 0; i < 4; ++i) x[i] = t_.quantile(std::clamp(u[i], kCopulaClamp, 1.0 - kCopulaClamp));
  return logdensity_scores(x);
}

std::array<double, 4> TCopula::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  std::gamma_distribution<double> chi2(0.5 * t_.nu(), 2.0);
  Eigen::Vector4d z;
  for (int i = 0; i < 4; ++i) z(i) = normal(rng);
  const double w = chi2(rng);
  const Eigen::Vector4d x = L_ * z / std::sqrt(w / t_.nu());
  std::array<double, 4> u{};
  for (int i = 0; i < 4; ++i) u[i] = t_.cdf(x(i));
  return u;
}

double t_copula_logdensity(const CopulaParams& p, std::span<const double, 4> u) {
  return TCopula(p).logdensity(u);
}

// ---------------------------------------------------------------------------

double check_loss(double eps, double u) { return eps * (u - (eps < 0.0 ? 1.0 : 0.0)); }

double al_logpdf(double x, double mu, double sigma, double u) {
  if (!(sigma > 0.0)) throw DomainError("al_logpdf: sigma must be > 0");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("al_logpdf: u must lie in (0,1)");
  return std::log(u * (1.0 - u) / sigma) - check_loss((x - mu) / sigma, u);
}

}  // namespace dqf::dist
