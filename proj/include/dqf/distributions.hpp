#pragma once

// Univariate and copula distributions used by the quantile-function model:
// Student t, Hansen's skewed t (mode/scale and standardised forms), the
// zero-truncated skewed t, Exponential, the Apatosaurus mixture, asymmetric
// Laplace and the Student-t copula.

#include <Eigen/Dense>

#include <array>
#include <random>
#include <span>

namespace dqf {

using Rng = std::mt19937_64;

namespace dist {

double normal_cdf(double z);
double normal_quantile(double u);

/// Unit-scale Student t with real degrees of freedom nu > 0.
class StudentT {
 public:
  explicit StudentT(double nu);
  double nu() const { return nu_; }
  double logpdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  /// Inverse cdf via the inverse regularised incomplete beta function.
  double quantile(double u) const;

 private:
  double nu_;
  double log_norm_;
};

double t_cdf(double x, double nu);
double t_quantile(double u, double nu);

// ---------------------------------------------------------------------------
// Skewed t in mode/scale form.

struct SktParams {
  double mu = 0.0;
  double sigma = 1.0;
  double eta = 10.0;
  double lambda = 0.0;
};

void validate(const SktParams& p);

/// Hansen's skewed t with mode mu and scale sigma. Evaluation methods do
/// not re-validate; construct through `make` when parameters are untrusted.
class SkewT {
 public:
  explicit SkewT(const SktParams& p);
  static SkewT make(const SktParams& p);

  const SktParams& params() const { return p_; }
  double logpdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;

 private:
  SktParams p_;
  double log_c_;
  double root_ratio_;  // sqrt(eta / (eta - 2))
  StudentT t_;
};

double skt_pdf(const SktParams& p, double x);
double skt_cdf(const SktParams& p, double x);
double skt_quantile(const SktParams& p, double u);

// ---------------------------------------------------------------------------
// Standardised skewed t (mean 0, variance 1). With Y ~ SkewT(0, 1, eta, lambda)
// the mean is a = 4 lambda c (eta - 2) / (eta - 1) and E[Y^2] = 1 + 3 lambda^2,
// so v = (Y - a) / b with b = sqrt(1 + 3 lambda^2 - a^2).

class StandardSkewT {
 public:
  StandardSkewT(double eta, double lambda);
  double shift() const { return a_; }
  double stretch() const { return b_; }
  double logpdf(double v) const;
  double pdf(double v) const;
  double cdf(double v) const;
  double quantile(double u) const;

 private:
  SkewT base_;
  double a_;
  double b_;
  double log_b_;
};

double skt_std_pdf(double eta, double lambda, double v);
double skt_std_cdf(double eta, double lambda, double v);

// ---------------------------------------------------------------------------
// Skewed t truncated to [0, inf).

class TruncatedSkewT {
 public:
  explicit TruncatedSkewT(const SktParams& p);
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;
  /// Closed-form mean, valid for a non-negative mode.
  double mean() const;
  double mass_below_zero() const { return f0_; }

 private:
  SkewT base_;
  double f0_;  // F_skt(0)
};

double trskt_pdf(const SktParams& p, double x);
double trskt_cdf(const SktParams& p, double x);
double trskt_quantile(const SktParams& p, double u);
double trskt_mean(const SktParams& p);

// ---------------------------------------------------------------------------

double exp_pdf(double x, double iota);
double exp_cdf(double x, double iota);
double exp_quantile(double u, double iota);

struct ApatParams {
  SktParams skt;
  double iota = 1e-4;
  double w = 1.0;
};

void validate(const ApatParams& p);

/// Mixture w * TruncatedSkewT + (1 - w) * Exponential(mean iota) on [0, inf).
class Apatosaurus {
 public:
  explicit Apatosaurus(const ApatParams& p);
  const ApatParams& params() const { return p_; }
  double pdf(double x) const;
  double logpdf(double x) const;
  double cdf(double x) const;
  /// Bracketed bisection with Newton polishing; tolerance 1e-10.
  double quantile(double u) const;
  double mean() const;
  double sample(Rng& rng) const;

 private:
  ApatParams p_;
  TruncatedSkewT trunc_;
};

double apat_pdf(const ApatParams& p, double x);
double apat_cdf(const ApatParams& p, double x);
double apat_quantile(const ApatParams& p, double u);
double apat_mean(const ApatParams& p);
double apat_sample(const ApatParams& p, Rng& rng);

// ---------------------------------------------------------------------------

inline constexpr double kCopulaClamp = 1e-12;

struct CopulaParams {
  Eigen::Matrix4d R = Eigen::Matrix4d::Identity();
  double nu = 15.0;
};

/// Student-t copula with correlation matrix R and shared nu. Construction
/// fails with DomainError when R is not positive definite.
class TCopula {
 public:
  explicit TCopula(const CopulaParams& p);
  double nu() const { return t_.nu(); }
  /// Log density at a vector of t scores x_i = F_St^{-1}(u_i; nu).
  double logdensity_scores(std::span<const double, 4> x) const;
  /// Only the multivariate-t part, without the univariate denominators.
  double mvt_logdensity(std::span<const double, 4> x) const;
  double logdensity(std::span<const double, 4> u) const;
  /// Draws a PIT vector: multivariate t mapped through the univariate t cdf.
  std::array<double, 4> sample(Rng& rng) const;
  const Eigen::Matrix4d& cholesky() const { return L_; }

 private:
  StudentT t_;
  Eigen::Matrix4d L_;
  double log_norm_;
};

double t_copula_logdensity(const CopulaParams& p, std::span<const double, 4> u);

// ---------------------------------------------------------------------------

/// Check loss rho_u(e) = e * (u - 1{e < 0}).
double check_loss(double eps, double u);

double al_logpdf(double x, double mu, double sigma, double u);

}  // namespace dist
}  // namespace dqf
