#pragma once

// The gh-DQF model: skewed-t exponential-smoothing margins for (a, b*, g),
// an Apatosaurus margin for h, a Student-t copula, prior, likelihood,
// simulation and one-step quantile-function forecasts.

#include "dqf/distributions.hpp"
#include "dqf/quantile_core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dqf {

inline constexpr int kThetaDim = 40;

/// Offsets of the parameter groups inside the flat 40-vector.
namespace idx {
inline constexpr int kMargin[3] = {0, 8, 16};  // delta psi phi omega alpha beta eta lambda
inline constexpr int kDelta = 0, kPsi = 1, kPhi = 2, kOmega = 3, kAlpha = 4, kBeta = 5, kEta = 6,
                     kLambda = 7;
inline constexpr int kH = 24;  // delta4 psi4 phi4 gamma* c sigma eta4 lambda4 iota
inline constexpr int kGammaStar = 27, kC = 28, kSigma = 29, kEta4 = 30, kLambda4 = 31, kIota = 32;
inline constexpr int kR = 33;  // R21 R31 R41 R32 R42 R43
inline constexpr int kNu = 39;
}  // namespace idx

struct MarginParams {
  double delta, psi, phi, omega, alpha, beta, eta, lambda;
};

struct HParams {
  double delta, psi, phi, gamma_star, c, sigma, eta, lambda, iota;
};

struct DqfTheta {
  std::array<double, kThetaDim> v{};

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  MarginParams margin(int i) const;
  HParams h() const;
  Eigen::Matrix4d R() const;
  double nu() const { return v[idx::kNu]; }
  dist::CopulaParams copula() const { return {R(), nu()}; }

  static const std::array<std::string_view, kThetaDim>& names();
  bool operator==(const DqfTheta&) const = default;
};

/// Daily quantile-function observations xi_t = (a, b*, g, h).
struct XiSeries {
  std::vector<std::string> day;
  std::vector<std::array<double, 4>> xi;

  std::size_t size() const { return xi.size(); }
  std::vector<double> column(int i) const;
  static XiSeries from_params(const std::vector<GHParams>& params,
                              std::vector<std::string> labels = {});
};

/// Pre-sample state. The recursions start from mu_0, sigma2_0 and a
/// pre-sample observation equal to mu_0, so the first innovation is zero.
struct FilterInit {
  std::array<double, 3> mu0{};
  std::array<double, 3> sigma2_0{};
  double mu4_0 = 0.0;
};

/// Sample means and variances of each column.
FilterInit filter_init(const XiSeries& xi);

/// Conditional quantities for days 1..T (index t-1).
struct FilterPath {
  std::array<std::vector<double>, 3> mu;
  std::array<std::vector<double>, 3> sigma2;
  std::vector<double> mu4;
  std::vector<double> w;
};

struct OneStepState {
  std::array<double, 3> mu{};
  std::array<double, 3> sigma2{};
  double mu4 = 0.0;
  double w = 0.0;
};

/// Returns an empty string when theta lies in the allowable region, else a
/// description of the first violated constraint.
std::string region_violation(const DqfTheta& theta);
bool in_region(const DqfTheta& theta);

double h_weight(const HParams& p, double mu4);

/// Runs the recursions; throws RegionError outside the allowable region.
FilterPath filter(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init);
FilterPath filter(const DqfTheta& theta, const XiSeries& xi);

/// State for day T+1 given the whole series.
OneStepState next_state(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init);

// ---------------------------------------------------------------------------
// Per-margin likelihood pieces, shared by the full likelihood and the cached
// posterior used by the sampler.

struct MarginTerms {
  std::vector<double> logpdf;  // log f_{i,t}(xi_{i,t})
  std::vector<double> pit;     // u_{i,t}
};

/// Margins 0..2 (a, b*, g). Returns false when any term is non-finite.
bool margin_terms(const MarginParams& p, std::span<const double> x, double mu0, double sigma2_0,
                  MarginTerms& out);
/// Margin 3 (h).
bool h_terms(const HParams& p, std::span<const double> x, double mu0, MarginTerms& out);

/// t scores F_St^{-1}(clamp(u)); returns false if any is non-finite.
bool t_scores(const dist::StudentT& t, std::span<const double> pit, std::vector<double>& out);

double logprior(const DqfTheta& theta);
/// Full evaluation; -inf outside the region or on non-finite terms.
double loglik(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init);
double loglik(const DqfTheta& theta, const XiSeries& xi);
double logposterior_kernel(const DqfTheta& theta, const XiSeries& xi, const FilterInit& init);
double logposterior_kernel(const DqfTheta& theta, const XiSeries& xi);

/// Draws T days from the model after `burn_in` discarded days, starting at
/// the unconditional means and variances.
XiSeries simulate(const DqfTheta& theta, std::size_t T, std::uint64_t seed,
                  std::size_t burn_in = 500);

// ---------------------------------------------------------------------------

inline constexpr double kHForecastMax = 0.99;

struct QfForecast {
  std::vector<GHParams> params;                // one row per forecast day
  std::vector<std::vector<double>> quantiles;  // [day][level]
  std::size_t clamped_h = 0;                   // days whose h mean was clamped
};

/// Conditional-mean quantile functions for days 1..T+1, each using only
/// information up to the previous day.
QfForecast forecast_qf(const DqfTheta& theta, const XiSeries& xi, std::span<const double> u_levels,
                       const FilterInit& init);
QfForecast forecast_qf(const DqfTheta& theta, const XiSeries& xi, std::span<const double> u_levels);

GHParams conditional_mean_params(const DqfTheta& theta, const OneStepState& s, bool* clamped = nullptr);

/// Parameter values of the simulation study.
DqfTheta simulation_truth();

/// A point of the allowable region matched to the data's moments.
DqfTheta initial_theta(const XiSeries& xi);

}  // namespace dqf
