#pragma once

// g-and-h quantile functions, their L-moments, and the L-moment estimator
// that summarises one day of returns as a four-parameter quantile function.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqf {

/// One day's quantile function: location a, log-scale b_star (b = exp(b_star)),
/// asymmetry g and tail weight h >= 0.
struct GHParams {
  double a = 0.0;
  double b_star = 0.0;
  double g = 0.0;
  double h = 0.0;

  double scale() const;
  bool operator==(const GHParams&) const = default;
};

struct LMoments {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double tau3 = 0.0;
  double tau4 = 0.0;
};

/// Below this |g| the symmetric (g = 0) branch of the quantile function is used.
inline constexpr double kGZeroThreshold = 1e-8;

/// The g-and-h transform of a standard normal score z.
double gh_transform(const GHParams& params, double z);

/// X(u) for u in (0,1). Throws DomainError for u outside (0,1) or h < 0.
double gh_quantile(const GHParams& params, double u);

/// Population L-moments by adaptive Gauss-Kronrod quadrature in the normal
/// score z = Phi^{-1}(u). Requires h < 1 (finite mean).
LMoments gh_lmoments(const GHParams& params);

/// Unbiased sample L-moments from probability weighted moments. The input
/// need not be sorted. Throws DegenerateSampleError when all values coincide.
LMoments sample_lmoments(std::span<const double> y);

struct GHFitOptions {
  double objective_tolerance = 1e-12;
  int max_evaluations_per_start = 2000;
  bool polish = true;
};

struct GHFit {
  GHParams params;
  double objective = 0.0;
  bool converged = false;
  int evaluations = 0;
};

/// Minimises the squared distance between population and sample
/// (L-skewness, L-kurtosis) over g and h in [0, 1), then sets b and a from
/// the first two L-moments.
GHFit fit_gh(std::span<const double> y, const GHFitOptions& options = {});

/// Same estimator, starting from already-computed sample L-moments.
GHFit fit_gh_from_lmoments(const LMoments& sample, const GHFitOptions& options = {});

inline constexpr std::size_t kMinDaySize = 60;

class SymbolError : public std::runtime_error {
 public:
  SymbolError(std::size_t day, const std::string& what);
  std::size_t day() const { return day_; }

 private:
  std::size_t day_;
};

/// Fits one quantile function per day vector, preserving order. Days may be
/// fitted on several threads; output order and values do not depend on it.
std::vector<GHFit> construct_symbols(const std::vector<std::vector<double>>& days,
                                     unsigned threads = 1, const GHFitOptions& options = {});

}  // namespace dqf
