#pragma once

// Daily VaR from intra-daily quantile forecasts by a level-specific scaling
// factor s_u, with its marginal posterior [sum rho_u(y - s q)]^{-T}, a rolling
// refit protocol and the quantile scoring function.

#include "dqf/dqf_model.hpp"
#include "dqf/sampler.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dqf {

/// eps * (u - 1(eps < 0)).
double checkloss(double eps, double u);

double scaling_objective(double s, std::span<const double> yD, std::span<const double> qM, double u);

/// -T log sum_t rho_u(yD_t - s qM_t); +inf when the sum is 0.
double scaling_logposterior(double s, std::span<const double> yD, std::span<const double> qM, double u,
                            bool* degenerate = nullptr);

/// Exact minimiser of the check-loss objective (a weighted median of the
/// ratios yD_t / qM_t); equals the posterior mode.
double scaling_mode(std::span<const double> yD, std::span<const double> qM, double u);

struct ScalingPosterior {
  double u = 0.0;
  std::vector<double> draws;  // s_u
  std::vector<double> qM;
  double mode = 0.0;
  double acceptance = 0.0;

  double mean() const;
  /// Posterior mean of s_u * q for a new intra-daily quantile q.
  double var_forecast(double q) const { return mean() * q; }
};

/// Single-block adaptive sampler on the one-dimensional kernel.
SamplerConfig default_scaling_config();
ScalingPosterior sample_scaling(std::span<const double> yD, std::span<const double> qM, double u,
                                std::uint64_t seed, const SamplerConfig& cfg = default_scaling_config());

/// [1(y' >= y) - u](y' - y).
double quantile_score(double forecast, double realized, double u);

struct VaRRow {
  std::string day;
  double u = 0.0;
  double forecast = 0.0;
  double realized = 0.0;
};

using VaRForecastSeries = std::vector<VaRRow>;

/// Mean score per level.
std::map<double, double> score_series(const VaRForecastSeries& f);

struct BacktestConfig {
  std::size_t window = 3000;
  std::size_t refit_every = 10;
  SamplerConfig dqf_sampler{};
  SamplerConfig scale_sampler = default_scaling_config();
  std::size_t plugin_draws = 200;  // evenly spaced posterior draws averaged for the plug-in quantiles
  std::uint64_t seed = 1;
};

struct RefitRecord {
  std::size_t point = 0;  // number of days observed at the refit
  std::vector<double> theta_mean;
  std::map<double, double> s_mean;
  std::map<double, double> s_mode;
  std::vector<double> acceptance;
};

struct BacktestResult {
  VaRForecastSeries forecasts;
  std::map<double, double> mean_score;
  std::vector<RefitRecord> refits;
};

/// Refits at t' = window, window + refit_every, ... on the trailing window and
/// forecasts days t'+1 .. min(t' + refit_every, T).
BacktestResult rolling_backtest(const XiSeries& xi, std::span<const double> daily_returns,
                                std::span<const double> u_levels, const BacktestConfig& cfg);

/// Posterior-mean one-step-ahead intra-daily quantiles for rows 0..n of
/// `xi` (n + 1 rows, the last one beyond the data) from thinned draws.
std::vector<std::vector<double>> plugin_quantiles(const Eigen::MatrixXd& draws, const XiSeries& xi,
                                                  std::span<const double> u_levels, std::size_t n_draws,
                                                  const FilterInit& init);

/// Trailing-window empirical u-quantile of daily returns, over the same
/// forecast days as rolling_backtest.
VaRForecastSeries constant_quantile_baseline(const std::vector<std::string>& days,
                                             std::span<const double> daily_returns,
                                             std::span<const double> u_levels, std::size_t window);

/// Daily returns k * X_t(U_t) with X_t the day's g-and-h quantile function.
std::vector<double> synthetic_daily_returns(const XiSeries& xi, double k, std::uint64_t seed);

// --- files ---------------------------------------------------------------

std::string forecasts_csv(const VaRForecastSeries& f);
/// `day,u,forecast`; realized values are joined from `realized` by day.
VaRForecastSeries read_forecasts(const std::string& csv_text, const std::map<std::string, double>& realized);
/// Rows are models, columns are levels.
std::string score_table_csv(const std::map<std::string, std::map<double, double>>& by_model);

}  // namespace dqf
