#pragma once

// Synthetic market: one-minute prices whose daily return distributions follow
// a simulated DQF path, plus daily returns with a known quantile scaling.

#include "dqf/dqf_model.hpp"
#include "dqf/tickclean.hpp"

#include <cstdint>
#include <vector>

namespace dqf {

struct SyntheticMarketOptions {
  std::size_t days = 600;
  Date start{std::chrono::year{2001}, std::chrono::month{1}, std::chrono::day{2}};
  int open = 9 * 3600 + 30 * 60;  // session 09:30-16:00, one price per minute
  int close = 16 * 3600;
  double start_price = 1000.0;
  double daily_scale = 5.0;        // daily return = daily_scale * X_t(U_t)
  double spike_prob = 0.05;        // chance per day of one planted price error
  double stray_prob = 0.1;         // chance per day of one tick before the open
};

struct SyntheticMarket {
  XiSeries xi;                       // true daily quantile-function parameters
  std::vector<TickDay> ticks;
  std::vector<double> daily_returns;  // aligned with xi
};

/// Weekdays only, labelled by date.
SyntheticMarket simulate_market(const DqfTheta& theta, const SyntheticMarketOptions& opt, std::uint64_t seed);

}  // namespace dqf
