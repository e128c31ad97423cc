#include "dqf/synthetic.hpp"

#include "dqf/quantile_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dqf {

SyntheticMarket simulate_market(const DqfTheta& theta, const SyntheticMarketOptions& opt, std::uint64_t seed) {
  SyntheticMarket m;
  m.xi = simulate(theta, opt.days, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_u = [&] { return std::clamp(unif(rng), 1e-12, 1.0 - 1e-12); };

  std::chrono::sys_days day{opt.start};
  double price = opt.start_price;
  const int n_min = (opt.close - opt.open) / 60;
  for (std::size_t t = 0; t < opt.days; ++t) {
    while (std::chrono::weekday{day}.iso_encoding() > 5) day += std::chrono::days{1};
    const auto& x = m.xi.xi[t];
    const GHParams p{x[0], x[1], x[2], x[3]};
    TickDay d;
    d.date = Date{day};
    if (unif(rng) < opt.stray_prob) {
      d.seconds.push_back(opt.open - 60);
      d.prices.push_back(price);
    }
    for (int i = 0; i <= n_min; ++i) {
      if (i > 0) price *= std::exp(gh_quantile(p, draw_u()) / 100.0);
      d.seconds.push_back(opt.open + 60 * i);
      d.prices.push_back(price);
    }
    if (unif(rng) < opt.spike_prob) {
      const std::size_t first = d.prices.size() - static_cast<std::size_t>(n_min) - 1;
      const std::size_t i = first + 1 + static_cast<std::size_t>(unif(rng) * (n_min - 1));
      d.prices[i] *= 1.02;
    }
    d.flags.assign(d.prices.size(), kKept);
    m.xi.day[t] = format_date(d.date);
    m.daily_returns.push_back(opt.daily_scale * gh_quantile(p, draw_u()));
    m.ticks.push_back(std::move(d));
    day += std::chrono::days{1};
  }
  return m;
}

}  // namespace dqf
