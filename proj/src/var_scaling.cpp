#include "dqf/var_scaling.hpp"

#include "dqf/errors.hpp"
#include "dqf/posterior.hpp"
#include "dqf/quantile_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace dqf {

namespace {

void check_level(double u, const char* who) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError(std::string(who) + ": u must lie in (0, 1)");
}

void check_lengths(std::span<const double> yD, std::span<const double> qM, const char* who) {
  if (yD.size() != qM.size()) throw DomainError(std::string(who) + ": yD and qM differ in length");
  if (yD.empty()) throw DomainError(std::string(who) + ": empty series");
}

// Linear-interpolation sample quantile.
double empirical_quantile(std::vector<double> x, double u) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * u;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

double checkloss(double eps, double u) { return eps * (u - (eps < 0.0 ? 1.0 : 0.0)); }

double scaling_objective(double s, std::span<const double> yD, std::span<const double> qM, double u) {
  check_level(u, "scaling_objective");
  check_lengths(yD, qM, "scaling_objective");
  double sum = 0.0;
  for (std::size_t t = 0; t < yD.size(); ++t) sum += checkloss(yD[t] - s * qM[t], u);
  return sum;
}

double scaling_logposterior(double s, std::span<const double> yD, std::span<const double> qM, double u,
                            bool* degenerate) {
  const double obj = scaling_objective(s, yD, qM, u);
  if (degenerate) *degenerate = !(obj > 0.0);
  if (!(obj > 0.0)) return std::numeric_limits<double>::infinity();
  return -static_cast<double>(yD.size()) * std::log(obj);
}

double scaling_mode(std::span<const double> yD, std::span<const double> qM, double u) {
  check_level(u, "scaling_mode");
  check_lengths(yD, qM, "scaling_mode");
  // Slope of the objective left of every breakpoint, then +|q| at each one.
  std::vector<std::pair<double, double>> bp;
  double slope = 0.0;
  for (std::size_t t = 0; t < yD.size(); ++t) {
    const double q = qM[t];
    if (q == 0.0) continue;
    bp.emplace_back(yD[t] / q, std::abs(q));
    slope += q > 0.0 ? -q * u : -std::abs(q) * (1.0 - u);
  }
  if (bp.empty()) throw DomainError("scaling_mode: all intra-daily quantiles are zero");
  std::sort(bp.begin(), bp.end());
  for (const auto& [s, w] : bp) {
    slope += w;
    if (slope >= 0.0) return s;
  }
  return bp.back().first;
}

double ScalingPosterior::mean() const {
  if (draws.empty()) throw DomainError("ScalingPosterior: no draws");
  return std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
}

SamplerConfig default_scaling_config() {
  SamplerConfig c;
  c.n_epo = 2000;
  c.n_disc = 500;
  c.j_min = 2;
  c.j_max = 10;
  c.n_sample = 11000;
  c.n_sample_disc = 1000;
  return c;
}

ScalingPosterior sample_scaling(std::span<const double> yD, std::span<const double> qM, double u,
                                std::uint64_t seed, const SamplerConfig& cfg) {
  const double mode = scaling_mode(yD, qM, u);
  bool degenerate = false;
  scaling_logposterior(mode, yD, qM, u, &degenerate);
  if (degenerate) throw DegenerateSampleError("sample_scaling: perfect fit, the posterior is improper");

  std::vector<double> y(yD.begin(), yD.end()), q(qM.begin(), qM.end());
  FunctionTarget target(
      [y, q, u](const Eigen::VectorXd& x) { return scaling_logposterior(x(0), y, q, u); },
      Eigen::VectorXd::Constant(1, mode));
  const Eigen::VectorXd sd = Eigen::VectorXd::Constant(1, std::max(0.1 * std::abs(mode), 1e-3));
  const PosteriorSample ps = run_adaptive(target, single_block(1), sd, cfg, seed);

  ScalingPosterior out;
  out.u = u;
  out.qM = q;
  out.mode = mode;
  out.draws.assign(ps.draws.data(), ps.draws.data() + ps.draws.rows());
  out.acceptance = ps.acceptance.empty() ? 0.0 : ps.acceptance[0];
  return out;
}

double quantile_score(double forecast, double realized, double u) {
  return ((forecast >= realized ? 1.0 : 0.0) - u) * (forecast - realized);
}

std::map<double, double> score_series(const VaRForecastSeries& f) {
  if (f.empty()) throw DomainError("score_series: no forecasts");
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& r : f) {
    auto& a = acc[r.u];
    a.first += quantile_score(r.forecast, r.realized, r.u);
    ++a.second;
  }
  std::map<double, double> out;
  for (const auto& [u, a] : acc) out[u] = a.first / static_cast<double>(a.second);
  return out;
}

std::vector<std::vector<double>> plugin_quantiles(const Eigen::MatrixXd& draws, const XiSeries& xi,
                                                  std::span<const double> u_levels, std::size_t n_draws,
                                                  const FilterInit& init) {
  if (draws.rows() == 0 || draws.cols() != kThetaDim) throw DomainError("plugin_quantiles: bad draw matrix");
  const auto rows = static_cast<std::size_t>(draws.rows());
  const std::size_t m = std::clamp<std::size_t>(n_draws, 1, rows);
  std::vector<std::vector<double>> mean(xi.size() + 1, std::vector<double>(u_levels.size(), 0.0));
  for (std::size_t k = 0; k < m; ++k) {
    // Evenly spaced through the retained draws, ending at the last one.
    const std::size_t r = (k + 1) * rows / m - 1;
    DqfTheta th;
    for (int c = 0; c < kThetaDim; ++c) th[c] = draws(static_cast<Eigen::Index>(r), c);
    const QfForecast f = forecast_qf(th, xi, u_levels, init);
    for (std::size_t t = 0; t < mean.size(); ++t)
      for (std::size_t j = 0; j < u_levels.size(); ++j) mean[t][j] += f.quantiles[t][j];
  }
  for (auto& row : mean)
    for (double& v : row) v /= static_cast<double>(m);
  return mean;
}

BacktestResult rolling_backtest(const XiSeries& xi, std::span<const double> daily_returns,
                                std::span<const double> u_levels, const BacktestConfig& cfg) {
  const std::size_t T = xi.size(), W = cfg.window, K = cfg.refit_every;
  if (daily_returns.size() != T) throw DomainError("rolling_backtest: returns and QF series differ in length");
  if (W == 0 || K == 0) throw DomainError("rolling_backtest: window and refit_every must be positive");
  if (T <= W) throw DomainError("rolling_backtest: series not longer than the window");
  for (double u : u_levels) check_level(u, "rolling_backtest");

  auto slice = [&xi](std::size_t from, std::size_t to) {
    XiSeries s;
    s.day.assign(xi.day.begin() + static_cast<std::ptrdiff_t>(from), xi.day.begin() + static_cast<std::ptrdiff_t>(to));
    s.xi.assign(xi.xi.begin() + static_cast<std::ptrdiff_t>(from), xi.xi.begin() + static_cast<std::ptrdiff_t>(to));
    return s;
  };

  BacktestResult res;
  std::vector<double> warm;
  std::uint64_t refit = 0;
  for (std::size_t r = W; r < T; r += K, ++refit) {
    const std::size_t m = std::min(K, T - r);
    const XiSeries win = slice(r - W, r);
    const FilterInit init = filter_init(win);

    DqfTheta theta0 = initial_theta(win);
    if (!warm.empty()) {
      DqfTheta w;
      for (int c = 0; c < kThetaDim; ++c) w[c] = warm[c];
      if (std::isfinite(logposterior_kernel(w, win, init))) theta0 = w;
    }
    DqfPosterior post(win, theta0, init);
    const std::uint64_t seed = cfg.seed + 1000003ULL * refit;
    const PosteriorSample ps = run_adaptive(post, dqf_blocks(), initial_proposal_sd(theta0, win), cfg.dqf_sampler, seed);

    RefitRecord rec;
    rec.point = r;
    rec.acceptance = ps.acceptance;
    const Eigen::VectorXd tm = ps.draws.colwise().mean();
    rec.theta_mean.assign(tm.data(), tm.data() + tm.size());
    warm = rec.theta_mean;

    const XiSeries ext = slice(r - W, r + m - 1);
    const auto q = plugin_quantiles(ps.draws, ext, u_levels, cfg.plugin_draws, init);
    for (std::size_t j = 0; j < u_levels.size(); ++j) {
      std::vector<double> qM(W), yD(daily_returns.begin() + static_cast<std::ptrdiff_t>(r - W),
                                    daily_returns.begin() + static_cast<std::ptrdiff_t>(r));
      for (std::size_t t = 0; t < W; ++t) qM[t] = q[t][j];
      const ScalingPosterior sp = sample_scaling(yD, qM, u_levels[j], seed + 7 + j, cfg.scale_sampler);
      const double s_bar = sp.mean();
      rec.s_mean[u_levels[j]] = s_bar;
      rec.s_mode[u_levels[j]] = sp.mode;
      for (std::size_t k = 0; k < m; ++k) {
        res.forecasts.push_back({xi.day[r + k], u_levels[j], s_bar * q[W + k][j], daily_returns[r + k]});
      }
    }
    res.refits.push_back(std::move(rec));
  }
  std::stable_sort(res.forecasts.begin(), res.forecasts.end(),
                   [](const VaRRow& a, const VaRRow& b) { return a.u > b.u; });
  res.mean_score = score_series(res.forecasts);
  return res;
}

VaRForecastSeries constant_quantile_baseline(const std::vector<std::string>& days,
                                             std::span<const double> daily_returns,
                                             std::span<const double> u_levels, std::size_t window) {
  const std::size_t T = daily_returns.size();
  if (days.size() != T) throw DomainError("constant_quantile_baseline: days and returns differ in length");
  if (window == 0 || T <= window) throw DomainError("constant_quantile_baseline: series not longer than the window");
  VaRForecastSeries out;
  for (double u : u_levels) {
    check_level(u, "constant_quantile_baseline");
    for (std::size_t t = window; t < T; ++t) {
      const std::vector<double> past(daily_returns.begin() + static_cast<std::ptrdiff_t>(t - window),
                                     daily_returns.begin() + static_cast<std::ptrdiff_t>(t));
      out.push_back({days[t], u, empirical_quantile(past, u), daily_returns[t]});
    }
  }
  return out;
}

std::vector<double> synthetic_daily_returns(const XiSeries& xi, double k, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(xi.size());
  for (std::size_t t = 0; t < xi.size(); ++t) {
    const double u = std::clamp(unif(rng), 1e-12, 1.0 - 1e-12);
    const auto& x = xi.xi[t];
    out[t] = k * gh_quantile(GHParams{x[0], x[1], x[2], x[3]}, u);
  }
  return out;
}

std::string forecasts_csv(const VaRForecastSeries& f) {
  std::string s = "day,u,forecast,realized\n";
  for (const auto& r : f) s += r.day + "," + fmt(r.u) + "," + fmt(r.forecast) + "," + fmt(r.realized) + "\n";
  return s;
}

VaRForecastSeries read_forecasts(const std::string& csv_text, const std::map<std::string, double>& realized) {
  std::istringstream in(csv_text);
  std::string line;
  VaRForecastSeries out;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("day,u,forecast", 0) != 0) throw DataError("forecast CSV must start with day,u,forecast");
      continue;
    }
    std::istringstream ls(line);
    std::string day, us, fs;
    if (!std::getline(ls, day, ',') || !std::getline(ls, us, ',') || !std::getline(ls, fs, ','))
      throw DataError("forecast CSV line " + std::to_string(lineno) + ": expected day,u,forecast");
    const auto it = realized.find(day);
    if (it == realized.end()) throw DataError("forecast CSV line " + std::to_string(lineno) + ": no return for day " + day);
    try {
      out.push_back({day, std::stod(us), std::stod(fs), it->second});
    } catch (const std::exception&) {
      throw DataError("forecast CSV line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

std::string score_table_csv(const std::map<std::string, std::map<double, double>>& by_model) {
  std::vector<double> levels;
  for (const auto& [model, m] : by_model)
    for (const auto& [u, v] : m) levels.push_back(u);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::string s = "model";
  for (double u : levels) s += ",u=" + fmt(u);
  s += "\n";
  for (const auto& [model, m] : by_model) {
    s += model;
    for (double u : levels) {
      const auto it = m.find(u);
      s += "," + (it == m.end() ? std::string("") : fmt(it->second));
    }
    s += "\n";
  }
  return s;
}

}  // namespace dqf
