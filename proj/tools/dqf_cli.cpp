// dqf: command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include "dqf/csv_io.hpp"
#include "dqf/dqf_model.hpp"
#include "dqf/errors.hpp"
#include "dqf/posterior.hpp"
#include "dqf/quantile_core.hpp"
#include "dqf/sampler.hpp"
#include "dqf/signal_ratio.hpp"
#include "dqf/study.hpp"
#include "dqf/synthetic.hpp"
#include "dqf/tickclean.hpp"
#include "dqf/var_scaling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dqf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure inside a pipeline stage; keeps the stage name and exit code.
struct StageError : std::runtime_error {
  int code;
  StageError(const std::string& stage, const std::string& what, int c)
      : std::runtime_error(stage + ": " + what), code(c) {}
};

int exit_code_of(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->code;
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kUsage;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return kData;
  return kNumerical;
}

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), exit_code_of(e));
  }
}

struct Global {
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  bool ci = false;

  std::uint64_t require_seed() const {
    if (seed) return *seed;
    if (ci || std::getenv("CI")) throw UsageError("--seed is required in CI mode");
    return 1;
  }
};

struct SamplerOpts {
  SamplerConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--n-epo", cfg.n_epo, "iterations per tuning epoch")->check(CLI::PositiveNumber);
    app->add_option("--n-disc", cfg.n_disc, "iterations discarded per epoch")->check(CLI::NonNegativeNumber);
    app->add_option("--j-min", cfg.j_min, "minimum tuning epochs")->check(CLI::PositiveNumber);
    app->add_option("--j-max", cfg.j_max, "maximum tuning epochs")->check(CLI::PositiveNumber);
    app->add_option("--eps-mapc", cfg.eps_mapc, "MAPC tolerance")->check(CLI::PositiveNumber);
    app->add_option("--n-delta", cfg.n_delta, "iterations between scale updates")->check(CLI::PositiveNumber);
    app->add_option("--n-sample", cfg.n_sample, "sampling-phase iterations")->check(CLI::PositiveNumber);
    app->add_option("--n-sample-disc", cfg.n_sample_disc, "sampling-phase iterations discarded")
        ->check(CLI::NonNegativeNumber);
  }
  void validate() const {
    if (cfg.n_disc >= cfg.n_epo) throw UsageError("--n-disc must be below --n-epo");
    if (cfg.n_sample_disc >= cfg.n_sample) throw UsageError("--n-sample-disc must be below --n-sample");
    if (cfg.j_min > cfg.j_max) throw UsageError("--j-min exceeds --j-max");
  }
};

json sampler_json(const SamplerConfig& c) {
  return {{"n_epo", c.n_epo},       {"n_disc", c.n_disc},     {"j_min", c.j_min},
          {"j_max", c.j_max},       {"eps_mapc", c.eps_mapc}, {"n_delta", c.n_delta},
          {"n_sample", c.n_sample}, {"n_sample_disc", c.n_sample_disc}};
}

void write(const fs::path& p, const std::string& s) { io::write_file_atomic(p, s); }

std::string fmt(double x) { return io::fmt(x); }

// --- clean ------------------------------------------------------------------

struct CleanArgs {
  std::string ticks, calendar = "data/session_times.txt", instrument, out_dir = "out";
};

CleanSummary cmd_clean(const CleanArgs& a) {
  const SessionCalendar cal = SessionCalendar::load(a.calendar);
  const std::vector<TickDay> days = read_ticks(a.ticks);
  std::vector<TickDay> cleaned;
  for (const auto& d : days) cleaned.push_back(clean_day(d, cal, a.instrument));
  const fs::path out(a.out_dir);
  write(out / "cleaned.csv", ticks_csv(cleaned, true));
  write(out / "removals.csv", removal_log_csv(cleaned));
  write(out / "returns.csv", returns_csv(cleaned));
  const CleanSummary s = summarize_cleaning(cleaned);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.2f\n", a.instrument.c_str(), s.days, s.obs, s.deleted_pct());
  write(out / "clean_summary.csv", std::string("instrument,days,obs,del_pct\n") + buf);
  std::printf("%-8s Days %zu  Obs %zu  Del %.2f%%  (days kept %zu)\n", a.instrument.c_str(), s.days, s.obs,
              s.deleted_pct(), s.days_kept);
  for (const auto& [rule, n] : s.by_rule) std::printf("  rule %d: %zu\n", rule, n);
  return s;
}

// --- symbolize --------------------------------------------------------------

struct SymbolizeArgs {
  std::string returns, out = "out/xi.csv";
};

XiSeries cmd_symbolize(const SymbolizeArgs& a, const Global& g) {
  std::vector<std::string> labels;
  const auto days = io::read_day_returns(a.returns, &labels);
  const auto fits = construct_symbols(days, g.threads);
  XiSeries xi;
  xi.day = labels;
  for (const auto& f : fits) xi.xi.push_back({f.params.a, f.params.b_star, f.params.g, f.params.h});
  write(a.out, io::xi_csv(xi));
  std::printf("symbolized %zu days -> %s\n", xi.size(), a.out.c_str());
  return xi;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string xi, out_dir = "out";
  SamplerOpts sampler;
};

Eigen::MatrixXd cmd_fit(const FitArgs& a, const Global& g) {
  a.sampler.validate();
  const std::uint64_t seed = g.require_seed();
  const XiSeries xi = io::read_xi(a.xi);
  if (xi.size() < 2) throw DataError("fit: need at least two days");
  const DqfTheta theta0 = initial_theta(xi);
  DqfPosterior post(xi, theta0);
  const PosteriorSample ps = run_adaptive(post, dqf_blocks(), initial_proposal_sd(theta0, xi), a.sampler.cfg, seed);
  const fs::path out(a.out_dir);
  write(out / "draws.csv", io::draws_csv(ps.draws));

  const auto sum = summarize(ps);
  std::string s = "param,mean,lower,upper\n";
  const auto& names = DqfTheta::names();
  for (int k = 0; k < kThetaDim; ++k)
    s += std::string(names[k]) + "," + fmt(sum[k].mean) + "," + fmt(sum[k].lower) + "," + fmt(sum[k].upper) + "\n";
  write(out / "posterior_summary.csv", s);

  std::string acc = "block,size,target,rate,delta\n";
  const auto blocks = dqf_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b)
    acc += std::to_string(blocks[b].index) + "," + std::to_string(blocks[b].dim()) + "," +
           fmt(target_acceptance(blocks[b].dim())) + "," + fmt(ps.acceptance[b]) + "," + fmt(ps.delta[b]) + "\n";
  write(out / "acceptance.csv", acc);

  json epochs = json::array();
  for (const auto& e : ps.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"mapc", std::isnan(e.mapc) ? json(nullptr) : json(e.mapc)},
                      {"acceptance", e.acceptance}});
  const json meta = {{"seed", seed}, {"days", xi.size()}, {"sampler", sampler_json(a.sampler.cfg)},
                     {"mapc_converged", ps.mapc_converged}, {"epochs", epochs}};
  write(out / "fit.json", meta.dump(2) + "\n");
  std::printf("fit: %zu days, %zu epochs%s, %ld retained draws -> %s\n", xi.size(), ps.epochs.size(),
              ps.mapc_converged ? "" : " (MAPC not reached)", static_cast<long>(ps.draws.rows()),
              (out / "draws.csv").c_str());
  return ps.draws;
}

// --- forecast ---------------------------------------------------------------

struct ForecastArgs {
  std::string xi, draws, out = "out/forecast.csv";
  std::vector<double> levels{0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
  std::size_t n_draws = 200;
};

void cmd_forecast(const ForecastArgs& a) {
  const XiSeries xi = io::read_xi(a.xi);
  const Eigen::MatrixXd draws = io::read_draws(a.draws);
  const auto q = plugin_quantiles(draws, xi, a.levels, a.n_draws, filter_init(xi));
  std::string s = "day,horizon";
  for (double u : a.levels) s += ",q" + fmt(u);
  s += "\n";
  for (std::size_t t = 0; t < q.size(); ++t) {
    s += (t < xi.size() ? xi.day[t] : std::string("next")) + (t < xi.size() ? ",in-sample" : ",out-of-sample");
    for (double v : q[t]) s += "," + fmt(v);
    s += "\n";
  }
  write(a.out, s);
  std::printf("forecast: %zu rows -> %s\n", q.size(), a.out.c_str());
}

// --- signal ratio -------------------------------------------------------------

struct RsigArgs {
  std::string draws, out = "out/signal_ratio.csv";
  int thin = 100;
  std::size_t n_sim = 100000;
};

void cmd_signal_ratio(const RsigArgs& a, const Global& g) {
  const std::uint64_t seed = g.require_seed();
  const Eigen::MatrixXd draws = io::read_draws(a.draws);
  RsigSimOptions o;
  o.n_sim = a.n_sim;
  const auto res = rsig_posterior(draws, a.thin, seed, o);
  std::string s = "margin,point,lower,upper,method\n";
  for (const auto& r : res)
    s += std::to_string(r.margin) + "," + fmt(r.point) + "," + fmt(r.lower) + "," + fmt(r.upper) + "," + r.method + "\n";
  write(a.out, s);
  for (const auto& r : res) std::printf("margin %d  %.4f  (%.4f, %.4f)  %s\n", r.margin, r.point, r.lower, r.upper, r.method.c_str());
}

// --- var backtest -------------------------------------------------------------

struct BacktestArgs {
  std::string xi, daily, out_dir = "out";
  std::vector<double> levels{0.05, 0.01};
  std::size_t window = 3000, refit_every = 10, plugin_draws = 200;
  std::vector<std::string> external;  // name=path
  SamplerOpts sampler;
};

std::map<std::string, double> read_daily(const std::string& path) {
  const io::CsvTable t = io::read_csv(path);
  const std::size_t cd = t.column("day"), cr = t.column("return");
  std::map<std::string, double> m;
  for (std::size_t r = 0; r < t.rows.size(); ++r) m[t.rows[r][cd]] = t.number(r, cr);
  return m;
}

std::map<double, double> cmd_var_backtest(const BacktestArgs& a, const Global& g) {
  a.sampler.validate();
  const std::uint64_t seed = g.require_seed();
  const XiSeries xi = io::read_xi(a.xi);
  const auto daily = read_daily(a.daily);
  std::vector<double> y;
  for (const auto& d : xi.day) {
    const auto it = daily.find(d);
    if (it == daily.end()) throw DataError("no daily return for day " + d);
    y.push_back(it->second);
  }
  BacktestConfig cfg;
  cfg.window = a.window;
  cfg.refit_every = a.refit_every;
  cfg.dqf_sampler = a.sampler.cfg;
  cfg.plugin_draws = a.plugin_draws;
  cfg.seed = seed;
  const BacktestResult res = rolling_backtest(xi, y, a.levels, cfg);

  const fs::path out(a.out_dir);
  write(out / "var_forecasts.csv", forecasts_csv(res.forecasts));
  std::string sc = "point";
  for (double u : a.levels) sc += ",s_mean_u" + fmt(u);
  sc += "\n";
  for (const auto& r : res.refits) {
    sc += std::to_string(r.point);
    for (double u : a.levels) sc += "," + fmt(r.s_mean.at(u));
    sc += "\n";
  }
  write(out / "scaling.csv", sc);

  std::map<std::string, std::map<double, double>> table{{"DQF", res.mean_score}};
  table["Constant"] = score_series(constant_quantile_baseline(xi.day, y, a.levels, a.window));
  for (const auto& spec : a.external) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--external expects name=path");
    table[spec.substr(0, eq)] = score_series(read_forecasts(io::read_file(spec.substr(eq + 1)), daily));
  }
  write(out / "scores.csv", score_table_csv(table));
  for (const auto& [model, m] : table) {
    std::printf("%-10s", model.c_str());
    for (const auto& [u, v] : m) std::printf("  u=%g: %.4f", u, v);
    std::printf("\n");
  }
  return res.mean_score;
}

// --- simulate-recover ---------------------------------------------------------

struct StudyArgs {
  std::size_t replicates = 10, T = 1500;
  std::string out_dir = "out";
  SamplerOpts sampler;
  StudyArgs() {
    sampler.cfg.n_sample = 15000;
    sampler.cfg.n_sample_disc = 5000;
  }
};

void cmd_simulate_recover(const StudyArgs& a, const Global& g) {
  a.sampler.validate();
  StudyConfig c;
  c.replicates = a.replicates;
  c.T = a.T;
  c.sampler = a.sampler.cfg;
  c.seed = g.require_seed();
  c.threads = g.threads;
  c.on_replicate = [](const ReplicateResult& r) {
    std::printf("replicate %zu: %d epochs, %.0f s\n", r.replicate + 1, r.epochs, r.seconds);
    std::fflush(stdout);
  };
  const StudyResult s = run_simulation_study(c);
  const fs::path out(a.out_dir);
  write(out / "recovery.csv", study_report_csv(s));
  write(out / "acceptance.csv", acceptance_report_csv(s));
  std::printf("%-12s %12s %12s %12s %12s\n", "param", "truth", "mean", "lower", "upper");
  const auto& names = DqfTheta::names();
  for (int k = 0; k < kThetaDim; ++k)
    std::printf("%-12s %12.5g %12.5g %12.5g %12.5g\n", std::string(names[k]).c_str(), s.truth[k], s.mc[k].mean,
                s.mc[k].lower, s.mc[k].upper);
  std::printf("\nblock  target  mean\n");
  const auto blocks = dqf_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b)
    std::printf("%2d (%d)  %.3f  %.3f\n", blocks[b].index, blocks[b].dim(), target_acceptance(blocks[b].dim()),
                s.mean_acceptance[b]);
}

// --- simulate-market ----------------------------------------------------------

struct MarketArgs {
  std::size_t days = 600;
  std::string out_dir = "out";
};

void cmd_simulate_market(const MarketArgs& a, const Global& g) {
  SyntheticMarketOptions o;
  o.days = a.days;
  const SyntheticMarket m = simulate_market(simulation_truth(), o, g.require_seed());
  const fs::path out(a.out_dir);
  write(out / "ticks.csv", ticks_csv(m.ticks, false));
  write(out / "xi_true.csv", io::xi_csv(m.xi));
  std::string d = "day,return\n";
  for (std::size_t t = 0; t < m.daily_returns.size(); ++t) d += m.xi.day[t] + "," + fmt(m.daily_returns[t]) + "\n";
  write(out / "daily_returns.csv", d);
  std::printf("simulated %zu days -> %s\n", a.days, a.out_dir.c_str());
}

// --- pipeline -----------------------------------------------------------------

struct PipelineArgs {
  CleanArgs clean;
  std::string daily;
  BacktestArgs backtest;
  std::size_t n_draws = 200;
};

void cmd_pipeline(PipelineArgs a, const Global& g) {
  const fs::path out(a.clean.out_dir);
  stage("clean", [&] { return cmd_clean(a.clean); });
  stage("symbolize", [&] {
    return cmd_symbolize({(out / "returns.csv").string(), (out / "xi.csv").string()}, g);
  });
  stage("fit", [&] {
    FitArgs f;
    f.xi = (out / "xi.csv").string();
    f.out_dir = out.string();
    f.sampler = a.backtest.sampler;
    return cmd_fit(f, g);
  });
  stage("forecast", [&] {
    ForecastArgs f;
    f.xi = (out / "xi.csv").string();
    f.draws = (out / "draws.csv").string();
    f.out = (out / "forecast.csv").string();
    f.n_draws = a.n_draws;
    cmd_forecast(f);
    return 0;
  });
  stage("var-backtest", [&] {
    a.backtest.xi = (out / "xi.csv").string();
    a.backtest.daily = a.daily;
    a.backtest.out_dir = out.string();
    return cmd_var_backtest(a.backtest, g);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic quantile function models for intra-daily returns"};
  app.set_config("--config", "", "INI/TOML file with option defaults; flags override it");
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option_function<std::uint64_t>("--seed", [&g](const std::uint64_t& s) { g.seed = s; }, "random seed");
  app.add_flag("--ci", g.ci, "require an explicit --seed");

  CleanArgs clean;
  auto* c_clean = app.add_subcommand("clean", "apply the cleaning rules to a tick file");
  c_clean->add_option("--ticks", clean.ticks, "timestamp,price CSV")->required();
  c_clean->add_option("--calendar", clean.calendar, "session calendar");
  c_clean->add_option("--instrument", clean.instrument, "calendar instrument")->required();
  c_clean->add_option("--out-dir", clean.out_dir);

  SymbolizeArgs sym;
  auto* c_sym = app.add_subcommand("symbolize", "fit a g-and-h quantile function to each day");
  c_sym->add_option("--returns", sym.returns, "day_index,return CSV")->required();
  c_sym->add_option("--out", sym.out);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "adaptive MCMC for the DQF model");
  c_fit->add_option("--xi", fit.xi, "day,a,b_star,g,h CSV")->required();
  c_fit->add_option("--out-dir", fit.out_dir);
  fit.sampler.add(c_fit);

  StudyArgs study;
  auto* c_study = app.add_subcommand("simulate-recover", "simulate-then-fit study");
  c_study->add_option("--replicates", study.replicates)->check(CLI::PositiveNumber);
  c_study->add_option("--T", study.T, "days per dataset")->check(CLI::Range(2, 1000000));
  c_study->add_option("--out-dir", study.out_dir);
  study.sampler.add(c_study);

  MarketArgs market;
  auto* c_market = app.add_subcommand("simulate-market", "synthetic ticks and daily returns");
  c_market->add_option("--days", market.days)->check(CLI::PositiveNumber);
  c_market->add_option("--out-dir", market.out_dir);

  ForecastArgs fc;
  auto* c_fc = app.add_subcommand("forecast", "posterior-mean one-step-ahead quantiles");
  c_fc->add_option("--xi", fc.xi)->required();
  c_fc->add_option("--draws", fc.draws)->required();
  c_fc->add_option("--levels", fc.levels)->check(CLI::Range(0.0, 1.0));
  c_fc->add_option("--n-draws", fc.n_draws)->check(CLI::PositiveNumber);
  c_fc->add_option("--out", fc.out);

  RsigArgs rs;
  auto* c_rs = app.add_subcommand("signal-ratio", "signal ratio of each margin");
  c_rs->add_option("--draws", rs.draws)->required();
  c_rs->add_option("--thin", rs.thin)->check(CLI::PositiveNumber);
  c_rs->add_option("--n-sim", rs.n_sim, "simulation length for the h margin")->check(CLI::PositiveNumber);
  c_rs->add_option("--out", rs.out);

  BacktestArgs bt;
  auto add_backtest = [](CLI::App* c, BacktestArgs& b) {
    c->add_option("--levels", b.levels)->check(CLI::Range(0.0, 1.0));
    c->add_option("--window", b.window)->check(CLI::PositiveNumber);
    c->add_option("--refit-every", b.refit_every)->check(CLI::PositiveNumber);
    c->add_option("--plugin-draws", b.plugin_draws)->check(CLI::PositiveNumber);
    c->add_option("--external", b.external, "name=path of a day,u,forecast CSV");
    b.sampler.add(c);
  };
  auto* c_bt = app.add_subcommand("var-backtest", "rolling VaR forecasts and scores");
  c_bt->add_option("--xi", bt.xi)->required();
  c_bt->add_option("--daily", bt.daily, "day,return CSV")->required();
  c_bt->add_option("--out-dir", bt.out_dir);
  add_backtest(c_bt, bt);

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "clean, symbolize, fit, forecast and backtest");
  c_pl->add_option("--ticks", pl.clean.ticks)->required();
  c_pl->add_option("--calendar", pl.clean.calendar);
  c_pl->add_option("--instrument", pl.clean.instrument)->required();
  c_pl->add_option("--daily", pl.daily, "day,return CSV")->required();
  c_pl->add_option("--out-dir", pl.clean.out_dir);
  c_pl->add_option("--n-draws", pl.n_draws)->check(CLI::PositiveNumber);
  add_backtest(c_pl, pl.backtest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_clean) stage("clean", [&] { return cmd_clean(clean); });
    if (*c_sym) cmd_symbolize(sym, g);
    if (*c_fit) cmd_fit(fit, g);
    if (*c_study) cmd_simulate_recover(study, g);
    if (*c_market) cmd_simulate_market(market, g);
    if (*c_fc) cmd_forecast(fc);
    if (*c_rs) cmd_signal_ratio(rs, g);
    if (*c_bt) cmd_var_backtest(bt, g);
    if (*c_pl) cmd_pipeline(pl, g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_of(e);
  }
  return kOk;
}
