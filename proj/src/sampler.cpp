#include "dqf/sampler.hpp"

#include "dqf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dqf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd gather(const Eigen::VectorXd& x, const BlockSpec& b) {
  Eigen::VectorXd out(b.dim());
  for (int k = 0; k < b.dim(); ++k) out(k) = x(b.members[k]);
  return out;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& draws, const BlockSpec& b) {
  Eigen::MatrixXd out(draws.rows(), b.dim());
  for (int k = 0; k < b.dim(); ++k) out.col(k) = draws.col(b.members[k]);
  return out;
}

}  // namespace

double target_acceptance(int dim) {
  if (dim <= 1) return 0.44;
  if (dim <= 4) return 0.35;
  return 0.234;
}

std::vector<BlockSpec> dqf_blocks() {
  const int sizes[10] = {3, 5, 3, 5, 3, 5, 5, 4, 6, 1};
  std::vector<BlockSpec> blocks;
  int next = 0;
  for (int b = 0; b < 10; ++b) {
    BlockSpec s;
    s.index = b + 1;
    for (int k = 0; k < sizes[b]; ++k) s.members.push_back(next++);
    blocks.push_back(std::move(s));
  }
  return blocks;
}

std::vector<BlockSpec> single_block(int dim) {
  BlockSpec s;
  s.index = 1;
  s.members.resize(dim);
  std::iota(s.members.begin(), s.members.end(), 0);
  return {s};
}

// ---------------------------------------------------------------------------

FunctionTarget::FunctionTarget(LogDensity f, const Eigen::VectorXd& x0) : f_(std::move(f)) { reset(x0); }

double FunctionTarget::stage(const BlockSpec& block, const Eigen::VectorXd& values) {
  staged_ = x_;
  for (int k = 0; k < block.dim(); ++k) staged_(block.members[k]) = values(k);
  const double v = f_(staged_);
  staged_lk_ = std::isnan(v) ? kNegInf : v;
  return staged_lk_;
}

void FunctionTarget::commit() {
  x_.swap(staged_);
  lk_ = staged_lk_;
}

void FunctionTarget::reset(const Eigen::VectorXd& x) {
  x_ = x;
  lk_ = f_(x_);
}

bool FunctionTarget::admissible(const Eigen::VectorXd& x) const { return std::isfinite(f_(x)); }

// ---------------------------------------------------------------------------

Eigen::VectorXd propose_block(const Eigen::VectorXd& current, double delta, const Eigen::MatrixXd& chol,
                              Rng& rng, const MixtureProposal& mix, int* component) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  const double pick = unif(rng);
  std::size_t j = 0;
  double cum = mix.weights[0];
  while (pick >= cum && j + 1 < mix.weights.size()) cum += mix.weights[++j];
  if (component) *component = static_cast<int>(j);
  Eigen::VectorXd z(current.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
  const Eigen::VectorXd step = chol.triangularView<Eigen::Lower>() * z;
  return current + (delta * std::sqrt(mix.scales[j])) * step;
}

double tune_scale(double delta, double r_obs, double r_tar, int n_delta) {
  const double lo = 1.0 / n_delta;
  const double r = std::clamp(r_obs, lo, 1.0 - lo);
  return delta * dist::normal_quantile(r_tar / 2.0) / dist::normal_quantile(r / 2.0);
}

void BlockTuning::set_cov(const Eigen::MatrixXd& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw NumericalError("proposal covariance is not positive definite");
  cov = c;
  chol = llt.matrixL();
}

int sweep(BlockTarget& target, const std::vector<BlockSpec>& blocks, std::vector<BlockTuning>& tuning,
          Rng& rng, const MixtureProposal& mix) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int accepted = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    BlockTuning& tu = tuning[b];
    const Eigen::VectorXd cur = gather(target.state(), blocks[b]);
    const Eigen::VectorXd prop = propose_block(cur, tu.delta, tu.chol, rng, mix);
    const double lp = target.stage(blocks[b], prop);
    const double diff = lp - target.log_kernel();
    const double u = unif(rng);
    const bool accept = lp > kNegInf && (diff >= 0.0 || std::log(u) < diff);
    if (accept) {
      target.commit();
      ++tu.accepted;
      ++tu.total_accepted;
      ++accepted;
    } else {
      target.discard();
    }
    ++tu.attempted;
    ++tu.total_attempted;
  }
  return accepted;
}

bool regularized_covariance(const Eigen::MatrixXd& draws, Eigen::MatrixXd& cov) {
  const Eigen::Index n = draws.rows(), d = draws.cols();
  if (n < 2) return false;
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (Eigen::LLT<Eigen::MatrixXd> llt(cov); llt.info() == Eigen::Success &&
                                            (llt.matrixLLT().diagonal().array() > 0.0).all()) {
    return true;
  }
  const double ridge = 1e-10 * cov.trace() / static_cast<double>(d);
  if (!(ridge > 0.0)) return false;
  cov.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  return llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all();
}

double mapc(const Eigen::VectorXd& sd_prev, const Eigen::VectorXd& sd_curr) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < sd_prev.size(); ++i) {
    const double diff = std::abs(sd_curr(i) - sd_prev(i));
    if (diff == 0.0) continue;
    s += diff / std::abs(sd_prev(i));
  }
  return s / static_cast<double>(sd_prev.size());
}

// ---------------------------------------------------------------------------

PosteriorSample run_adaptive(BlockTarget& target, const std::vector<BlockSpec>& blocks,
                             const Eigen::VectorXd& initial_sd, const SamplerConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.n_epo - cfg.n_disc < 2 || cfg.n_disc < 0) throw DomainError("sampler: n_epo must exceed n_disc + 1");
  if (cfg.n_sample - cfg.n_sample_disc < 1 || cfg.n_sample_disc < 0)
    throw DomainError("sampler: n_sample must exceed n_sample_disc");
  if (cfg.j_min < 1 || cfg.j_max < cfg.j_min || cfg.n_delta < 2) throw DomainError("sampler: bad epoch settings");
  if (!std::isfinite(target.log_kernel())) throw NumericalError("sampler: initial state has zero density");
  const int dim = target.dimension();
  if (initial_sd.size() != dim) throw DomainError("sampler: initial_sd has the wrong size");

  Rng rng(seed);
  const std::size_t nb = blocks.size();
  std::vector<BlockTuning> tuning(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(blocks[b].dim(), blocks[b].dim());
    for (int k = 0; k < blocks[b].dim(); ++k) {
      const double s = initial_sd(blocks[b].members[k]);
      if (!(s > 0.0)) throw DomainError("sampler: initial_sd must be positive");
      c(k, k) = s * s;
    }
    tuning[b].set_cov(c);
  }

  PosteriorSample out;
  out.seed = seed;
  const int kept = cfg.n_epo - cfg.n_disc;
  Eigen::MatrixXd draws(kept, dim);
  Eigen::VectorXd prev_sd;
  std::vector<double> delta_sum(nb);

  for (int j = 1; j <= cfg.j_max; ++j) {
    for (std::size_t b = 0; b < nb; ++b) {
      tuning[b].delta = 2.38 / std::sqrt(static_cast<double>(blocks[b].dim()));
      tuning[b].reset_counters();
      delta_sum[b] = 0.0;
    }
    for (int it = 1; it <= cfg.n_epo; ++it) {
      sweep(target, blocks, tuning, rng, cfg.mix);
      if (it > cfg.n_disc) {
        draws.row(it - cfg.n_disc - 1) = target.state().transpose();
        for (std::size_t b = 0; b < nb; ++b) delta_sum[b] += tuning[b].delta;
      }
      if (it % cfg.n_delta == 0 && it < cfg.n_epo) {
        for (std::size_t b = 0; b < nb; ++b) {
          BlockTuning& tu = tuning[b];
          const double r = static_cast<double>(tu.accepted) / static_cast<double>(tu.attempted);
          tu.delta = tune_scale(tu.delta, r, target_acceptance(blocks[b].dim()), cfg.n_delta);
          tu.accepted = tu.attempted = 0;
        }
      }
    }

    const Eigen::RowVectorXd mean = draws.colwise().mean();
    const Eigen::VectorXd sd =
        ((draws.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(kept - 1)).sqrt();
    EpochRecord rec;
    rec.epoch = j;
    rec.mapc = j > 1 ? mapc(prev_sd, sd) : std::numeric_limits<double>::quiet_NaN();
    for (std::size_t b = 0; b < nb; ++b) {
      rec.acceptance.push_back(static_cast<double>(tuning[b].total_accepted) /
                               static_cast<double>(tuning[b].total_attempted));
      rec.mean_delta.push_back(delta_sum[b] / kept);
    }
    out.epochs.push_back(rec);
    prev_sd = sd;

    for (std::size_t b = 0; b < nb; ++b) {
      Eigen::MatrixXd c;
      if (regularized_covariance(gather_columns(draws, blocks[b]), c)) tuning[b].set_cov(c);
    }

    const bool stop = j >= cfg.j_min && rec.mapc <= cfg.eps_mapc;
    if (stop || j == cfg.j_max) {
      out.mapc_converged = stop;
      break;
    }
  }

  // Sampling phase with frozen kernels.
  const EpochRecord& last = out.epochs.back();
  for (std::size_t b = 0; b < nb; ++b) {
    tuning[b].delta = last.mean_delta[b];
    tuning[b].reset_counters();
  }
  const Eigen::VectorXd last_state = target.state();
  const Eigen::VectorXd start = draws.colwise().mean().transpose();
  if (target.admissible(start)) {
    target.reset(start);
    if (!std::isfinite(target.log_kernel())) target.reset(last_state);
  }

  const int retained = cfg.n_sample - cfg.n_sample_disc;
  out.draws.resize(retained, dim);
  for (int it = 1; it <= cfg.n_sample; ++it) {
    if (it == cfg.n_sample_disc + 1) {
      for (auto& tu : tuning) tu.reset_counters();
    }
    sweep(target, blocks, tuning, rng, cfg.mix);
    if (it > cfg.n_sample_disc) out.draws.row(it - cfg.n_sample_disc - 1) = target.state().transpose();
  }
  for (std::size_t b = 0; b < nb; ++b) {
    out.acceptance.push_back(static_cast<double>(tuning[b].total_accepted) /
                             static_cast<double>(tuning[b].total_attempted));
    out.delta.push_back(tuning[b].delta);
  }
  return out;
}

// ---------------------------------------------------------------------------

ParamSummary summarize_column(std::vector<double> x) {
  if (x.empty()) throw DomainError("summarize: empty sample");
  const std::size_t n = x.size();
  ParamSummary s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::sort(x.begin(), x.end());
  const std::size_t lo = std::max<std::size_t>(1, (25 * n + 999) / 1000);
  const std::size_t hi = std::max<std::size_t>(1, 975 * n / 1000);
  s.lower = x[lo - 1];
  s.upper = x[hi - 1];
  return s;
}

std::vector<ParamSummary> summarize(const PosteriorSample& sample) {
  std::vector<ParamSummary> out;
  for (Eigen::Index c = 0; c < sample.draws.cols(); ++c) {
    const Eigen::VectorXd col = sample.draws.col(c);
    out.push_back(summarize_column(std::vector<double>(col.data(), col.data() + col.size())));
  }
  return out;
}

}  // namespace dqf
