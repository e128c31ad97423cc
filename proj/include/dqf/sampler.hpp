#pragma once

// Adaptive blocked random-walk Metropolis. Each sweep updates the blocks in
// order with mixture-normal proposals; tuning epochs adapt the block scales
// toward target acceptance rates and re-estimate block covariances until the
// chain's per-dimension standard deviations settle (MAPC), after which a
// fixed-kernel sampling phase is run.

#include "dqf/distributions.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dqf {

struct BlockSpec {
  int index = 0;             // 1-based
  std::vector<int> members;  // positions in the flat parameter vector
  int dim() const { return static_cast<int>(members.size()); }
};

/// 0.44 for one dimension, 0.35 for two to four, 0.234 above.
double target_acceptance(int dim);

/// The ten blocks of the 40-dimensional DQF parameter vector.
std::vector<BlockSpec> dqf_blocks();

/// One block covering all `dim` coordinates.
std::vector<BlockSpec> single_block(int dim);

/// A posterior known up to a constant that can evaluate block moves.
/// `stage` evaluates the kernel at the current state with one block replaced
/// and must be followed by `commit` or `discard`.
class BlockTarget {
 public:
  virtual ~BlockTarget() = default;
  virtual int dimension() const = 0;
  virtual const Eigen::VectorXd& state() const = 0;
  virtual double log_kernel() const = 0;
  virtual double stage(const BlockSpec& block, const Eigen::VectorXd& values) = 0;
  virtual void commit() = 0;
  virtual void discard() = 0;
  /// Moves to `x` and recomputes everything.
  virtual void reset(const Eigen::VectorXd& x) = 0;
  virtual bool admissible(const Eigen::VectorXd& x) const = 0;
};

/// Adapts a plain log-density function; every stage is a full evaluation.
class FunctionTarget : public BlockTarget {
 public:
  using LogDensity = std::function<double(const Eigen::VectorXd&)>;
  FunctionTarget(LogDensity f, const Eigen::VectorXd& x0);

  int dimension() const override { return static_cast<int>(x_.size()); }
  const Eigen::VectorXd& state() const override { return x_; }
  double log_kernel() const override { return lk_; }
  double stage(const BlockSpec& block, const Eigen::VectorXd& values) override;
  void commit() override;
  void discard() override {}
  void reset(const Eigen::VectorXd& x) override;
  bool admissible(const Eigen::VectorXd& x) const override;

 private:
  LogDensity f_;
  Eigen::VectorXd x_, staged_;
  double lk_ = 0.0, staged_lk_ = 0.0;
};

struct MixtureProposal {
  std::vector<double> weights{0.7, 0.15, 0.15};
  std::vector<double> scales{1.0, 100.0, 0.01};
};

/// current + delta * sqrt(s_j) * L z, with component j drawn from the mixture
/// weights and L the lower Cholesky factor of the block covariance.
Eigen::VectorXd propose_block(const Eigen::VectorXd& current, double delta, const Eigen::MatrixXd& chol,
                              Rng& rng, const MixtureProposal& mix = {}, int* component = nullptr);

/// delta * Phi^{-1}(r_tar / 2) / Phi^{-1}(r_obs / 2), with r_obs clamped to
/// [1 / n_delta, 1 - 1 / n_delta].
double tune_scale(double delta, double r_obs, double r_tar, int n_delta = 200);

struct BlockTuning {
  double delta = 1.0;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;
  long accepted = 0;       // since the last scale update
  long attempted = 0;
  long total_accepted = 0;
  long total_attempted = 0;

  void set_cov(const Eigen::MatrixXd& c);
  void reset_counters() { accepted = attempted = total_accepted = total_attempted = 0; }
};

/// One pass over all blocks. Returns the number of accepted sub-moves.
int sweep(BlockTarget& target, const std::vector<BlockSpec>& blocks, std::vector<BlockTuning>& tuning,
          Rng& rng, const MixtureProposal& mix = {});

/// Sample covariance with a ridge of 1e-10 * trace / d added when the
/// Cholesky factorisation fails. Returns false if it is still singular.
bool regularized_covariance(const Eigen::MatrixXd& draws, Eigen::MatrixXd& cov);

/// Mean absolute relative change between two standard-deviation vectors.
double mapc(const Eigen::VectorXd& sd_prev, const Eigen::VectorXd& sd_curr);

struct SamplerConfig {
  int n_epo = 12000;
  int n_disc = 2000;
  int j_min = 2;
  int j_max = 30;
  double eps_mapc = 0.1;
  int n_delta = 200;
  int n_sample = 105000;
  int n_sample_disc = 5000;
  MixtureProposal mix;
};

struct EpochRecord {
  int epoch = 0;
  double mapc = 0.0;  // NaN for the first epoch
  std::vector<double> acceptance;
  std::vector<double> mean_delta;
};

struct PosteriorSample {
  Eigen::MatrixXd draws;  // retained sampling-phase iterations x dimension
  std::vector<double> acceptance;
  std::vector<double> delta;
  std::vector<EpochRecord> epochs;
  bool mapc_converged = false;
  std::uint64_t seed = 0;
};

/// Full adaptive run from the target's current state. `initial_sd` gives the
/// diagonal of the first epoch's proposal covariances.
PosteriorSample run_adaptive(BlockTarget& target, const std::vector<BlockSpec>& blocks,
                             const Eigen::VectorXd& initial_sd, const SamplerConfig& config,
                             std::uint64_t seed);

struct ParamSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed 95% interval from the order statistics at ranks
/// ceil(0.025 n) and floor(0.975 n).
ParamSummary summarize_column(std::vector<double> x);
std::vector<ParamSummary> summarize(const PosteriorSample& sample);

}  // namespace dqf
