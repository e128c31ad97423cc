#pragma once

// DQF posterior kernel with per-margin caches, so a block move recomputes
// only the margins it touches plus the copula term.

#include "dqf/dqf_model.hpp"
#include "dqf/sampler.hpp"

#include <array>
#include <vector>

namespace dqf {

class DqfPosterior : public BlockTarget {
 public:
  DqfPosterior(XiSeries xi, const DqfTheta& theta0);
  DqfPosterior(XiSeries xi, const DqfTheta& theta0, const FilterInit& init);

  int dimension() const override { return kThetaDim; }
  const Eigen::VectorXd& state() const override { return x_; }
  double log_kernel() const override { return cur_.kernel; }
  double stage(const BlockSpec& block, const Eigen::VectorXd& values) override;
  void commit() override;
  void discard() override;
  void reset(const Eigen::VectorXd& x) override;
  bool admissible(const Eigen::VectorXd& x) const override;

  double loglik() const { return cur_.kernel - cur_.prior; }
  const XiSeries& data() const { return xi_; }
  const FilterInit& init() const { return init_; }
  DqfTheta theta() const;

  static DqfTheta to_theta(const Eigen::VectorXd& x);
  static Eigen::VectorXd to_vector(const DqfTheta& theta);

 private:
  struct Cache {
    std::array<MarginTerms, 4> terms;
    std::array<std::vector<double>, 4> scores;
    std::array<double, 4> margin_sum{};  // sum of log f_{i,t}
    std::array<double, 4> tlog_sum{};    // sum of log f_St(score)
    double mvt_sum = 0.0;
    double prior = 0.0;
    double kernel = 0.0;
  };

  // Recomputes margin i of `c` at theta; false on non-finite terms.
  bool eval_margin(int i, const DqfTheta& theta, const dist::StudentT& t, Cache& c) const;
  bool eval_scores(int i, const dist::StudentT& t, Cache& c) const;
  void eval_copula(const DqfTheta& theta, Cache& c) const;
  void full(const DqfTheta& theta, Cache& c) const;

  XiSeries xi_;
  FilterInit init_;
  std::array<std::vector<double>, 4> cols_;
  Eigen::VectorXd x_, staged_x_;
  Cache cur_, staged_;
  std::array<bool, 4> staged_margin_{};
  bool staged_nu_ = false;
  bool staged_valid_ = false;
};

/// Diagonal proposal standard deviations for the first tuning epoch.
Eigen::VectorXd initial_proposal_sd(const DqfTheta& theta0, const XiSeries& xi);

}  // namespace dqf
