#pragma once

// Repeated simulate-then-fit runs of the DQF model.

#include "dqf/dqf_model.hpp"
#include "dqf/sampler.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dqf {

struct ReplicateResult {
  std::size_t replicate = 0;
  std::vector<double> posterior_mean;
  std::vector<double> acceptance;  // per block, sampling phase
  int epochs = 0;
  bool mapc_converged = false;
  double seconds = 0.0;
};

struct StudyConfig {
  std::size_t replicates = 10;
  std::size_t T = 1500;
  DqfTheta truth = simulation_truth();
  SamplerConfig sampler = [] {
    SamplerConfig c;
    c.n_sample = 15000;
    c.n_sample_disc = 5000;
    return c;
  }();
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::function<void(const ReplicateResult&)> on_replicate;  // called under a lock
};

struct StudyResult {
  DqfTheta truth;
  std::vector<ReplicateResult> replicates;  // in replicate order
  std::vector<ParamSummary> mc;             // over replicate posterior means
  std::vector<double> mean_acceptance;      // per block
};

/// Replicate r uses data seed `seed + r` and sampler seed `seed + r + 500009`.
ReplicateResult run_replicate(const StudyConfig& cfg, std::size_t r);
StudyResult run_simulation_study(const StudyConfig& cfg);

/// `param,truth,mean,lower,upper`
std::string study_report_csv(const StudyResult& s);
/// `block,size,target,mean`
std::string acceptance_report_csv(const StudyResult& s);

}  // namespace dqf
