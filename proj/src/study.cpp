#include "dqf/study.hpp"

#include "dqf/posterior.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <thread>

namespace dqf {

ReplicateResult run_replicate(const StudyConfig& cfg, std::size_t r) {
  const auto t0 = std::chrono::steady_clock::now();
  const XiSeries xi = simulate(cfg.truth, cfg.T, cfg.seed + r);
  const DqfTheta theta0 = initial_theta(xi);
  DqfPosterior post(xi, theta0);
  const PosteriorSample ps =
      run_adaptive(post, dqf_blocks(), initial_proposal_sd(theta0, xi), cfg.sampler, cfg.seed + r + 500009);
  ReplicateResult out;
  out.replicate = r;
  const Eigen::VectorXd m = ps.draws.colwise().mean();
  out.posterior_mean.assign(m.data(), m.data() + m.size());
  out.acceptance = ps.acceptance;
  out.epochs = static_cast<int>(ps.epochs.size());
  out.mapc_converged = ps.mapc_converged;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

StudyResult run_simulation_study(const StudyConfig& cfg) {
  StudyResult s;
  s.truth = cfg.truth;
  s.replicates.resize(cfg.replicates);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t r; (r = next++) < cfg.replicates;) {
      try {
        ReplicateResult res = run_replicate(cfg, r);
        std::lock_guard lock(mu);
        if (cfg.on_replicate) cfg.on_replicate(res);
        s.replicates[r] = std::move(res);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = cfg.replicates;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.replicates)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (int k = 0; k < kThetaDim; ++k) {
    std::vector<double> col;
    for (const auto& r : s.replicates) col.push_back(r.posterior_mean[k]);
    s.mc.push_back(summarize_column(col));
  }
  const auto blocks = dqf_blocks();
  s.mean_acceptance.assign(blocks.size(), 0.0);
  for (const auto& r : s.replicates)
    for (std::size_t b = 0; b < blocks.size(); ++b) s.mean_acceptance[b] += r.acceptance[b];
  for (double& a : s.mean_acceptance) a /= static_cast<double>(s.replicates.size());
  return s;
}

std::string study_report_csv(const StudyResult& s) {
  std::string out = "param,truth,mean,lower,upper\n";
  char buf[160];
  const auto& names = DqfTheta::names();
  for (int k = 0; k < kThetaDim; ++k) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g\n", std::string(names[k]).c_str(), s.truth[k], s.mc[k].mean,
                  s.mc[k].lower, s.mc[k].upper);
    out += buf;
  }
  return out;
}

std::string acceptance_report_csv(const StudyResult& s) {
  std::string out = "block,size,target,mean\n";
  char buf[96];
  const auto blocks = dqf_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.3f,%.3f\n", blocks[b].index, blocks[b].dim(),
                  target_acceptance(blocks[b].dim()), s.mean_acceptance[b]);
    out += buf;
  }
  return out;
}

}  // namespace dqf
