#pragma once

// Signal ratio Var(E[xi_t | F_{t-1}]) / Var(xi_t): closed form for the
// exponential-smoothing margins, simulation for the Apatosaurus margin.

#include "dqf/dqf_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace dqf {

/// psi^2 / (1 - 2 psi phi - phi^2); requires |psi + phi| < 1.
double rsig_closed(double psi, double phi);

/// Same quantity written with the persistence gamma = psi + phi.
double rsig_gamma(double psi, double gamma);

/// Supremum of the signal ratio over invertible models with persistence gamma.
double rsig_invertibility_bound(double gamma);

struct RsigSimOptions {
  std::size_t n_sim = 1'000'000;
  std::size_t burn_in = 10'000;
};

/// Mean dynamics with Gaussian martingale-difference noise of unit variance.
double rsig_simulated_md(double psi, double phi, std::uint64_t seed, const RsigSimOptions& opt = {});

/// A full skewed-t margin (mean and variance recursions).
double rsig_simulated_margin(const MarginParams& p, std::uint64_t seed, const RsigSimOptions& opt = {});

/// The Apatosaurus margin for h; the conditional mean is the mixture mean.
double rsig_apatosaurus(const HParams& p, std::uint64_t seed, const RsigSimOptions& opt = {});

struct RsigResult {
  int margin = 0;  // 1..4
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string method;  // "closed-form" or "simulated"
};

/// Per-draw signal ratios over thinned posterior draws, summarised by the
/// posterior mean and equal-tailed 95% interval.
std::vector<RsigResult> rsig_posterior(const Eigen::MatrixXd& draws, int thin, std::uint64_t seed,
                                       const RsigSimOptions& h_options);

}  // namespace dqf
