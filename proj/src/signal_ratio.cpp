#include "dqf/signal_ratio.hpp"

#include "dqf/errors.hpp"
#include "dqf/sampler.hpp"

#include <cmath>
#include <random>

namespace dqf {

namespace {

// Welford accumulator for a variance.
struct Moments {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double var() const { return m2 / (n - 1.0); }
};

}  // namespace

double rsig_closed(double psi, double phi) {
  if (!(std::abs(psi + phi) < 1.0)) throw DomainError("rsig_closed: requires |psi + phi| < 1");
  const double denom = 1.0 - 2.0 * psi * phi - phi * phi;
  if (!(denom > 0.0)) throw DomainError("rsig_closed: non-positive denominator");
  return psi * psi / denom;
}

double rsig_gamma(double psi, double gamma) {
  if (!(std::abs(gamma) < 1.0)) throw DomainError("rsig_gamma: requires |gamma| < 1");
  return psi * psi / (1.0 - gamma * gamma + psi * psi);
}

double rsig_invertibility_bound(double gamma) {
  if (!(std::abs(gamma) < 1.0)) throw DomainError("rsig_invertibility_bound: requires |gamma| < 1");
  return (std::abs(gamma) + 1.0) / 2.0;
}

double rsig_simulated_md(double psi, double phi, std::uint64_t seed, const RsigSimOptions& opt) {
  if (!(std::abs(psi + phi) < 1.0)) throw DomainError("rsig_simulated_md: requires |psi + phi| < 1");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  double mu = 0.0, x = 0.0;
  Moments m_mu, m_x;
  for (std::size_t t = 0; t < opt.burn_in + opt.n_sim; ++t) {
    mu = psi * x + phi * mu;
    x = mu + normal(rng);
    if (t >= opt.burn_in) {
      m_mu.add(mu);
      m_x.add(x);
    }
  }
  return m_mu.var() / m_x.var();
}

double rsig_simulated_margin(const MarginParams& p, std::uint64_t seed, const RsigSimOptions& opt) {
  if (!(std::abs(p.psi + p.phi) < 1.0) || !(p.alpha + p.beta < 1.0))
    throw DomainError("rsig_simulated_margin: non-stationary margin");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const dist::StandardSkewT v(p.eta, p.lambda);
  double mu = p.delta / (1.0 - p.psi - p.phi);
  double s2 = p.omega / (1.0 - p.alpha - p.beta);
  double x = mu;
  Moments m_mu, m_x;
  for (std::size_t t = 0; t < opt.burn_in + opt.n_sim; ++t) {
    const double eps = x - mu;
    mu = p.delta + p.psi * x + p.phi * mu;
    s2 = p.omega + p.alpha * eps * eps + p.beta * s2;
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    x = mu + std::sqrt(s2) * v.quantile(u);
    if (t >= opt.burn_in) {
      m_mu.add(mu);
      m_x.add(x);
    }
  }
  return m_mu.var() / m_x.var();
}

double rsig_apatosaurus(const HParams& p, std::uint64_t seed, const RsigSimOptions& opt) {
  if (!(p.psi + p.phi < 1.0) || p.psi < 0.0 || p.phi < 0.0 || p.delta < 0.0)
    throw DomainError("rsig_apatosaurus: non-stationary h margin");
  Rng rng(seed);
  double mu = p.delta / (1.0 - p.psi - p.phi);
  double x = mu;
  Moments m_mean, m_x;
  for (std::size_t t = 0; t < opt.burn_in + opt.n_sim; ++t) {
    mu = p.delta + p.psi * x + p.phi * mu;
    const dist::Apatosaurus apat({{mu, p.sigma, p.eta, p.lambda}, p.iota, h_weight(p, mu)});
    x = apat.sample(rng);
    if (t >= opt.burn_in) {
      m_mean.add(apat.mean());
      m_x.add(x);
    }
  }
  return m_mean.var() / m_x.var();
}

std::vector<RsigResult> rsig_posterior(const Eigen::MatrixXd& draws, int thin, std::uint64_t seed,
                                       const RsigSimOptions& h_options) {
  if (draws.cols() != kThetaDim || draws.rows() == 0) throw DomainError("rsig_posterior: bad draw matrix");
  if (thin < 1) throw DomainError("rsig_posterior: thin must be >= 1");
  std::vector<std::vector<double>> values(4);
  std::uint64_t k = 0;
  for (Eigen::Index r = 0; r < draws.rows(); r += thin, ++k) {
    DqfTheta th;
    for (int c = 0; c < kThetaDim; ++c) th[c] = draws(r, c);
    for (int i = 0; i < 3; ++i) values[i].push_back(rsig_closed(th.margin(i).psi, th.margin(i).phi));
    values[3].push_back(rsig_apatosaurus(th.h(), seed + k, h_options));
  }
  std::vector<RsigResult> out;
  for (int i = 0; i < 4; ++i) {
    const ParamSummary s = summarize_column(values[i]);
    out.push_back({i + 1, s.mean, s.lower, s.upper, i < 3 ? "closed-form" : "simulated"});
  }
  return out;
}

}  // namespace dqf
