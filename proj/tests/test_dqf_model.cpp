#include "dqf/dqf_model.hpp"
#include "dqf/errors.hpp"
#include "dqf/posterior.hpp"
#include "dqf/sampler.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace dqf;

namespace {

const XiSeries& sim1500() {
  static const XiSeries xi = simulate(simulation_truth(), 1500, 77);
  return xi;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> o(x.size());
  std::iota(o.begin(), o.end(), 0);
  std::sort(o.begin(), o.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t k = 0; k < o.size(); ++k) r[o[k]] = double(k);
  return r;
}

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = double(u.size());
  double d = 0;
  for (std::size_t i = 0; i < u.size(); ++i) d = std::max({d, u[i] - i / n, (i + 1) / n - u[i]});
  return d;
}

// random points of the allowable region near the simulation truth
DqfTheta random_admissible(Rng& rng) {
  std::normal_distribution<double> z;
  const DqfTheta truth = simulation_truth();
  for (;;) {
    DqfTheta th = truth;
    for (int k = 0; k < kThetaDim; ++k) th[k] += 0.1 * std::max(std::abs(truth[k]), 1e-3) * z(rng);
    if (in_region(th)) return th;
  }
}

}  // namespace

TEST(Region, Truth) {
  EXPECT_TRUE(in_region(simulation_truth()));
  EXPECT_EQ(DqfTheta::names().size(), 40u);
}

TEST(Region, Violations) {
  DqfTheta th = simulation_truth();
  th[idx::kMargin[0] + idx::kPsi] = 0.29;  // psi + phi = 1.2
  EXPECT_FALSE(in_region(th));
  th = simulation_truth();
  th[idx::kGammaStar] = 6.5;
  EXPECT_FALSE(in_region(th));
  th = simulation_truth();
  th[idx::kNu] = 41;
  EXPECT_FALSE(in_region(th));
  th = simulation_truth();
  for (int k = 0; k < 6; ++k) th[idx::kR + k] = -0.5;  // not positive definite
  EXPECT_FALSE(in_region(th));
}

TEST(Filter, NoGarchGivesConstantVariance) {
  DqfTheta th = simulation_truth();
  for (int i = 0; i < 3; ++i) {
    th[idx::kMargin[i] + idx::kAlpha] = 0;
    th[idx::kMargin[i] + idx::kBeta] = 0;
  }
  FilterPath p = filter(th, sim1500());
  for (int i = 0; i < 3; ++i)
    for (double s2 : p.sigma2[i]) ASSERT_EQ(s2, th.margin(i).omega);
}

TEST(Filter, StaticHMargin) {
  DqfTheta th = simulation_truth();
  th[idx::kH + 1] = 0;
  th[idx::kH + 2] = 0;
  FilterPath p = filter(th, sim1500());
  const HParams h = th.h();
  const double w = 0.5 + 0.5 / (1 + std::exp(-std::exp(h.gamma_star) * (h.delta - h.c)));
  for (std::size_t t = 0; t < p.mu4.size(); ++t) {
    ASSERT_EQ(p.mu4[t], h.delta);
    ASSERT_NEAR(p.w[t], w, 1e-15);
  }
}

TEST(Filter, FirstStepUsesZeroInnovation) {
  const DqfTheta th = simulation_truth();
  const FilterInit init = filter_init(sim1500());
  FilterPath p = filter(th, sim1500(), init);
  for (int i = 0; i < 3; ++i) {
    const MarginParams m = th.margin(i);
    EXPECT_NEAR(p.mu[i][0], m.delta + (m.psi + m.phi) * init.mu0[i], 1e-15);
    EXPECT_NEAR(p.sigma2[i][0], m.omega + m.beta * init.sigma2_0[i], 1e-15);
  }
}

TEST(Filter, TracksScale) {
  FilterPath p = filter(simulation_truth(), sim1500());
  EXPECT_GT(correlation(p.mu[1], sim1500().column(1)), 0.3);
}

TEST(Filter, OutsideRegion) {
  DqfTheta th = simulation_truth();
  th[idx::kMargin[1] + idx::kAlpha] = 0.5;
  th[idx::kMargin[1] + idx::kBeta] = 0.6;
  EXPECT_THROW(filter(th, sim1500()), RegionError);
}

TEST(Filter, PositivityAndWeightRange) {
  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    DqfTheta th = random_admissible(rng);
    FilterPath p = filter(th, sim1500());
    for (int i = 0; i < 3; ++i)
      for (double s2 : p.sigma2[i]) ASSERT_GT(s2, 0.0);
    for (std::size_t t = 0; t < p.mu4.size(); ++t) {
      ASSERT_GE(p.mu4[t], 0.0);
      ASSERT_GE(p.w[t], 0.5);
      ASSERT_LE(p.w[t], 1.0);
    }
  }
}

TEST(Prior, Examples) {
  DqfTheta th = simulation_truth();
  const double base = logprior(th);
  ASSERT_TRUE(std::isfinite(base));

  DqfTheta bad = th;
  bad[idx::kMargin[0] + idx::kPsi] = 0.29;
  EXPECT_EQ(logprior(bad), -INFINITY);

  DqfTheta dbl = th;
  dbl[idx::kMargin[0] + idx::kOmega] *= 2;
  EXPECT_NEAR(logprior(dbl), base - std::log(2.0), 1e-12);

  DqfTheta a = th, b = th;
  a[idx::kIota] = 1e-5;
  b[idx::kIota] = 1e-300;
  EXPECT_NEAR(logprior(b) - logprior(a), std::log(2.0), 1e-12);
}

TEST(Kernel, AdditiveAndRejecting) {
  const DqfTheta th = simulation_truth();
  const double ll = loglik(th, sim1500());
  ASSERT_TRUE(std::isfinite(ll));
  EXPECT_NEAR(logposterior_kernel(th, sim1500()), ll + logprior(th), 1e-9);

  DqfTheta bad = th;
  bad[idx::kNu] = 1.5;
  EXPECT_EQ(logposterior_kernel(bad, sim1500()), -INFINITY);
  EXPECT_EQ(loglik(bad, sim1500()), -INFINITY);
}

TEST(Loglik, DeterministicOnDuplicatedData) {
  XiSeries twice = sim1500();
  twice.xi.insert(twice.xi.end(), sim1500().xi.begin(), sim1500().xi.end());
  twice.day.insert(twice.day.end(), sim1500().day.begin(), sim1500().day.end());
  const double a = loglik(simulation_truth(), twice);
  const double b = loglik(simulation_truth(), twice);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_NE(a, 2 * loglik(simulation_truth(), sim1500()));
}

TEST(Loglik, IndependentCopulaSplitsIntoMargins) {
  DqfTheta th = simulation_truth();
  for (int k = 0; k < 6; ++k) th[idx::kR + k] = 0;
  th[idx::kNu] = 40;
  const XiSeries& xi = sim1500();
  const FilterInit init = filter_init(xi);
  std::array<MarginTerms, 4> terms;
  double margins = 0;
  for (int i = 0; i < 3; ++i) {
    ASSERT_TRUE(margin_terms(th.margin(i), xi.column(i), init.mu0[i], init.sigma2_0[i], terms[i]));
  }
  ASSERT_TRUE(h_terms(th.h(), xi.column(3), init.mu4_0, terms[3]));
  for (const auto& t : terms) margins += std::accumulate(t.logpdf.begin(), t.logpdf.end(), 0.0);
  dist::TCopula cop(th.copula());
  double copula = 0;
  for (std::size_t t = 0; t < xi.size(); ++t) {
    std::array<double, 4> u{terms[0].pit[t], terms[1].pit[t], terms[2].pit[t], terms[3].pit[t]};
    copula += cop.logdensity(u);
  }
  const double ll = loglik(th, xi, init);
  EXPECT_NEAR(ll - margins, copula, 1e-8 * std::abs(ll));
  EXPECT_LT(std::abs(copula) / double(xi.size()), 0.05);
}

TEST(Posterior, CacheMatchesFullRecompute) {
  const XiSeries& xi = sim1500();
  const FilterInit init = filter_init(xi);
  DqfPosterior post(xi, simulation_truth(), init);
  const auto blocks = dqf_blocks();
  Rng rng(17);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> pick(0, 9);
  int finite = 0;
  for (int k = 0; k < 100; ++k) {
    const BlockSpec& b = blocks[pick(rng)];
    Eigen::VectorXd v(b.dim());
    for (int j = 0; j < b.dim(); ++j) {
      const double x = post.state()(b.members[j]);
      v(j) = x + 0.01 * std::max(std::abs(x), 1e-3) * z(rng);
    }
    const double staged = post.stage(b, v);
    Eigen::VectorXd full_x = post.state();
    for (int j = 0; j < b.dim(); ++j) full_x(b.members[j]) = v(j);
    const double full = logposterior_kernel(DqfPosterior::to_theta(full_x), xi, init);
    if (std::isfinite(full)) {
      ++finite;
      ASSERT_NEAR(staged, full, 1e-10) << "block " << b.index;
    } else {
      ASSERT_EQ(staged, -INFINITY);
    }
    if (k % 2 == 0 && std::isfinite(staged)) {
      post.commit();
      ASSERT_NEAR(post.log_kernel(), full, 1e-10);
    } else {
      const double before = post.log_kernel();
      post.discard();
      ASSERT_EQ(post.log_kernel(), before);
    }
  }
  EXPECT_GT(finite, 80);
}

TEST(Posterior, DiscardLeavesStateIdentical) {
  DqfPosterior post(sim1500(), simulation_truth());
  const Eigen::VectorXd x0 = post.state();
  const double k0 = post.log_kernel();
  BlockSpec b = dqf_blocks()[3];
  Eigen::VectorXd v(b.dim());
  for (int j = 0; j < b.dim(); ++j) v(j) = x0(b.members[j]) * 1.01;
  post.stage(b, v);
  post.discard();
  EXPECT_EQ(post.state(), x0);
  EXPECT_EQ(post.log_kernel(), k0);
}

TEST(Simulate, Deterministic) {
  XiSeries a = simulate(simulation_truth(), 200, 5);
  XiSeries b = simulate(simulation_truth(), 200, 5);
  XiSeries c = simulate(simulation_truth(), 200, 6);
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_NE(a.xi, c.xi);
}

TEST(Simulate, UnconditionalVariance) {
  const DqfTheta th = simulation_truth();
  XiSeries xi = simulate(th, 100000, 9);
  const MarginParams m = th.margin(1);
  const double gamma = m.psi + m.phi;
  const double var_eps = m.omega / (1 - m.alpha - m.beta);
  const double var = (1 - 2 * gamma * m.phi + m.phi * m.phi) / (1 - gamma * gamma) * var_eps;
  auto col = xi.column(1);
  double mean = std::accumulate(col.begin(), col.end(), 0.0) / double(col.size());
  double s = 0;
  for (double x : col) s += (x - mean) * (x - mean);
  EXPECT_NEAR(s / double(col.size() - 1), var, 0.1 * var);
}

TEST(Simulate, IndependentCopulaInnovations) {
  DqfTheta th = simulation_truth();
  for (int k = 0; k < 6; ++k) th[idx::kR + k] = 0;
  th[idx::kNu] = 40;
  const std::size_t T = 20000;
  XiSeries xi = simulate(th, T, 10);
  FilterPath p = filter(th, xi);
  std::array<std::vector<double>, 3> z;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t t = 0; t < T; ++t) z[i].push_back((xi.xi[t][i] - p.mu[i][t]) / std::sqrt(p.sigma2[i][t]));
    z[i] = ranks(z[i]);
  }
  const double se = 1 / std::sqrt(double(T));
  EXPECT_NEAR(correlation(z[0], z[1]), 0, 3 * se);
  EXPECT_NEAR(correlation(z[0], z[2]), 0, 3 * se);
  EXPECT_NEAR(correlation(z[1], z[2]), 0, 3 * se);
}

TEST(Simulate, PitUniformAtTruth) {
  const DqfTheta th = simulation_truth();
  const std::size_t T = 3000;
  const double crit = 1.628 / std::sqrt(double(T));
  for (int r = 0; r < 10; ++r) {
    XiSeries xi = simulate(th, T, 1000 + r);
    FilterInit init = filter_init(xi);
    MarginTerms m;
    for (int i = 0; i < 3; ++i) {
      ASSERT_TRUE(margin_terms(th.margin(i), xi.column(i), init.mu0[i], init.sigma2_0[i], m));
      EXPECT_LT(ks_uniform(m.pit), crit) << "replicate " << r << " margin " << i + 1;
    }
    ASSERT_TRUE(h_terms(th.h(), xi.column(3), init.mu4_0, m));
    EXPECT_LT(ks_uniform(m.pit), crit) << "replicate " << r << " margin 4";
  }
}

TEST(Forecast, MedianIsLocationAndNoCrossing) {
  std::vector<double> u;
  for (int k = 1; k <= 99; ++k) u.push_back(k / 100.0);
  QfForecast f = forecast_qf(simulation_truth(), sim1500(), u);
  ASSERT_EQ(f.params.size(), sim1500().size() + 1);
  FilterPath p = filter(simulation_truth(), sim1500());
  for (std::size_t t = 0; t < f.params.size(); ++t) {
    EXPECT_NEAR(f.quantiles[t][49], f.params[t].a, 1e-14);
    if (t < p.mu[0].size()) EXPECT_EQ(f.params[t].a, p.mu[0][t]);
    for (std::size_t k = 1; k < u.size(); ++k) ASSERT_LT(f.quantiles[t][k - 1], f.quantiles[t][k]);
  }
  EXPECT_EQ(f.clamped_h, 0u);
}

TEST(Forecast, LowerTailNegative) {
  std::vector<double> u{0.01};
  QfForecast f = forecast_qf(simulation_truth(), sim1500(), u);
  double s = 0;
  for (const auto& q : f.quantiles) s += q[0];
  EXPECT_LT(s / double(f.quantiles.size()), 0.0);
}

TEST(Forecast, HMeanIsApatosaurusMean) {
  const DqfTheta th = simulation_truth();
  OneStepState s = next_state(th, sim1500(), filter_init(sim1500()));
  GHParams p = conditional_mean_params(th, s);
  const HParams h = th.h();
  EXPECT_NEAR(p.h, dist::apat_mean({{s.mu4, h.sigma, h.eta, h.lambda}, h.iota, s.w}), 1e-14);
  EXPECT_EQ(p.b_star, s.mu[1]);
}

TEST(Forecast, HClamped) {
  const DqfTheta th = simulation_truth();
  OneStepState s;
  s.mu4 = 3.0;
  s.w = 1.0;
  bool clamped = false;
  GHParams p = conditional_mean_params(th, s, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(p.h, kHForecastMax);
}

TEST(InitialTheta, Admissible) {
  EXPECT_TRUE(in_region(initial_theta(sim1500())));
  EXPECT_TRUE(std::isfinite(logposterior_kernel(initial_theta(sim1500()), sim1500())));
}
