#include "dqf/distributions.hpp"
#include "dqf/errors.hpp"
#include "dqf/quantile_core.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace dqf;

namespace {

std::vector<double> gh_draws(const GHParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> y(n);
  for (auto& v : y) v = gh_transform(p, z(rng));
  return y;
}

}  // namespace

TEST(GhQuantile, MedianIsLocation) {
  EXPECT_DOUBLE_EQ(gh_quantile({2.0, 0.0, 0.5, 0.1}, 0.5), 2.0);
}

TEST(GhQuantile, NormalCase) {
  EXPECT_NEAR(gh_quantile({0, 0, 0, 0}, 0.975), 1.959963984540054, 1e-9);
}

TEST(GhQuantile, ContinuousAtZeroG) {
  double a = gh_quantile({0, 0, 1e-12, 0}, 0.8);
  double b = gh_quantile({0, 0, 0, 0}, 0.8);
  EXPECT_NEAR(a, b, 1e-6);
  // just above the switch the g != 0 branch must also agree
  EXPECT_NEAR(gh_quantile({0, 0, 2e-8, 0.3}, 0.8), gh_quantile({0, 0, 0, 0.3}, 0.8), 1e-6);
}

TEST(GhQuantile, RejectsBadInput) {
  EXPECT_THROW(gh_quantile({}, 0.0), DomainError);
  EXPECT_THROW(gh_quantile({}, 1.0), DomainError);
  EXPECT_THROW(gh_quantile({0, 0, 0, -0.1}, 0.5), DomainError);
}

TEST(GhQuantile, Monotone) {
  Rng rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    GHParams p{4 * U(rng) - 2, 4 * U(rng) - 2, 4 * U(rng) - 2, U(rng)};
    double u1 = 0.001 + 0.998 * U(rng), u2 = 0.001 + 0.998 * U(rng);
    if (u1 == u2) continue;
    if (u1 > u2) std::swap(u1, u2);
    ASSERT_LT(gh_quantile(p, u1), gh_quantile(p, u2)) << p.g << " " << p.h << " " << u1 << " " << u2;
  }
}

TEST(GhQuantile, LocationScaleEquivariance) {
  Rng rng(12);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    GHParams p{4 * U(rng) - 2, 2 * U(rng) - 1, 2 * U(rng) - 1, 0.8 * U(rng)};
    double u = 0.01 + 0.98 * U(rng);
    double lhs = gh_quantile(p, u);
    double rhs = p.a + std::exp(p.b_star) * gh_quantile({0, 0, p.g, p.h}, u);
    ASSERT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(lhs)));
  }
}

TEST(GhQuantile, SkewSignSymmetry) {
  Rng rng(13);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    double g = 2 * U(rng) - 1, h = 0.8 * U(rng), u = 0.01 + 0.98 * U(rng);
    double lhs = gh_quantile({0, 0, g, h}, u);
    double rhs = -gh_quantile({0, 0, -g, h}, 1 - u);
    ASSERT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(lhs)));
  }
}

TEST(GhLMoments, NormalConstants) {
  LMoments m = gh_lmoments({0, 0, 0, 0});
  EXPECT_NEAR(m.l1, 0.0, 1e-12);
  EXPECT_NEAR(m.l2, 1.0 / std::sqrt(std::numbers::pi), 1e-9);
  EXPECT_NEAR(m.tau3, 0.0, 1e-10);
  // 30/pi atan(sqrt 2) - 9
  EXPECT_NEAR(m.tau4, 0.12260171954089216, 1e-8);
}

TEST(GhLMoments, LocationScale) {
  LMoments m = gh_lmoments({1.5, -0.7, 0, 0});
  EXPECT_NEAR(m.l1, 1.5, 1e-10);
  EXPECT_NEAR(m.l2, std::exp(-0.7) / std::sqrt(std::numbers::pi), 1e-10);
}

TEST(GhLMoments, PositiveSkewMatchesSimulation) {
  GHParams p{0, 0, 0.5, 0.1};
  LMoments m = gh_lmoments(p);
  EXPECT_GT(m.tau3, 0.0);
  LMoments s = sample_lmoments(gh_draws(p, 1'000'000, 3));
  EXPECT_GT(s.tau3, 0.0);
  EXPECT_NEAR(s.tau3, m.tau3, 0.005);
  EXPECT_NEAR(s.tau4, m.tau4, 0.005);
}

TEST(GhLMoments, InfiniteMean) {
  EXPECT_THROW(gh_lmoments({0, 0, 0, 1.0}), DomainError);
}

TEST(SampleLMoments, HandExample) {
  std::vector<double> y{3, 1, 4, 2};
  LMoments m = sample_lmoments(y);
  EXPECT_NEAR(m.l1, 2.5, 1e-12);
  EXPECT_NEAR(m.l2, 0.8333333333333334, 1e-12);
  EXPECT_NEAR(m.l3, 0.0, 1e-12);
  EXPECT_NEAR(m.l4, 0.0, 1e-12);
}

TEST(SampleLMoments, Degenerate) {
  std::vector<double> y(5, 2.0);
  EXPECT_THROW(sample_lmoments(y), DegenerateSampleError);
  std::vector<double> tiny{1, 2, 3};
  EXPECT_THROW(sample_lmoments(tiny), DomainError);
}

TEST(SampleLMoments, NormalScale) {
  LMoments m = sample_lmoments(gh_draws({0, 0, 0, 0}, 1'000'000, 4));
  EXPECT_NEAR(m.l2, 0.5641896, 0.002);
}

TEST(SampleLMoments, UnbiasedAtSmallN) {
  GHParams p{0, 0, 0.2, 0.2};
  LMoments pop = gh_lmoments(p);
  Rng rng(5);
  std::normal_distribution<double> z;
  const int reps = 100000;
  double s2 = 0, ss2 = 0, s3 = 0, ss3 = 0;
  std::vector<double> y(20);
  for (int r = 0; r < reps; ++r) {
    for (auto& v : y) v = gh_transform(p, z(rng));
    LMoments m = sample_lmoments(y);
    s2 += m.l2;
    ss2 += m.l2 * m.l2;
    s3 += m.l3;
    ss3 += m.l3 * m.l3;
  }
  double m2 = s2 / reps, se2 = std::sqrt((ss2 / reps - m2 * m2) / reps);
  double m3 = s3 / reps, se3 = std::sqrt((ss3 / reps - m3 * m3) / reps);
  EXPECT_NEAR(m2, pop.l2, 3 * se2);
  EXPECT_NEAR(m3, pop.l3, 3 * se3);
}

TEST(FitGh, RecoversSkewAndTail) {
  GHFit f = fit_gh(gh_draws({0, 0, 0.2, 0.2}, 100000, 6));
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.params.g, 0.2, 0.05);
  EXPECT_NEAR(f.params.h, 0.2, 0.05);
  EXPECT_NEAR(f.params.a, 0.0, 0.05);
  EXPECT_NEAR(f.params.b_star, 0.0, 0.05);
}

TEST(FitGh, NormalData) {
  GHFit f = fit_gh(gh_draws({0, 0, 0, 0}, 100000, 7));
  EXPECT_NEAR(f.params.g, 0.0, 0.03);
  EXPECT_NEAR(f.params.h, 0.0, 0.03);
  EXPECT_GE(f.params.h, 0.0);
  EXPECT_LT(f.params.h, 1.0);
}

TEST(FitGh, SymmetricInput) {
  auto y = gh_draws({0, 0, 0.4, 0.1}, 2000, 8);
  std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) y.push_back(-y[i]);
  GHFit f = fit_gh(y);
  EXPECT_NEAR(f.params.g, 0.0, 1e-5);
}

TEST(FitGh, PopulationValuesAreFixedPoint) {
  for (GHParams p : {GHParams{0.1, -0.5, 0.2, 0.2}, GHParams{0, 0, -0.4, 0.05}, GHParams{0, 1, 0.6, 0.3}}) {
    GHFit f = fit_gh_from_lmoments(gh_lmoments(p));
    EXPECT_NEAR(f.params.g, p.g, 1e-6);
    EXPECT_NEAR(f.params.h, p.h, 1e-6);
    EXPECT_NEAR(f.params.b_star, p.b_star, 1e-6);
    EXPECT_NEAR(f.params.a, p.a, 1e-6);
  }
}

TEST(ConstructSymbols, IdenticalDays) {
  auto d = gh_draws({0, 0, 0.1, 0.1}, 300, 9);
  auto out = construct_symbols({d, d, d});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].params, out[1].params);
  EXPECT_EQ(out[1].params, out[2].params);
}

TEST(ConstructSymbols, Empty) {
  EXPECT_TRUE(construct_symbols({}).empty());
}

TEST(ConstructSymbols, TracksScaleDrift) {
  std::vector<std::vector<double>> days;
  for (int k = 0; k < 8; ++k) days.push_back(gh_draws({0, -1.0 + 0.25 * k, 0.1, 0.1}, 2000, 100 + k));
  auto out = construct_symbols(days, 2);
  for (std::size_t k = 1; k < out.size(); ++k) EXPECT_GT(out[k].params.b_star, out[k - 1].params.b_star);
}

TEST(ConstructSymbols, ThreadCountDoesNotMatter) {
  std::vector<std::vector<double>> days;
  for (int k = 0; k < 6; ++k) days.push_back(gh_draws({0, 0, 0.1 * k, 0.05}, 400, 200 + k));
  auto one = construct_symbols(days, 1);
  auto three = construct_symbols(days, 3);
  for (std::size_t k = 0; k < days.size(); ++k) EXPECT_EQ(one[k].params, three[k].params);
}

TEST(ConstructSymbols, ShortDayCarriesIndex) {
  std::vector<std::vector<double>> days{gh_draws({}, 100, 1), gh_draws({}, 30, 2)};
  try {
    construct_symbols(days);
    FAIL();
  } catch (const SymbolError& e) {
    EXPECT_EQ(e.day(), 1u);
  }
}
