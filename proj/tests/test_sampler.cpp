#include "dqf/errors.hpp"
#include "dqf/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

using namespace dqf;

namespace {

// standard error of a chain mean by batch means
double batch_se(const Eigen::VectorXd& x, int batches = 50) {
  const Eigen::Index m = x.size() / batches;
  Eigen::VectorXd b(batches);
  for (int k = 0; k < batches; ++k) b(k) = x.segment(k * m, m).mean();
  const double mean = b.mean();
  return std::sqrt((b.array() - mean).square().sum() / (batches - 1) / batches);
}

SamplerConfig small_config() {
  SamplerConfig c;
  c.n_epo = 3000;
  c.n_disc = 500;
  c.j_min = 2;
  c.j_max = 6;
  c.n_sample = 101000;
  c.n_sample_disc = 1000;
  return c;
}

}  // namespace

TEST(Blocks, Targets) {
  EXPECT_EQ(target_acceptance(1), 0.44);
  EXPECT_EQ(target_acceptance(3), 0.35);
  EXPECT_EQ(target_acceptance(4), 0.35);
  EXPECT_EQ(target_acceptance(5), 0.234);
}

TEST(Blocks, PartitionOfForty) {
  auto blocks = dqf_blocks();
  ASSERT_EQ(blocks.size(), 10u);
  const int sizes[10] = {3, 5, 3, 5, 3, 5, 5, 4, 6, 1};
  std::set<int> seen;
  for (int b = 0; b < 10; ++b) {
    EXPECT_EQ(blocks[b].index, b + 1);
    EXPECT_EQ(blocks[b].dim(), sizes[b]);
    for (int m : blocks[b].members) EXPECT_TRUE(seen.insert(m).second);
  }
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), 39);
}

TEST(Proposal, ZeroScaleIsIdentity) {
  Rng rng(1);
  Eigen::VectorXd x(3);
  x << 1, -2, 3;
  EXPECT_EQ(propose_block(x, 0.0, Eigen::MatrixXd::Identity(3, 3), rng), x);
}

TEST(Proposal, ComponentFrequencies) {
  Rng rng(2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2, 2);
  const int n = 100000;
  int count[3] = {0, 0, 0};
  for (int k = 0; k < n; ++k) {
    int c = -1;
    propose_block(x, 1.0, L, rng, {}, &c);
    ++count[c];
  }
  const double w[3] = {0.7, 0.15, 0.15};
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(double(count[j]) / n, w[j], 3 * std::sqrt(w[j] * (1 - w[j]) / n));
}

TEST(Proposal, MixtureCovariance) {
  Rng rng(3);
  Eigen::Matrix3d S;
  S << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 0.5;
  Eigen::MatrixXd L = Eigen::LLT<Eigen::Matrix3d>(S).matrixL();
  const double delta = 0.7;
  const int n = 1'000'000;
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd p = propose_block(x, delta, L, rng);
    acc += p * p.transpose();
  }
  acc /= n;
  const Eigen::Matrix3d expect = delta * delta * (0.7 + 0.15 * 100 + 0.15 * 0.01) * S;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(acc(i, i), expect(i, i), 0.05 * expect(i, i));
  EXPECT_NEAR(acc(0, 1), expect(0, 1), 0.05 * std::sqrt(expect(0, 0) * expect(1, 1)));
}

TEST(TuneScale, Examples) {
  EXPECT_NEAR(tune_scale(1.3, 0.35, 0.35), 1.3, 1e-15);
  EXPECT_NEAR(tune_scale(1.0, 0.468, 0.234), 1.6398750544262097, 1e-9);
  EXPECT_LT(tune_scale(1.0, 0.1, 0.234), 1.0);
  EXPECT_GT(tune_scale(1.0, 0.5, 0.234), 1.0);
}

TEST(TuneScale, ClampsExtremes) {
  EXPECT_TRUE(std::isfinite(tune_scale(1.0, 0.0, 0.44, 200)));
  EXPECT_GT(tune_scale(1.0, 0.0, 0.44, 200), 0.0);
  EXPECT_EQ(tune_scale(1.0, 0.0, 0.44, 200), tune_scale(1.0, 1.0 / 200, 0.44, 200));
  EXPECT_EQ(tune_scale(1.0, 1.0, 0.44, 200), tune_scale(1.0, 1.0 - 1.0 / 200, 0.44, 200));
}

TEST(Sweep, SameProposalAccepted) {
  FunctionTarget t([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); }, Eigen::VectorXd::Ones(2));
  auto blocks = single_block(2);
  std::vector<BlockTuning> tu(1);
  tu[0].set_cov(Eigen::MatrixXd::Identity(2, 2));
  tu[0].delta = 0.0;
  Rng rng(4);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(sweep(t, blocks, tu, rng), 1);
}

TEST(Sweep, RejectionKeepsState) {
  // any move off the start is infinitely worse
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(3, 0.25);
  FunctionTarget t([&](const Eigen::VectorXd& x) { return x == x0 ? 0.0 : -INFINITY; }, x0);
  auto blocks = single_block(3);
  std::vector<BlockTuning> tu(1);
  tu[0].set_cov(Eigen::MatrixXd::Identity(3, 3));
  Rng rng(5);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(sweep(t, blocks, tu, rng), 0);
  EXPECT_EQ(t.state(), x0);
  EXPECT_EQ(t.log_kernel(), 0.0);
  EXPECT_EQ(tu[0].total_attempted, 100);
}

TEST(Sweep, AcceptanceFallsAsScaleGrows) {
  double prev = 1.0;
  for (double delta : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    FunctionTarget t([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); }, Eigen::VectorXd::Zero(1));
    auto blocks = single_block(1);
    std::vector<BlockTuning> tu(1);
    tu[0].set_cov(Eigen::MatrixXd::Identity(1, 1));
    tu[0].delta = delta;
    Rng rng(6);
    MixtureProposal plain{{1.0}, {1.0}};
    for (int k = 0; k < 20000; ++k) sweep(t, blocks, tu, rng, plain);
    const double r = double(tu[0].total_accepted) / tu[0].total_attempted;
    EXPECT_LT(r, prev) << delta;
    prev = r;
  }
}

TEST(Mapc, IdenticalEpochs) {
  Eigen::VectorXd sd(3);
  sd << 0.1, 2.0, 5.0;
  EXPECT_EQ(mapc(sd, sd), 0.0);
  Eigen::VectorXd sd2 = sd * 1.1;
  EXPECT_NEAR(mapc(sd, sd2), 0.1, 1e-12);
}

TEST(RegularizedCovariance, SingularDraws) {
  Eigen::MatrixXd d(100, 2);
  for (int i = 0; i < 100; ++i) d(i, 0) = d(i, 1) = std::sin(double(i));
  Eigen::MatrixXd c;
  ASSERT_TRUE(regularized_covariance(d, c));
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(c).info(), Eigen::Success);
  EXPECT_GT(c(0, 0), c(0, 1));
}

TEST(RunAdaptive, OneDimensionalNormal) {
  FunctionTarget t([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); }, Eigen::VectorXd::Constant(1, 3.0));
  PosteriorSample s = run_adaptive(t, single_block(1), Eigen::VectorXd::Ones(1), small_config(), 7);
  ASSERT_EQ(s.draws.rows(), 100000);
  const Eigen::VectorXd x = s.draws.col(0);
  EXPECT_NEAR(x.mean(), 0.0, 0.02);
  EXPECT_NEAR((x.array() - x.mean()).square().mean(), 1.0, 0.05);
  EXPECT_NEAR(s.acceptance[0], 0.44, 0.05);
}

TEST(RunAdaptive, FourDimensionalNormal) {
  Eigen::Matrix4d S;
  S << 1.0, 0.6, 0.2, 0.0, 0.6, 2.0, -0.4, 0.3, 0.2, -0.4, 0.5, 0.1, 0.0, 0.3, 0.1, 3.0;
  const Eigen::Matrix4d P = S.inverse();
  Eigen::Vector4d mu(1, -1, 0.5, 2);
  FunctionTarget t([&](const Eigen::VectorXd& x) { return -0.5 * (x - mu).dot(P * (x - mu)); },
                   Eigen::VectorXd::Zero(4));
  std::vector<BlockSpec> blocks{{1, {0, 1}}, {2, {2, 3}}};
  PosteriorSample s = run_adaptive(t, blocks, Eigen::VectorXd::Ones(4), small_config(), 8);
  const Eigen::MatrixXd& d = s.draws;
  const Eigen::RowVectorXd m = d.colwise().mean();
  const Eigen::MatrixXd c = d.rowwise() - m;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(m(i), mu(i), 3 * batch_se(d.col(i))) << i;
    for (int j = 0; j <= i; ++j) {
      const Eigen::VectorXd prod = (c.col(i).array() * c.col(j).array()).matrix();
      EXPECT_NEAR(prod.mean(), S(i, j), 3 * batch_se(prod)) << i << "," << j;
    }
  }
  for (double a : s.acceptance) EXPECT_NEAR(a, 0.35, 0.05);
}

TEST(RunAdaptive, StopsOnMapc) {
  FunctionTarget t([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); }, Eigen::VectorXd::Zero(2));
  SamplerConfig c = small_config();
  c.eps_mapc = 10.0;  // any change passes
  c.n_sample = 2000;
  PosteriorSample s = run_adaptive(t, single_block(2), Eigen::VectorXd::Ones(2), c, 9);
  EXPECT_TRUE(s.mapc_converged);
  ASSERT_EQ(s.epochs.size(), 2u);
  EXPECT_TRUE(std::isnan(s.epochs[0].mapc));
  EXPECT_LE(s.epochs[1].mapc, 10.0);
}

TEST(RunAdaptive, Reproducible) {
  auto run = [](std::uint64_t seed) {
    FunctionTarget t([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm() - std::pow(x(0), 4); },
                     Eigen::VectorXd::Zero(3));
    SamplerConfig c = small_config();
    c.n_sample = 5000;
    return run_adaptive(t, {{1, {0}}, {2, {1, 2}}}, Eigen::VectorXd::Ones(3), c, seed);
  };
  PosteriorSample a = run(10), b = run(10), c = run(11);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.acceptance, b.acceptance);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_NE(a.draws, c.draws);
}

TEST(RunAdaptive, DrawsStayInSupport) {
  // half-normal on the positive orthant
  FunctionTarget t(
      [](const Eigen::VectorXd& x) { return (x.array() > 0).all() ? -0.5 * x.squaredNorm() : -INFINITY; },
      Eigen::VectorXd::Ones(3));
  SamplerConfig c = small_config();
  c.n_sample = 20000;
  PosteriorSample s = run_adaptive(t, single_block(3), Eigen::VectorXd::Ones(3), c, 12);
  EXPECT_GT(s.draws.minCoeff(), 0.0);
}

TEST(RunAdaptive, BadConfig) {
  FunctionTarget t([](const Eigen::VectorXd& x) { return -x.squaredNorm(); }, Eigen::VectorXd::Zero(1));
  SamplerConfig c;
  c.n_disc = c.n_epo;
  EXPECT_THROW(run_adaptive(t, single_block(1), Eigen::VectorXd::Ones(1), c, 1), DomainError);
}

TEST(Summarize, ConstantChain) {
  ParamSummary s = summarize_column(std::vector<double>(1000, 0.7));
  EXPECT_NEAR(s.mean, 0.7, 1e-14);
  EXPECT_EQ(s.lower, 0.7);
  EXPECT_EQ(s.upper, 0.7);
}

TEST(Summarize, RankConvention) {
  // values equal their 1-based rank
  std::vector<double> x(1001);
  std::iota(x.begin(), x.end(), 1.0);
  std::reverse(x.begin(), x.end());
  ParamSummary s = summarize_column(x);
  EXPECT_EQ(s.lower, 26.0);   // ceil(25.025)
  EXPECT_EQ(s.upper, 975.0);  // floor(975.975)
  std::vector<double> y(40);
  std::iota(y.begin(), y.end(), 1.0);
  s = summarize_column(y);
  EXPECT_EQ(s.lower, 1.0);
  EXPECT_EQ(s.upper, 39.0);
}

TEST(Summarize, NormalQuantiles) {
  Rng rng(13);
  std::normal_distribution<double> z;
  std::vector<double> x(1'000'000);
  for (auto& v : x) v = z(rng);
  ParamSummary s = summarize_column(x);
  EXPECT_NEAR(s.lower, -1.959963984540054, 0.01);
  EXPECT_NEAR(s.upper, 1.959963984540054, 0.01);
  EXPECT_THROW(summarize_column({}), DomainError);
}
