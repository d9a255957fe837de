#include <gtest/gtest.h>

#include <cstdio>

#include "dsm/diffusion.hpp"

using namespace dsm;

namespace {

Eigen::VectorXd sample_mean(const Samples& s) { return s.colwise().mean().transpose(); }

Eigen::MatrixXd sample_cov(const Samples& s) {
  const Samples c = s.rowwise() - sample_mean(s).transpose();
  return c.transpose() * c / static_cast<double>(s.rows());
}

TrainConfig small_cfg(std::size_t epochs, double eta = 0.05) {
  TrainConfig cfg;
  cfg.eta = eta;
  cfg.epochs = epochs;
  cfg.batch_size = 300;
  cfg.seed = 4;
  cfg.log_every = epochs ? epochs : 1;
  cfg.scale_by_width = false;
  return cfg;
}

}  // namespace

TEST(OuProcess, MeanAndStdMatchNoiseLevel) {
  for (double t : {0.01, 0.2, 1.0, 3.0}) {
    const auto nl = NoiseLevel::from_time(t);
    EXPECT_DOUBLE_EQ(ou_mu(t), nl.mu);
    EXPECT_NEAR(ou_sigma(t), nl.sigma, 1e-15);
    EXPECT_NEAR(ou_mu(t) * ou_mu(t) + ou_sigma(t) * ou_sigma(t), 1.0, 1e-15);
  }
}

TEST(ReverseGrid, EvaluationTimesOfTheSampler) {
  SamplerConfig sc;
  const auto g = reverse_time_grid(sc);
  ASSERT_EQ(g.times.size(), 100u);
  EXPECT_DOUBLE_EQ(g.times.back(), 1.0);
  EXPECT_NEAR(g.times.front(), 0.01 + 0.99 / 100.0, 1e-15);
  for (std::size_t k = 1; k < g.times.size(); ++k) EXPECT_NEAR(g.times[k] - g.times[k - 1], 0.0099, 1e-14);
}

TEST(SamplerConfigTest, RejectsBadSettings) {
  SamplerConfig sc;
  sc.delta = 1.5;
  EXPECT_THROW(sc.validate(), Error);
  sc = {};
  sc.steps = 1;
  EXPECT_THROW(sc.validate(), Error);
}

TEST(AnalyticEmpiricalTest, OneDimensionMatchesSstar) {
  const auto ds = gaussian_dataset(7, 1.0, 3);
  Samples train(7, 1);
  for (std::size_t i = 0; i < 7; ++i) train(static_cast<Eigen::Index>(i), 0) = ds[i];
  const AnalyticEmpirical s(train);
  Samples y(50, 1);
  for (Eigen::Index r = 0; r < 50; ++r) y(r, 0) = -3.0 + 0.12 * static_cast<double>(r);
  for (double t : {0.05, 0.3, 1.0}) {
    const auto nl = NoiseLevel::from_time(t);
    const Samples out = s.score(t, y);
    for (Eigen::Index r = 0; r < 50; ++r) {
      const double ref = s_star(ds, nl, y(r, 0));
      EXPECT_NEAR(out(r, 0), ref, 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(AnalyticEmpiricalTest, SinglePointEqualsDegenerateGaussianScore) {
  Samples one(1, 2);
  one << 1.5, -0.5;
  const AnalyticEmpirical a(one);
  const GaussianScore g(one.row(0).transpose(), Eigen::MatrixXd::Zero(2, 2));
  Samples x(3, 2);
  x << 0, 0, 1, 1, -2, 3;
  EXPECT_LT((a.score(0.4, x) - g.score(0.4, x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GaussianScoreTest, StandardNormalIsStationary) {
  const auto g = GaussianScore::standard_normal(2);
  Samples x(2, 2);
  x << 0.3, -1.0, 2.0, 0.5;
  for (double t : {0.01, 0.5, 1.0}) EXPECT_LT((g.score(t, x) + x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sampler, StandardNormalScoreKeepsStandardNormal) {
  SamplerConfig sc;
  sc.n_samples = 20000;
  sc.seed = 1;
  const auto X = sample_backward(GaussianScore::standard_normal(2), sc);
  EXPECT_LT(sample_mean(X).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((sample_cov(X) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Sampler, GaussianScoreRecoversTheDiffusedLaw) {
  // With the exact score of N(m, C) the sampler ends near N(mu(delta) m, mu^2 C + sigma^2 I).
  // T = 5 makes the N(0, I) start match the forward law at T up to e^-5.
  Eigen::Vector2d m(1.0, -2.0);
  Eigen::Matrix2d C;
  C << 2.0, 0.6, 0.6, 0.5;
  SamplerConfig sc;
  sc.n_samples = 20000;
  sc.seed = 2;
  sc.T = 5.0;
  sc.steps = 1000;
  const auto X = sample_backward(GaussianScore(m, C), sc);
  const double mu = ou_mu(sc.delta), s = ou_sigma(sc.delta);
  const Eigen::MatrixXd target = mu * mu * C + s * s * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_LT((sample_mean(X) - mu * m).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((sample_cov(X) - target).cwiseAbs().maxCoeff(), 0.08);
}

TEST(Sampler, AnalyticScoreMemorizes) {
  const Samples train = sample_gaussian(10, 2, 2.0, 1);
  SamplerConfig sc;
  sc.seed = 3;
  const auto X = sample_backward(AnalyticEmpirical(train), sc);
  EXPECT_LT(nearest_train_distance(X, train).mean, 0.15 * mean_pairwise_distance(train));
}

TEST(Sampler, DeterministicGivenSeed) {
  SamplerConfig sc;
  sc.n_samples = 200;
  sc.seed = 11;
  const Samples train = sample_gaussian(5, 2, 1.0, 2);
  const auto a = sample_backward(AnalyticEmpirical(train), sc);
  const auto b = sample_backward(AnalyticEmpirical(train), sc);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  sc.seed = 12;
  EXPECT_GT((a - sample_backward(AnalyticEmpirical(train), sc)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TimeNetTest, ForwardByHand) {
  Eigen::MatrixXd W1(2, 2);
  W1 << 1.0, 2.0, -1.0, 0.0;
  Eigen::VectorXd b(2);
  b << 0.5, 1.0;
  Eigen::MatrixXd W2(1, 2);
  W2 << 3.0, -4.0;
  const TimeNet net(W1, b, W2);
  Samples x(1, 1);
  x << 0.25;
  // hidden: relu(0.25 + 2 t + 0.5), relu(-0.25 + 1); output (3 h1 - 4 h2) / 2
  const double t = 0.1;
  const double h1 = 0.25 + 0.2 + 0.5, h2 = 0.75;
  EXPECT_NEAR(net.r(t, x)(0, 0), (3.0 * h1 - 4.0 * h2) / 2.0, 1e-15);
  EXPECT_NEAR(net.score(t, x)(0, 0), -(3.0 * h1 - 4.0 * h2) / 2.0 / ou_sigma(t), 1e-14);
}

TEST(TimeNetTest, SaveLoadRoundTrip) {
  const auto net = TimeNet::init(7, 2, 5);
  const std::string path = ::testing::TempDir() + "timenet_roundtrip.csv";
  net.save(path);
  const auto back = TimeNet::load(path);
  EXPECT_EQ(back.W1(), net.W1());
  EXPECT_EQ(back.W2(), net.W2());
  EXPECT_EQ(back.b(), net.b());
  std::remove(path.c_str());
}

TEST(TrainTimeConditioned, ZeroEpochsReturnsInit) {
  const auto init = TimeNet::init(8, 2, 1);
  const auto r = train_time_conditioned(init, sample_gaussian(4, 2, 1.0, 1), reverse_time_grid({}), small_cfg(0));
  EXPECT_EQ(r.net.W1(), init.W1());
  EXPECT_EQ(r.steps_done, 0u);
}

TEST(TrainTimeConditioned, LossDecreases) {
  const Samples data = sample_gaussian(6, 2, 2.0, 2);
  const auto r = train_time_conditioned(TimeNet::init(64, 2, 2), data, reverse_time_grid({}), small_cfg(400, 0.5));
  ASSERT_EQ(r.status, TrainStatus::Converged);
  ASSERT_GE(r.log.size(), 2u);
  EXPECT_LT(r.log.back().loss, 0.8 * r.log.front().loss);
}

TEST(TrainTimeConditioned, DeterministicGivenSeed) {
  const Samples data = sample_gaussian(6, 2, 2.0, 3);
  const auto a = train_time_conditioned(TimeNet::init(16, 2, 3), data, reverse_time_grid({}), small_cfg(20));
  const auto b = train_time_conditioned(TimeNet::init(16, 2, 3), data, reverse_time_grid({}), small_cfg(20));
  EXPECT_EQ(a.net.W1(), b.net.W1());
  EXPECT_EQ(a.net.W2(), b.net.W2());
}

TEST(TrainTimeConditioned, OneStepIsLinearInTheStepSize) {
  const Samples data = sample_gaussian(6, 2, 2.0, 4);
  const auto init = TimeNet::init(16, 2, 4);
  const auto a = train_time_conditioned(init, data, reverse_time_grid({}), small_cfg(1, 1e-3));
  const auto b = train_time_conditioned(init, data, reverse_time_grid({}), small_cfg(1, 2e-3));
  const Eigen::MatrixXd da = a.net.W2() - init.W2(), db = b.net.W2() - init.W2();
  EXPECT_GT(da.norm(), 0.0);
  EXPECT_LT((db - 2.0 * da).norm(), 1e-10 * db.norm());
}

TEST(TrainTimeConditioned, WidthScalingMultipliesTheStepByM) {
  const Samples data = sample_gaussian(6, 2, 2.0, 5);
  const auto init = TimeNet::init(16, 2, 5);
  auto cfg = small_cfg(1, 1e-4);
  const auto plain = train_time_conditioned(init, data, reverse_time_grid({}), cfg);
  cfg.scale_by_width = true;
  const auto scaled = train_time_conditioned(init, data, reverse_time_grid({}), cfg);
  const Eigen::MatrixXd dp = plain.net.W2() - init.W2(), ds = scaled.net.W2() - init.W2();
  EXPECT_LT((ds - 16.0 * dp).norm(), 1e-10 * ds.norm());
}

TEST(TrainTimeConditioned, HugeStepDivergesAndIsReported) {
  const Samples data = sample_gaussian(6, 2, 2.0, 6);
  auto cfg = small_cfg(200, 1e4);
  cfg.log_every = 1;
  const auto r = train_time_conditioned(TimeNet::init(16, 2, 6), data, reverse_time_grid({}), cfg);
  EXPECT_EQ(r.status, TrainStatus::Diverged);
  EXPECT_LT(r.steps_done, 200u);
}

TEST(TrainTimeConditioned, RejectsDimensionMismatch) {
  EXPECT_THROW(train_time_conditioned(TimeNet::init(4, 3, 1), sample_gaussian(4, 2, 1.0, 1), reverse_time_grid({}), small_cfg(1)),
               Error);
}

TEST(TrainTimeConditioned, FusedAndMatrixKernelsAgree) {
  const Samples data = sample_gaussian(6, 3, 2.0, 7);
  const auto init = TimeNet::init(40, 3, 7);
  const auto cfg = small_cfg(5, 0.05);
  const auto a = train_time_conditioned(init, data, reverse_time_grid({}), cfg, DiffusionKernel::Fused);
  const auto b = train_time_conditioned(init, data, reverse_time_grid({}), cfg, DiffusionKernel::Gemm);
  // Single-precision accumulation in different orders.
  EXPECT_LT((a.net.W1() - b.net.W1()).norm(), 1e-5 * (a.net.W1() - init.W1()).norm() + 1e-6);
  EXPECT_LT((a.net.W2() - b.net.W2()).norm(), 1e-5 * (a.net.W2() - init.W2()).norm() + 1e-6);
  EXPECT_NEAR(a.log.back().loss, b.log.back().loss, 1e-5 * a.log.back().loss);
}

TEST(TrainTimeConditioned, CoordinateMeanDividesTheStepByDimension) {
  const Samples data = sample_gaussian(6, 2, 2.0, 8);
  const auto init = TimeNet::init(16, 2, 8);
  auto cfg = small_cfg(1, 1e-4);
  cfg.coordinate_mean = false;
  const auto summed = train_time_conditioned(init, data, reverse_time_grid({}), cfg);
  cfg.coordinate_mean = true;
  const auto averaged = train_time_conditioned(init, data, reverse_time_grid({}), cfg);
  const Eigen::MatrixXd ds = summed.net.W2() - init.W2(), da = averaged.net.W2() - init.W2();
  EXPECT_LT((ds - 2.0 * da).norm(), 1e-10 * ds.norm());
  // The logged loss is the squared norm either way.
  EXPECT_EQ(summed.log.front().loss, averaged.log.front().loss);
}
