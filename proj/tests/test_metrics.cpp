#include <gtest/gtest.h>

#include <cmath>

#include "dsm/metrics.hpp"
#include "dsm/rng.hpp"

using namespace dsm;

namespace {

Samples column(std::initializer_list<double> v) {
  Samples s(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index r = 0;
  for (double x : v) s(r++, 0) = x;
  return s;
}

Samples normal_1d(std::size_t count, double mean, std::uint64_t seed) {
  Rng rng(seed);
  Samples s(static_cast<Eigen::Index>(count), 1);
  for (Eigen::Index r = 0; r < s.rows(); ++r) s(r, 0) = mean + rng.normal();
  return s;
}

}  // namespace

TEST(Mmd, TwoPointSamplesByHand) {
  const auto r = mmd_gaussian(column({0.0, 1.0}), column({0.0, 3.0}));
  const double within = std::exp(-0.5) + std::exp(-4.5);
  const double cross = (1.0 + std::exp(-4.5) + std::exp(-0.5) + std::exp(-2.0)) / 4.0;
  EXPECT_NEAR(r.mmd2, within - 2.0 * cross, 1e-15);
  EXPECT_TRUE(r.floored);
  EXPECT_EQ(r.mmd, 0.0);
}

TEST(Mmd, BandwidthEntersAsTwoHSquared) {
  const auto r = mmd_gaussian(column({0.0, 2.0}), column({10.0, 12.0}), 2.0);
  EXPECT_NEAR(r.mmd2, 2.0 * std::exp(-0.5) - 2.0 * (std::exp(-12.5) + std::exp(-18.0) + std::exp(-8.0) + std::exp(-12.5)) / 4.0, 1e-15);
}

TEST(Mmd, SymmetricInItsArguments) {
  const auto X = normal_1d(50, 0.0, 1), Y = normal_1d(70, 0.5, 2);
  EXPECT_NEAR(mmd_gaussian(X, Y).mmd2, mmd_gaussian(Y, X).mmd2, 1e-14);
}

TEST(Mmd, MatchesPopulationValueForShiftedGaussians) {
  // N(0,1) against N(2,1) with unit bandwidth: MMD^2 = (2/sqrt(3)) (1 - exp(-4/6)).
  const double expected = 2.0 / std::sqrt(3.0) * (1.0 - std::exp(-4.0 / 6.0));
  const auto r = mmd_gaussian(normal_1d(2000, 0.0, 3), normal_1d(2000, 2.0, 4));
  EXPECT_NEAR(r.mmd2, expected, 0.03);
}

TEST(Mmd, SameDistributionIsNearZero) {
  const auto r = mmd_gaussian(normal_1d(2000, 0.0, 5), normal_1d(2000, 0.0, 6));
  EXPECT_NEAR(r.mmd2, 0.0, 0.005);
}

TEST(Mmd, RejectsTooFewPointsAndDimensionMismatch) {
  EXPECT_THROW(mmd_gaussian(column({1.0}), column({1.0, 2.0})), Error);
  EXPECT_THROW(mmd_gaussian(column({1.0, 2.0}), Samples::Zero(2, 2)), Error);
  EXPECT_THROW(mmd_gaussian(column({1.0, 2.0}), column({1.0, 2.0}), 0.0), Error);
}

TEST(NearestTrain, DistancesByHand) {
  const auto s = nearest_train_distance(column({0.1, 2.5, -4.0}), column({0.0, 2.0, 3.0}), 4);
  ASSERT_EQ(s.distances.size(), 3u);
  EXPECT_DOUBLE_EQ(s.distances[0], 0.1);
  EXPECT_DOUBLE_EQ(s.distances[1], 0.5);
  EXPECT_DOUBLE_EQ(s.distances[2], 4.0);
  EXPECT_DOUBLE_EQ(s.median, 0.5);
  EXPECT_NEAR(s.mean, 4.6 / 3.0, 1e-15);
  std::size_t total = 0;
  for (auto c : s.histogram_counts) total += c;
  EXPECT_EQ(total, 3u);
  EXPECT_EQ(s.histogram_counts.back(), 1u);
}

TEST(NearestTrain, SamplesOnTrainingPointsAreAtZero) {
  const Samples train = column({-1.0, 0.0, 5.0});
  EXPECT_EQ(nearest_train_distance(train, train).mean, 0.0);
}

TEST(NearestTrain, DatasetOverloadMatchesSamples) {
  const auto ds = Dataset::from_points({0.0, 2.0, 3.0});
  const auto a = nearest_train_distance(column({0.1, 2.6}), ds);
  EXPECT_DOUBLE_EQ(a.distances[1], 0.4);
}

TEST(PairwiseDistance, EquilateralTriangle) {
  Samples t(3, 2);
  t << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
  EXPECT_NEAR(mean_pairwise_distance(t), 1.0, 1e-15);
}

TEST(GaussianFitTest, MomentsByHand) {
  Samples x(4, 2);
  x << 1, 0, -1, 0, 0, 2, 0, -2;
  const auto f = gaussian_fit(x);
  EXPECT_NEAR(f.mean.norm(), 0.0, 1e-15);
  EXPECT_NEAR(f.cov(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(f.cov(1, 1), 2.0, 1e-15);
  EXPECT_NEAR(f.cov(0, 1), 0.0, 1e-15);
  EXPECT_FALSE(f.degenerate);
  const Eigen::Vector2d y(1.0, 1.0);
  EXPECT_NEAR(f.score(y)[0], -2.0, 1e-12);
  EXPECT_NEAR(f.score(y)[1], -0.5, 1e-12);
}

TEST(GaussianFitTest, SinglePointIsDegenerate) {
  Samples x(1, 2);
  x << 3.0, -1.0;
  EXPECT_TRUE(gaussian_fit(x).degenerate);
}

TEST(GaussianFitTest, SamplesReproduceTheFit) {
  Samples x(3, 2);
  x << 0, 0, 2, 1, -1, 3;
  const auto f = gaussian_fit(x);
  const auto s = f.sample(200000, 9);
  const Eigen::VectorXd m = s.colwise().mean().transpose();
  const Samples c = s.rowwise() - m.transpose();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(s.rows());
  EXPECT_LT((m - f.mean).norm(), 0.02);
  EXPECT_LT((cov - f.cov).norm(), 0.03 * f.cov.norm());
}

TEST(Mmd, FarApartGaussiansMatchClosedFormWithinBootstrapError) {
  // Unit bandwidth: E k for a difference ~ N(m, 2) is exp(-m^2 / 6) / sqrt(3).
  const Samples X = normal_1d(500, 0.0, 31), Y = normal_1d(500, 10.0, 32);
  const double expected = 2.0 / std::sqrt(3.0) * (1.0 - std::exp(-100.0 / 6.0));
  const double est = mmd_gaussian(X, Y).mmd2;
  Rng rng(33);
  double s = 0.0, s2 = 0.0;
  const int reps = 200;
  for (int b = 0; b < reps; ++b) {
    Samples Xb(500, 1), Yb(500, 1);
    for (Eigen::Index r = 0; r < 500; ++r) Xb(r, 0) = X(rng.index(500), 0), Yb(r, 0) = Y(rng.index(500), 0);
    const double v = mmd_gaussian(Xb, Yb).mmd2;
    s += v, s2 += v * v;
  }
  const double se = std::sqrt((s2 - s * s / reps) / (reps - 1));
  EXPECT_GT(se, 0.0);
  EXPECT_NEAR(est, expected, 3.0 * se);
}

TEST(Mmd, HugeBandwidthGivesZero) {
  const Samples X = normal_1d(100, 0.0, 41), Y = normal_1d(100, 3.0, 42);
  const double small = mmd_gaussian(X, Y, 1.0).mmd2;
  const double large = mmd_gaussian(X, Y, 1e4).mmd2;
  EXPECT_GT(small, 0.5);
  EXPECT_LT(std::abs(large), 1e-6);
}

TEST(GaussianFitTest, TwoSymmetricPointsUseTheOneOverNVariance) {
  const double a = 1.7;
  const auto f = gaussian_fit(column({-a, a}));
  EXPECT_DOUBLE_EQ(f.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(f.cov(0, 0), a * a);
}
