#include <gtest/gtest.h>

#include "dsm/weight_pi.hpp"

using namespace dsm;

namespace {

// pi- and pi+ straight from the uniform draw U over the atoms.
double brute_minus(const Dataset& ds, double mu, double y) {
  double p = 0.0, s = 0.0;
  for (double x : ds.points())
    if (mu * x < y) {
      p += 1.0 / ds.n();
      s += mu * x / ds.n();
    }
  return p == 0.0 ? 0.0 : p * p * (y - s / p);
}

double brute_plus(const Dataset& ds, double mu, double y) {
  double p = 0.0, s = 0.0;
  for (double x : ds.points())
    if (mu * x > y) {
      p += 1.0 / ds.n();
      s += mu * x / ds.n();
    }
  return p == 0.0 ? 0.0 : p * p * (s / p - y);
}

Dataset equispaced(std::size_t n, double delta = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = delta * static_cast<double>(i);
  return Dataset::from_points(x);
}

}  // namespace

TEST(PiPieces, TwoPointSymmetry) {
  const PiEvaluator pi(Dataset::from_points({0.0, 1.0}), NoiseLevel::from_pair(1.0, 0.3));
  EXPECT_DOUBLE_EQ(pi.pi_minus(0.5), 0.125);
  EXPECT_DOUBLE_EQ(pi.pi_plus(0.5), 0.125);
}

TEST(PiPieces, EmptyEventAtFirstImage) {
  const auto ds = Dataset::from_points({-0.4, 0.2, 1.1});
  const PiEvaluator pi(ds, NoiseLevel::from_pair(0.8, 0.3));
  EXPECT_EQ(pi.pi_minus(0.8 * -0.4), 0.0);
  EXPECT_EQ(pi.pi_plus(0.8 * 1.1), 0.0);
}

TEST(PiPieces, MatchBruteForceOverAtoms) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto ds = gaussian_dataset(7, 1.0, 10 + rep);
    const double mu = 0.5 + 0.5 * rng.uniform();
    const PiEvaluator pi(ds, NoiseLevel::from_pair(mu, 0.3));
    const double y = mu * (ds.front() - 0.5 + (ds.span_width() + 1.0) * rng.uniform());
    EXPECT_NEAR(pi.pi_minus(y), brute_minus(ds, mu, y), 1e-13);
    EXPECT_NEAR(pi.pi_plus(y), brute_plus(ds, mu, y), 1e-13);
    // Strict inequalities: an atom sitting exactly at y is in neither event.
    const double at = mu * ds[3];
    EXPECT_NEAR(pi.pi_minus(at), brute_minus(ds, mu, at), 1e-13);
    EXPECT_NEAR(pi.pi_plus(at), brute_plus(ds, mu, at), 1e-13);
  }
}

TEST(Pi, ZeroOutsideHull) {
  const auto ds = gaussian_dataset(6, 1.0, 2);
  for (int order : {0, 64}) {
    const PiEvaluator pi(ds, NoiseLevel::from_pair(0.7, 0.4), order);
    EXPECT_EQ(pi.pi(0.7 * ds.front() - 1e-9), 0.0);
    EXPECT_EQ(pi.pi(0.7 * ds.back() + 1e-9), 0.0);
    EXPECT_EQ(pi.pi(100.0), 0.0);
  }
}

TEST(Pi, UpperBoundEverywhere) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = gaussian_dataset(8, 1.0, seed);
    const PiEvaluator pi(ds, NoiseLevel::from_pair(0.9, 0.2 + 0.1 * seed), 0);
    for (int k = 0; k <= 200; ++k) {
      const double y = 0.9 * (ds.front() + ds.span_width() * k / 200.0);
      EXPECT_GE(pi.pi(y), 0.0);
      EXPECT_LE(pi.pi(y), pi.pi_upper_bound());
    }
  }
}

TEST(Pi, ClosedFormMatchesMonteCarlo) {
  for (std::uint64_t seed : {4, 5, 6}) {
    const auto ds = gaussian_dataset(5, 1.0, seed);
    const auto nl = NoiseLevel::from_pair(0.8, 0.35);
    const PiEvaluator exact(ds, nl, 0);
    for (int k = 1; k < 6; ++k) {
      const double y = nl.mu * (ds.front() + ds.span_width() * k / 6.0);
      const auto mc = exact.pi_mc(y, 1'000'000, 50 + k);
      EXPECT_NEAR(exact.pi(y), mc.mean, 3.0 * mc.standard_error) << "y=" << y;
    }
  }
}

// min(pi+, pi-) has kinks at every image, so Gauss-Hermite converges only
// algebraically: order 64 is off by about 2% of max pi and order 256 is no
// better. The closed form is therefore the default.
TEST(Pi, HermiteErrorIsPercentLevel) {
  const auto ds = gaussian_dataset(5, 1.0, 4);
  const auto nl = NoiseLevel::from_pair(0.8, 0.35);
  const PiEvaluator exact(ds, nl, 0), quad(ds, nl, 64);
  double worst = 0.0, top = 0.0;
  for (int k = 1; k < 40; ++k) {
    const double y = nl.mu * (ds.front() + ds.span_width() * k / 40.0);
    worst = std::max(worst, std::abs(quad.pi(y) - exact.pi(y)));
    top = std::max(top, exact.pi(y));
  }
  EXPECT_LT(worst, 5e-2 * top);
  EXPECT_GT(worst, 1e-4 * top);
}

TEST(Pi, HermiteIsExactAwayFromKinks) {
  // With sigma tiny against the spacing the Gaussian never reaches a kink.
  const auto ds = Dataset::from_points({0.0, 1.0, 2.0, 3.0});
  const auto nl = NoiseLevel::from_pair(1.0, 0.01);
  const PiEvaluator exact(ds, nl, 0), quad(ds, nl, 64);
  for (double y : {0.3, 0.8, 1.4, 2.6}) EXPECT_NEAR(quad.pi(y), exact.pi(y), 1e-12);
}

TEST(Pi, ReflectionSymmetry) {
  const auto ds = gaussian_dataset(7, 1.0, 9);
  std::vector<double> refl;
  for (double x : ds.points()) refl.push_back(-x);
  const auto nl = NoiseLevel::from_pair(0.75, 0.3);
  const PiEvaluator a(ds, nl, 0), b(Dataset::from_points(refl), nl, 0);
  for (int k = 0; k <= 30; ++k) {
    const double y = nl.mu * (ds.front() + ds.span_width() * k / 30.0);
    EXPECT_NEAR(a.pi(y), b.pi(-y), 1e-13);
    EXPECT_NEAR(a.pi_minus(y), b.pi_plus(-y), 1e-13);
  }
}

TEST(PiLowerBound, FirstIntervalIsZero) {
  const PiEvaluator pi(equispaced(10), NoiseLevel::from_pair(1.0, 0.1));
  EXPECT_EQ(pi.pi_lower_bound(1), 0.0);
  EXPECT_THROW(pi.pi_lower_bound(0), Error);
  EXPECT_THROW(pi.pi_lower_bound(10), Error);
}

TEST(PiLowerBound, HoldsOnGridForCentralInterval) {
  const auto ds = equispaced(20);
  for (int order : {0, 64}) {
    const PiEvaluator pi(ds, NoiseLevel::from_pair(1.0, 0.05), order);
    double lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 400; ++k) lo = std::min(lo, pi.pi(ds[9] + k / 400.0));
    EXPECT_GE(lo, pi.pi_lower_bound(10));
  }
}

TEST(PiLowerBound, HoldsOnEveryIntervalOfEquispacedData) {
  const auto ds = equispaced(12);
  const PiEvaluator pi(ds, NoiseLevel::from_pair(1.0, 0.2), 0);
  for (std::size_t i = 1; i < 12; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 200; ++k) lo = std::min(lo, pi.pi(ds[i - 1] + k / 200.0));
    EXPECT_GE(lo, pi.pi_lower_bound(i)) << "i=" << i;
  }
}

TEST(PiLowerBound, MirrorSymmetricForEquispacedData) {
  // Interval i and interval n - i are mirror images; the corrected bound must agree.
  const std::size_t n = 15;
  const PiEvaluator pi(equispaced(n), NoiseLevel::from_pair(1.0, 0.1));
  for (std::size_t i = 1; i < n; ++i) EXPECT_DOUBLE_EQ(pi.pi_lower_bound(i), pi.pi_lower_bound(n - i));
}

TEST(PiLowerBound, AsStatedExceedsPiOnLastIntervals) {
  // The printed factor (n-i)^2 (n-i+1)/2 claims more than pi delivers near the right end.
  const auto ds = equispaced(10);
  const PiEvaluator pi(ds, NoiseLevel::from_pair(1.0, 0.05), 0);
  const std::size_t i = 8;
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 400; ++k) lo = std::min(lo, pi.pi(ds[i - 1] + k / 400.0));
  EXPECT_GE(lo, pi.pi_lower_bound(i));
  EXPECT_LT(lo, pi.pi_lower_bound_as_stated(i));
}
