#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/error.hpp"

namespace dsm {

struct MmdResult {
  double mmd = 0.0;       // sqrt(max(mmd2, 0))
  double mmd2 = 0.0;      // unbiased U-statistic, may be slightly negative
  bool floored = false;   // mmd2 < 0 was reported as 0
};

/// Unbiased MMD^2 with k(x, y) = exp(-|x - y|^2 / (2 h^2)).
inline MmdResult mmd_gaussian(const Samples& X, const Samples& Y, double bandwidth = 1.0) {
  require(X.rows() >= 2 && Y.rows() >= 2, ErrorCode::EmptyInput, "MMD U-statistic needs at least 2 points per sample");
  require(X.cols() == Y.cols(), ErrorCode::DimensionMismatch, "MMD samples must share the dimension");
  require(bandwidth > 0.0, ErrorCode::InvalidArgument, "bandwidth must be > 0");
  const double g = 0.5 / (bandwidth * bandwidth);
  auto k = [&](const auto& a, const auto& b) { return std::exp(-g * (a - b).squaredNorm()); };
  auto within = [&](const Samples& S) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      for (Eigen::Index j = i + 1; j < S.rows(); ++j) acc += k(S.row(i), S.row(j));
    const double r = static_cast<double>(S.rows());
    return 2.0 * acc / (r * (r - 1.0));
  };
  double cross = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.rows(); ++j) cross += k(X.row(i), Y.row(j));
  cross /= static_cast<double>(X.rows()) * static_cast<double>(Y.rows());
  MmdResult r;
  r.mmd2 = within(X) + within(Y) - 2.0 * cross;
  r.floored = r.mmd2 < 0.0;
  r.mmd = std::sqrt(std::max(r.mmd2, 0.0));
  return r;
}

struct NearestSummary {
  std::vector<double> distances;  // one per sample row
  double mean = 0.0;
  double median = 0.0;
  std::vector<double> histogram_edges;
  std::vector<std::size_t> histogram_counts;
};

/// Euclidean distance from each sample to its nearest training point (brute force).
inline NearestSummary nearest_train_distance(const Samples& samples, const Samples& train, std::size_t bins = 20) {
  require(samples.rows() >= 1 && train.rows() >= 1, ErrorCode::EmptyInput, "nearest_train_distance needs points");
  require(samples.cols() == train.cols(), ErrorCode::DimensionMismatch, "samples and training set differ in dimension");
  NearestSummary s;
  s.distances.resize(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < train.rows(); ++j) best = std::min(best, (samples.row(i) - train.row(j)).squaredNorm());
    s.distances[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  std::vector<double> sorted = s.distances;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  double sum = 0.0;
  for (double d : sorted) sum += d;
  s.mean = sum / static_cast<double>(n);
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (bins > 0) {
    const double hi = sorted.back() > 0.0 ? sorted.back() : 1.0;
    s.histogram_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) s.histogram_edges[b] = hi * static_cast<double>(b) / static_cast<double>(bins);
    s.histogram_counts.assign(bins, 0);
    for (double d : sorted) ++s.histogram_counts[std::min(bins - 1, static_cast<std::size_t>(d / hi * static_cast<double>(bins)))];
  }
  return s;
}

inline NearestSummary nearest_train_distance(const Samples& samples, const Dataset& ds, std::size_t bins = 20) {
  Samples train(static_cast<Eigen::Index>(ds.n()), 1);
  for (std::size_t i = 0; i < ds.n(); ++i) train(static_cast<Eigen::Index>(i), 0) = ds[i];
  return nearest_train_distance(samples, train, bins);
}

/// Mean Euclidean distance over all unordered pairs of training points.
inline double mean_pairwise_distance(const Samples& train) {
  require(train.rows() >= 2, ErrorCode::InvalidArgument, "mean_pairwise_distance needs 2 points");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    for (Eigen::Index j = i + 1; j < train.rows(); ++j) acc += (train.row(i) - train.row(j)).norm();
  const double r = static_cast<double>(train.rows());
  return 2.0 * acc / (r * (r - 1.0));
}

/// Maximum-likelihood Gaussian (1/n covariance).
struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool degenerate = false;  // covariance is singular (e.g. a single point)

  /// Score -cov^{-1} (x - mean); needs a non-degenerate fit.
  Eigen::VectorXd score(const Eigen::VectorXd& x) const { return -prec_ * (x - mean); }

  /// Draws from N(mean, cov) via the symmetric square root.
  Samples sample(std::size_t count, std::uint64_t seed) const {
    Rng rng(seed);
    const auto d = mean.size();
    Samples out(static_cast<Eigen::Index>(count), d);
    Eigen::VectorXd z(d);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index c = 0; c < d; ++c) z[c] = rng.normal();
      out.row(r) = (mean + root_ * z).transpose();
    }
    return out;
  }

  Eigen::MatrixXd prec_, root_;
};

inline GaussianFit gaussian_fit(const Samples& train) {
  require(train.rows() >= 1, ErrorCode::EmptyInput, "gaussian_fit needs at least one point");
  GaussianFit f;
  f.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - f.mean.transpose();
  f.cov = centered.transpose() * centered / static_cast<double>(train.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.cov);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  f.degenerate = ev.minCoeff() <= 1e-12 * std::max(1.0, ev.maxCoeff());
  f.root_ = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  if (!f.degenerate) f.prec_ = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return f;
}

}  // namespace dsm
