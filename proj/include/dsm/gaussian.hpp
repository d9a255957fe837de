#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "dsm/error.hpp"

namespace dsm {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(za < Z < zb) for Z ~ N(0,1), evaluated through whichever tail keeps full
/// relative precision. Infinite endpoints are allowed.
inline double normal_prob(double za, double zb) {
  if (!(zb > za)) return 0.0;
  constexpr double r = 1.0 / std::numbers::sqrt2;
  if (za >= 0.0) return 0.5 * (std::erfc(za * r) - std::erfc(zb * r));
  if (zb <= 0.0) return 0.5 * (std::erfc(-zb * r) - std::erfc(-za * r));
  return 1.0 - 0.5 * std::erfc(-za * r) - 0.5 * std::erfc(zb * r);
}

/// Truncated moments of u = Y - c for Y ~ N(c, sigma^2) over the interval [a, b]:
/// p0 = E[1{a<Y<b}], p1 = E[u 1{...}], p2 = E[u^2 1{...}].
struct IntervalMoments {
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
};

inline IntervalMoments interval_moments(double a, double b, double c, double sigma) {
  IntervalMoments m;
  if (!(b > a)) return m;
  const double za = (a - c) / sigma;
  const double zb = (b - c) / sigma;
  const double pa = std::isfinite(za) ? normal_pdf(za) : 0.0;
  const double pb = std::isfinite(zb) ? normal_pdf(zb) : 0.0;
  const double zpa = std::isfinite(za) ? za * pa : 0.0;
  const double zpb = std::isfinite(zb) ? zb * pb : 0.0;
  m.p0 = normal_prob(za, zb);
  m.p1 = sigma * (pa - pb);
  m.p2 = sigma * sigma * (m.p0 + zpa - zpb);
  return m;
}

/// Gauss-Hermite rule normalized for the standard normal law:
/// E[f(Z)] ~ sum_k weights[k] * f(nodes[k]), exact for polynomials of degree < 2*order.
/// Nodes and weights come from the Golub-Welsch eigenproblem of the Jacobi matrix.
class GaussHermiteRule {
 public:
  explicit GaussHermiteRule(int order) {
    require(order >= 1, ErrorCode::InvalidArgument, "Gauss-Hermite order must be >= 1");
    const int n = order;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    // Probabilists' Hermite recurrence: off-diagonal entries sqrt(k).
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    nodes_.resize(n);
    weights_.resize(n);
    for (int k = 0; k < n; ++k) {
      nodes_[k] = solver.eigenvalues()[k];
      const double v0 = solver.eigenvectors()(0, k);
      weights_[k] = v0 * v0;
    }
    // Symmetrize: the rule is exactly symmetric about 0.
    for (int k = 0; k < n / 2; ++k) {
      const double x = 0.5 * (nodes_[n - 1 - k] - nodes_[k]);
      const double w = 0.5 * (weights_[k] + weights_[n - 1 - k]);
      nodes_[k] = -x;
      nodes_[n - 1 - k] = x;
      weights_[k] = weights_[n - 1 - k] = w;
    }
    if (n % 2 == 1) nodes_[n / 2] = 0.0;
  }

  int order() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// E[f(mean + sd * Z)], Z ~ N(0,1).
  template <class F>
  double expect(F&& f, double mean, double sd) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) acc += weights_[k] * f(mean + sd * nodes_[k]);
    return acc;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Shared, lazily built rule of the given order.
inline const GaussHermiteRule& gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(order);
  return *slot;
}

}  // namespace dsm
