#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/gaussian.hpp"
#include "dsm/net.hpp"
#include "dsm/noise_schedule.hpp"

namespace dsm {

/// s_theta written as A_j + B_j y on the intervals cut by the sorted distinct kinks.
/// Interval j is (t_{j-1}, t_j) with t_{-1} = -inf and t_K = +inf.
class PiecewiseLinear {
 public:
  explicit PiecewiseLinear(const TwoLayerNet& net) {
    const Eigen::Index m = net.w1().size();
    const double inv = 1.0 / static_cast<double>(m);
    for (Eigen::Index l = 0; l < m; ++l)
      if (net.w1()[l] != 0.0) knots_.push_back(-net.b()[l] / net.w1()[l]);
    std::sort(knots_.begin(), knots_.end());
    knots_.erase(std::unique(knots_.begin(), knots_.end()), knots_.end());
    const std::size_t K = knots_.size();
    unit_knot_.assign(static_cast<std::size_t>(m), 0);
    // Units with w1 > 0 switch on after their knot and units with w1 < 0 are on
    // up to it. Both sums are accumulated separately so nothing cancels.
    std::vector<double> up_a(K + 1, 0.0), up_b(K + 1, 0.0), dn_a(K + 2, 0.0), dn_b(K + 2, 0.0);
    double const_a = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) {
      const double w1 = net.w1()[l], w2 = net.w2()[l], b = net.b()[l];
      if (w1 == 0.0) {
        if (b >= 0.0) const_a += inv * w2 * b;
        continue;
      }
      const std::size_t k = knot_index(-b / w1);
      unit_knot_[static_cast<std::size_t>(l)] = k;
      if (w1 > 0.0) {
        up_a[k + 1] += inv * w2 * b;
        up_b[k + 1] += inv * w2 * w1;
      } else {
        dn_a[k] += inv * w2 * b;
        dn_b[k] += inv * w2 * w1;
      }
    }
    for (std::size_t j = 1; j <= K; ++j) {
      up_a[j] += up_a[j - 1];
      up_b[j] += up_b[j - 1];
    }
    for (std::size_t j = K; j-- > 0;) {
      dn_a[j] += dn_a[j + 1];
      dn_b[j] += dn_b[j + 1];
    }
    a_.resize(K + 1);
    b_.resize(K + 1);
    for (std::size_t j = 0; j <= K; ++j) {
      a_[j] = const_a + up_a[j] + dn_a[j];
      b_[j] = up_b[j] + dn_b[j];
    }
  }

  std::size_t intervals() const { return a_.size(); }
  const std::vector<double>& knots() const { return knots_; }
  double lo(std::size_t j) const { return j == 0 ? -std::numeric_limits<double>::infinity() : knots_[j - 1]; }
  double hi(std::size_t j) const {
    return j == knots_.size() ? std::numeric_limits<double>::infinity() : knots_[j];
  }
  double intercept(std::size_t j) const { return a_[j]; }
  double slope(std::size_t j) const { return b_[j]; }
  /// Position of unit l's kink in knots().
  std::size_t unit_knot(std::size_t l) const { return unit_knot_[l]; }

  std::size_t interval_of(double y) const {
    return static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), y) - knots_.begin());
  }

  double operator()(double y) const {
    const std::size_t j = interval_of(y);
    return a_[j] + b_[j] * y;
  }

 private:
  std::size_t knot_index(double t) const {
    return static_cast<std::size_t>(std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
  }

  std::vector<double> knots_;
  std::vector<std::size_t> unit_knot_;
  std::vector<double> a_, b_;
};

/// Closed-form risk machinery for a one-dimensional net. Every expectation over
/// Y ~ N(mu x_i, sigma^2) splits over the linear pieces of s_theta into truncated
/// normal moments, so risk, gradient and Hessian-vector products are exact up
/// to rounding.
class RiskEngine {
 public:
  RiskEngine(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl)
      : net_(net), pl_(net), n_(ds.n()), sigma_(nl.sigma), kappa_(1.0 / (nl.sigma * nl.sigma)) {
    centers_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) centers_[i] = nl.mu * ds[i];
    const std::size_t J = pl_.intervals();
    m0_.assign(J, 0.0);
    ey_.assign(J, 0.0);
    eyy_.assign(J, 0.0);
    q0_.assign(J, 0.0);
    q1_.assign(J, 0.0);
    risk_ = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double c = centers_[i];
      for (std::size_t j = 0; j < J; ++j) {
        const auto mo = interval_moments(pl_.lo(j), pl_.hi(j), c, sigma_);
        if (mo.p0 == 0.0 && mo.p1 == 0.0 && mo.p2 == 0.0) continue;
        // Residual s(Y) + (Y - c)/sigma^2 = r0 + r1 u with u = Y - c.
        const double r0 = pl_.intercept(j) + pl_.slope(j) * c;
        const double r1 = pl_.slope(j) + kappa_;
        risk_ += r0 * r0 * mo.p0 + 2.0 * r0 * r1 * mo.p1 + r1 * r1 * mo.p2;
        q0_[j] += r0 * mo.p0 + r1 * mo.p1;
        q1_[j] += r0 * c * mo.p0 + (r0 + r1 * c) * mo.p1 + r1 * mo.p2;
        m0_[j] += mo.p0;
        ey_[j] += c * mo.p0 + mo.p1;
        eyy_[j] += c * c * mo.p0 + 2.0 * c * mo.p1 + mo.p2;
      }
    }
    risk_ /= static_cast<double>(n_);
    build_cumulative(q0_, q0_pre_, q0_suf_);
    build_cumulative(q1_, q1_pre_, q1_suf_);
    build_cumulative(m0_, m0_pre_, m0_suf_);
    build_cumulative(ey_, ey_pre_, ey_suf_);
    build_cumulative(eyy_, eyy_pre_, eyy_suf_);
  }

  const TwoLayerNet& net() const { return net_; }
  const PiecewiseLinear& piecewise() const { return pl_; }
  std::size_t width() const { return net_.width(); }

  /// R_n(theta).
  double risk() const { return risk_; }

  /// Exact gradient of R_n with respect to (w2, b).
  Eigen::VectorXd gradient() const {
    const std::size_t m = width();
    const double scale = 2.0 / (static_cast<double>(n_) * static_cast<double>(m));
    Eigen::VectorXd g(2 * m);
    for (std::size_t l = 0; l < m; ++l) {
      const double w1 = w1_(l), b = b_(l);
      const double a0 = active(l, q0_pre_, q0_suf_), a1 = active(l, q1_pre_, q1_suf_);
      g[static_cast<Eigen::Index>(l)] = scale * (w1 * a1 + b * a0);
      g[static_cast<Eigen::Index>(m + l)] = scale * w2_(l) * a0;
    }
    return g;
  }

  /// Coefficients c_l = (2/(m n)) sum_i E[res 1{unit l active}] of the term that
  /// couples w2_l with b_l.
  Eigen::VectorXd cross_coefficients() const {
    const std::size_t m = width();
    const double scale = 2.0 / (static_cast<double>(n_) * static_cast<double>(m));
    Eigen::VectorXd c(m);
    for (std::size_t l = 0; l < m; ++l) c[static_cast<Eigen::Index>(l)] = scale * active(l, q0_pre_, q0_suf_);
    return c;
  }

  /// Diagonal term on b_l coming from the moving indicator:
  ///   (2/(m n)) w2_l sum_i res_i(tau_l) phi_sigma(tau_l - mu x_i).
  /// The sign does not depend on w1: the active half-line gains mass at tau
  /// as b grows in both orientations.
  Eigen::VectorXd boundary_diagonal() const {
    const std::size_t m = width();
    const double scale = 2.0 / (static_cast<double>(n_) * static_cast<double>(m));
    Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
    for (std::size_t l = 0; l < m; ++l) {
      if (w1_(l) == 0.0) continue;
      const double tau = -b_(l) / w1_(l);
      const double s = pl_(tau);
      double acc = 0.0;
      for (double c : centers_) {
        const double z = (tau - c) / sigma_;
        acc += (s + (tau - c) * kappa_) * normal_pdf(z) / sigma_;
      }
      d[static_cast<Eigen::Index>(l)] = scale * w2_(l) * acc / std::abs(w1_(l));
    }
    return d;
  }

  /// (2/n) sum_i E[grad s (grad s . v)], applied to v.
  Eigen::VectorXd ntk_apply(const Eigen::VectorXd& v) const {
    const std::size_t m = width();
    const std::size_t J = pl_.intervals();
    const double inv = 1.0 / static_cast<double>(m);
    // g(y) = grad s(y) . v is affine on every interval: G0_j + G1_j y.
    std::vector<double> up0(J + 1, 0.0), up1(J + 1, 0.0), dn0(J + 1, 0.0), dn1(J + 1, 0.0);
    double const0 = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      const double vw = v[static_cast<Eigen::Index>(l)], vb = v[static_cast<Eigen::Index>(m + l)];
      const double c0 = inv * (vw * b_(l) + vb * w2_(l)), c1 = inv * vw * w1_(l);
      if (w1_(l) == 0.0) {
        if (b_(l) >= 0.0) const0 += c0;
        continue;
      }
      const std::size_t k = pl_.unit_knot(l);
      if (w1_(l) > 0.0) {
        up0[k + 1] += c0;
        up1[k + 1] += c1;
      } else {
        dn0[k] += c0;
        dn1[k] += c1;
      }
    }
    for (std::size_t j = 1; j < J; ++j) {
      up0[j] += up0[j - 1];
      up1[j] += up1[j - 1];
    }
    for (std::size_t j = J - 1; j-- > 0;) {
      dn0[j] += dn0[j + 1];
      dn1[j] += dn1[j + 1];
    }
    std::vector<double> e0(J), e1(J);
    for (std::size_t j = 0; j < J; ++j) {
      const double g0 = const0 + up0[j] + dn0[j], g1 = up1[j] + dn1[j];
      e0[j] = g0 * m0_[j] + g1 * ey_[j];
      e1[j] = g0 * ey_[j] + g1 * eyy_[j];
    }
    std::vector<double> e0p, e0s, e1p, e1s;
    build_cumulative(e0, e0p, e0s);
    build_cumulative(e1, e1p, e1s);
    const double scale = 2.0 / (static_cast<double>(n_) * static_cast<double>(m));
    Eigen::VectorXd out(2 * m);
    for (std::size_t l = 0; l < m; ++l) {
      const double a0 = active(l, e0p, e0s), a1 = active(l, e1p, e1s);
      out[static_cast<Eigen::Index>(l)] = scale * (w1_(l) * a1 + b_(l) * a0);
      out[static_cast<Eigen::Index>(m + l)] = scale * w2_(l) * a0;
    }
    return out;
  }

  /// trace of the NTK term (2/n) sum_i E[grad s grad s^T].
  double ntk_trace() const {
    const std::size_t m = width();
    double acc = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      const double w1 = w1_(l), b = b_(l), w2 = w2_(l);
      const double p = active(l, m0_pre_, m0_suf_);
      acc += w1 * w1 * active(l, eyy_pre_, eyy_suf_) + 2.0 * w1 * b * active(l, ey_pre_, ey_suf_) + (b * b + w2 * w2) * p;
    }
    const double md = static_cast<double>(m);
    return 2.0 * acc / (static_cast<double>(n_) * md * md);
  }

 private:
  static void build_cumulative(const std::vector<double>& x, std::vector<double>& pre, std::vector<double>& suf) {
    const std::size_t J = x.size();
    pre.assign(J, 0.0);
    suf.assign(J + 1, 0.0);
    double acc = 0.0;
    for (std::size_t j = 0; j < J; ++j) pre[j] = (acc += x[j]);
    acc = 0.0;
    for (std::size_t j = J; j-- > 0;) suf[j] = (acc += x[j]);
  }

  // Sum of a per-interval quantity over the intervals where unit l is active.
  double active(std::size_t l, const std::vector<double>& pre, const std::vector<double>& suf) const {
    const double w1 = w1_(l);
    if (w1 == 0.0) return b_(l) >= 0.0 ? suf[0] : 0.0;
    const std::size_t k = pl_.unit_knot(l);
    return w1 > 0.0 ? suf[k + 1] : pre[k];
  }

  double w1_(std::size_t l) const { return net_.w1()[static_cast<Eigen::Index>(l)]; }
  double w2_(std::size_t l) const { return net_.w2()[static_cast<Eigen::Index>(l)]; }
  double b_(std::size_t l) const { return net_.b()[static_cast<Eigen::Index>(l)]; }

  TwoLayerNet net_;
  PiecewiseLinear pl_;
  std::size_t n_;
  double sigma_, kappa_;
  std::vector<double> centers_;
  double risk_ = 0.0;
  std::vector<double> m0_, ey_, eyy_, q0_, q1_;
  std::vector<double> q0_pre_, q0_suf_, q1_pre_, q1_suf_, m0_pre_, m0_suf_, ey_pre_, ey_suf_, eyy_pre_, eyy_suf_;
};

}  // namespace dsm
