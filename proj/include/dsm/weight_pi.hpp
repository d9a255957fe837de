#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/gaussian.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/rng.hpp"

namespace dsm {

struct MonteCarloValue {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Weight function pi(y) = E_xi min(pi+(y - xi), pi-(y - xi)), xi ~ N(0, sigma^2),
/// set to zero outside [mu x_1, mu x_n].
///
/// order > 0 selects Gauss-Hermite quadrature of that order. order == 0 selects
/// the closed form: min(pi+, pi-) is piecewise linear, so its Gaussian average
/// is a finite sum of truncated normal moments.
class PiEvaluator {
 public:
  PiEvaluator(const Dataset& ds, const NoiseLevel& nl, int order = 0) : ds_(ds), nl_(nl), order_(order) {
    require(order >= 0, ErrorCode::InvalidArgument, "quadrature order must be >= 0");
    const std::size_t n = ds.n();
    img_.resize(n);
    prefix_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      img_[i] = nl.mu * ds[i];
      prefix_[i + 1] = prefix_[i] + img_[i];
    }
  }

  const Dataset& dataset() const { return ds_; }
  const NoiseLevel& noise() const { return nl_; }
  int order() const { return order_; }

  /// (k/n)^2 (y - mean of the k images strictly below y); 0 when k = 0.
  double pi_minus(double y) const {
    const std::size_t k = static_cast<std::size_t>(std::lower_bound(img_.begin(), img_.end(), y) - img_.begin());
    return minus_piece(k, y);
  }

  /// (k/n)^2 (mean of the k images strictly above y - y); 0 when k = 0.
  double pi_plus(double y) const {
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(img_.begin(), img_.end(), y) - img_.begin());
    return plus_piece(j, y);
  }

  double pi(double y) const {
    if (y < img_.front() || y > img_.back()) return 0.0;
    if (order_ == 0) return pi_exact(y);
    return gauss_hermite(order_).expect([&](double u) { return std::min(pi_plus(u), pi_minus(u)); }, y, nl_.sigma);
  }

  /// Monte-Carlo estimate of the same expectation, used only for validation.
  MonteCarloValue pi_mc(double y, std::size_t draws, std::uint64_t seed) const {
    if (y < img_.front() || y > img_.back()) return {};
    Rng rng(seed);
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
      const double u = y - nl_.sigma * rng.normal();
      const double v = std::min(pi_plus(u), pi_minus(u));
      s += v;
      s2 += v * v;
    }
    const double m = static_cast<double>(draws);
    const double mean = s / m;
    return {mean, std::sqrt(std::max(0.0, (s2 / m - mean * mean) / (m - 1.0)))};
  }

  /// Lower bound on pi over [mu x_i, mu x_{i+1}] (1-based i):
  /// (mu/n^2)(1/2 - exp(-mu^2 Delta^2 / 2 sigma^2)) min(i^2 (i-1)/2, (n-i)^2 (n-i-1)/2) Delta.
  double pi_lower_bound(std::size_t i) const { return lower_bound_impl(i, false); }

  /// Same bound with the right-hand factor (n-i)^2 (n-i+1)/2 as printed in the
  /// original statement; it overstates pi on the last intervals.
  double pi_lower_bound_as_stated(std::size_t i) const { return lower_bound_impl(i, true); }

  double pi_upper_bound() const { return nl_.mu * ds_.span_width(); }

 private:
  double minus_piece(std::size_t k, double y) const {
    if (k == 0) return 0.0;
    const double n = static_cast<double>(img_.size());
    const double kd = static_cast<double>(k);
    return kd * (kd * y - prefix_[k]) / (n * n);
  }

  double plus_piece(std::size_t j, double y) const {
    const std::size_t k = img_.size() - j;
    if (k == 0) return 0.0;
    const double n = static_cast<double>(img_.size());
    const double kd = static_cast<double>(k);
    return kd * ((prefix_.back() - prefix_[j]) - kd * y) / (n * n);
  }

  // On the open segment (img_[k-1], img_[k]) exactly k images lie below and n-k
  // above, so both pieces are affine there. Outside the hull the min is 0.
  double pi_exact(double y) const {
    const std::size_t n = img_.size();
    const double s = nl_.sigma;
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const double lo = img_[k - 1], hi = img_[k];
      const double kd = static_cast<double>(k), jd = static_cast<double>(n - k);
      const double nn = static_cast<double>(n * n);
      // pi-(u) = (kd^2 u - kd S) / n^2,  pi+(u) = (jd T - jd^2 u) / n^2.
      const double S = prefix_[k], T = prefix_.back() - prefix_[k];
      const double cross = (kd * S + jd * T) / (kd * kd + jd * jd);
      const double c = std::clamp(cross, lo, hi);
      auto piece = [&](double a, double b, double slope, double val_at_y) {
        if (!(b > a)) return;
        const auto m = interval_moments(a, b, y, s);
        acc += m.p0 * val_at_y + slope * m.p1;
      };
      // Left of the crossing pi- is the smaller piece, right of it pi+.
      piece(lo, c, kd * kd / nn, (kd * kd * y - kd * S) / nn);
      piece(c, hi, -jd * jd / nn, (jd * T - jd * jd * y) / nn);
    }
    return acc;
  }

  double lower_bound_impl(std::size_t i, bool as_stated) const {
    const std::size_t n = ds_.n();
    if (i < 1 || i + 1 > n)
      throw Error(ErrorCode::IndexOutOfRange, "interval index must lie in [1, n-1]");
    const double nd = static_cast<double>(n), id = static_cast<double>(i), r = nd - id;
    const double left = id * id * (id - 1.0) / 2.0;
    const double right = as_stated ? r * r * (r + 1.0) / 2.0 : r * r * (r - 1.0) / 2.0;
    const double z = nl_.mu * ds_.delta() / nl_.sigma;
    return nl_.mu / (nd * nd) * (0.5 - std::exp(-0.5 * z * z)) * std::min(left, right) * ds_.delta();
  }

  Dataset ds_;
  NoiseLevel nl_;
  int order_;
  std::vector<double> img_;
  std::vector<double> prefix_;
};

}  // namespace dsm
