#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/gaussian.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/rng.hpp"

namespace dsm {

/// Softmax weights alpha_i(y) of the atoms x_i under N(mu x_i, sigma^2).
struct SoftmaxWeights {
  double y = 0.0;
  std::vector<double> alphas;
};

/// Mean, variance and third central moment of W(y), the atom drawn with
/// probabilities alpha_i(y).
struct WMoments {
  double mean = 0.0;
  double var = 0.0;
  double third_central = 0.0;
};

/// Weights are formed as exp(e_i - max_j e_j), so no exponent ever overflows
/// and at least one weight is exactly 1 before normalization. y equal to some
/// mu x_i needs no special handling.
inline SoftmaxWeights alphas(const Dataset& ds, const NoiseLevel& nl, double y) {
  const auto& x = ds.points();
  SoftmaxWeights out{y, std::vector<double>(x.size())};
  const double inv = 0.5 / (nl.sigma * nl.sigma);
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = y - nl.mu * x[i];
    out.alphas[i] = -d * d * inv;
    emax = std::max(emax, out.alphas[i]);
  }
  double z = 0.0;
  for (double& a : out.alphas) {
    a = std::exp(a - emax);
    z += a;
  }
  for (double& a : out.alphas) a /= z;
  return out;
}

inline WMoments w_moments(const Dataset& ds, const NoiseLevel& nl, double y) {
  const auto w = alphas(ds, nl, y);
  const auto& x = ds.points();
  WMoments m;
  for (std::size_t i = 0; i < x.size(); ++i) m.mean += w.alphas[i] * x[i];
  // Central moments in a second pass; the mean can only leave [x_1, x_n] by rounding.
  m.mean = std::clamp(m.mean, x.front(), x.back());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = x[i] - m.mean;
    m.var += w.alphas[i] * c * c;
    m.third_central += w.alphas[i] * c * c * c;
  }
  return m;
}

/// Empirical optimal score s*(y) = (mu E[W] - y) / sigma^2.
inline double s_star(const Dataset& ds, const NoiseLevel& nl, double y) {
  return (nl.mu * w_moments(ds, nl, y).mean - y) / (nl.sigma * nl.sigma);
}

/// s*'(y) = (-1 + (mu^2/sigma^2) V[W]) / sigma^2.
inline double s_star_d1(const Dataset& ds, const NoiseLevel& nl, double y) {
  const double s2 = nl.sigma * nl.sigma;
  return (-1.0 + nl.mu * nl.mu / s2 * w_moments(ds, nl, y).var) / s2;
}

/// s*''(y) = (mu^3 / sigma^6) E[(W - E W)^3].
inline double s_star_d2(const Dataset& ds, const NoiseLevel& nl, double y) {
  const double s2 = nl.sigma * nl.sigma;
  return nl.mu * nl.mu * nl.mu / (s2 * s2 * s2) * w_moments(ds, nl, y).third_central;
}

/// Score-matching residual s*(y) + (y - mu x_i) / sigma^2 for data point i, written
/// as mu sum_j alpha_j (x_j - x_i) / sigma^2. The direct sum cancels two terms of size
/// |y| / sigma^2 and bottoms out near eps / sigma^2, far above the true residual at small noise.
inline double sstar_residual(const Dataset& ds, const NoiseLevel& nl, double y, std::size_t i) {
  const auto w = alphas(ds, nl, y);
  const auto& x = ds.points();
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) acc += w.alphas[j] * (x[j] - x[i]);
  return nl.mu * acc / (nl.sigma * nl.sigma);
}

/// Closed-form upper bound on R_n(s*) valid when Delta >= 2 sigma / mu:
/// 4 mu^2 (x_n - x_1)^2 / sigma^4 * exp(-mu^2 Delta^2 / (32 sigma^2)).
inline double sstar_risk_upper_bound(const Dataset& ds, const NoiseLevel& nl) {
  if (ds.n() < 2) return 0.0;
  const double s2 = nl.sigma * nl.sigma;
  const double r = nl.mu * ds.delta() / nl.sigma;
  const double w = ds.span_width();
  return 4.0 * nl.mu * nl.mu * w * w / (s2 * s2) * std::exp(-r * r / 32.0);
}

struct SstarRisk {
  double estimate = 0.0;
  double standard_error = 0.0;
  double upper_bound = 0.0;  // closed-form bound, for comparison
};

/// Monte-Carlo estimate of R_n(s*) with `mc_samples` noise draws per data point.
inline SstarRisk risk_of_sstar(const Dataset& ds, const NoiseLevel& nl, std::size_t mc_samples, std::uint64_t seed) {
  require(mc_samples >= 100, ErrorCode::InvalidArgument, "risk_of_sstar needs at least 100 samples");
  Rng rng(seed);
  double sum = 0.0, sum2 = 0.0;
  const std::size_t n = ds.n();
  // Each draw averages the integrand over all data points, so the per-draw
  // values are i.i.d. with mean R_n(s*).
  for (std::size_t k = 0; k < mc_samples; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = nl.mu * ds[i];
      const double r = sstar_residual(ds, nl, c + nl.sigma * rng.normal(), i);
      v += r * r;
    }
    v /= static_cast<double>(n);
    sum += v;
    sum2 += v * v;
  }
  const double m = static_cast<double>(mc_samples);
  const double mean = sum / m;
  const double var = std::max(0.0, (sum2 - m * mean * mean) / (m - 1.0));
  return {mean, std::sqrt(var / m), sstar_risk_upper_bound(ds, nl)};
}

/// Deterministic R_n(s*) by Gauss-Hermite quadrature of order `order` per data point.
inline double risk_of_sstar_quadrature(const Dataset& ds, const NoiseLevel& nl, int order = 128) {
  const auto& rule = gauss_hermite(order);
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double c = nl.mu * ds[i];
    acc += rule.expect(
        [&](double y) {
          const double r = sstar_residual(ds, nl, y, i);
          return r * r;
        },
        c, nl.sigma);
  }
  return acc / static_cast<double>(ds.n());
}

/// Bound on the total variation of s*' together with its pointwise tail envelope
///   |s*''(y)| <= envelope_scale * exp(-|y| mu Delta / (2 sigma^2))
/// valid for y >= right_threshold = 2 mu (x_n)_+ and y <= left_threshold = 2 mu (x_1)_-.
struct SstarTailBound {
  double integral_bound = 0.0;  // bound on the integral of |s*''| over the real line
  double envelope_scale = 0.0;
  double envelope_rate = 0.0;
  double right_threshold = 0.0;
  double left_threshold = 0.0;
  double c_n = 0.0;  // 2 sigma^6 * integral_bound

  double envelope(double y) const { return envelope_scale * std::exp(-std::abs(y) * envelope_rate); }
};

inline SstarTailBound sstar_tail_bound(const Dataset& ds, const NoiseLevel& nl) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "tail bound needs n >= 2");
  const double mu = nl.mu, s2 = nl.sigma * nl.sigma, s6 = s2 * s2 * s2;
  const double w = ds.span_width(), w3 = w * w * w;
  const double n1 = static_cast<double>(ds.n() - 1);
  const double xn_pos = std::max(0.0, ds.back());
  const double x1_neg = std::min(0.0, ds.front());
  SstarTailBound b;
  b.integral_bound = 4.0 * mu * mu * w3 / s6 * (mu * mu * (xn_pos - x1_neg) + 2.0 * n1 * s2 / ds.delta());
  b.envelope_scale = 2.0 * mu * mu * mu * n1 * w3 / s6;
  b.envelope_rate = mu * ds.delta() / (2.0 * s2);
  b.right_threshold = 2.0 * mu * xn_pos;
  b.left_threshold = 2.0 * mu * x1_neg;
  b.c_n = 2.0 * s6 * b.integral_bound;
  return b;
}

/// Default outer-weight clip A = C_n / sigma^6, floored at 1.
inline double default_clip_bound(const Dataset& ds, const NoiseLevel& nl) {
  const double s2 = nl.sigma * nl.sigma;
  return std::max(1.0, sstar_tail_bound(ds, nl).c_n / (s2 * s2 * s2));
}

}  // namespace dsm
