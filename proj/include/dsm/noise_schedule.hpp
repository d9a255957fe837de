#pragma once

#include <cmath>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/error.hpp"
#include "dsm/report.hpp"

namespace dsm {

/// Denoising level Y = mu X + sigma xi. `time` is set (and `time_derived` true)
/// only when the pair lies on the Ornstein-Uhlenbeck curve mu = e^{-t}.
struct NoiseLevel {
  double mu = 1.0;
  double sigma = 1.0;
  bool time_derived = false;
  double time = std::numeric_limits<double>::quiet_NaN();

  static NoiseLevel from_time(double t) {
    require(t > 0.0 && std::isfinite(t), ErrorCode::NonPositiveTime, "diffusion time must be > 0");
    return {std::exp(-t), std::sqrt(-std::expm1(-2.0 * t)), true, t};
  }

  /// A free (mu, sigma) pair; not required to satisfy mu^2 + sigma^2 = 1.
  static NoiseLevel from_pair(double mu, double sigma) {
    require(mu > 0.0 && std::isfinite(mu), ErrorCode::InvalidArgument, "mu must be > 0");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::InvalidArgument, "sigma must be > 0");
    return {mu, sigma, false, std::numeric_limits<double>::quiet_NaN()};
  }

  /// Diffusion time whose mu matches this level (t = -ln mu).
  double implied_time() const { return -std::log(mu); }
};

/// Equally spaced diffusion times on [t_min, t_max].
struct TimeGrid {
  double t_min = 0.01;
  double t_max = 1.0;
  std::vector<double> times;

  static TimeGrid uniform(double t_min, double t_max, std::size_t steps) {
    require(t_min > 0.0 && t_min < t_max, ErrorCode::InvalidArgument, "time grid needs 0 < t_min < t_max");
    require(steps >= 2, ErrorCode::InvalidArgument, "time grid needs at least 2 points");
    TimeGrid g{t_min, t_max, std::vector<double>(steps)};
    for (std::size_t k = 0; k < steps; ++k)
      g.times[k] = t_min + (t_max - t_min) * static_cast<double>(k) / static_cast<double>(steps - 1);
    return g;
  }

  std::size_t steps() const { return times.size(); }
};

/// Small-noise premises shared by the spacing theorems.
struct SmallNoiseReport {
  Premise exponential;   // 16 n^3 exp(-mu^2 Delta^2 / 4 sigma^2) <= 1
  Premise spacing_2;     // Delta >= 2 sigma / mu
  Premise spacing_8;     // Delta >= 8 sigma / mu
  bool all() const { return exponential.holds && spacing_2.holds && spacing_8.holds; }
};

inline SmallNoiseReport small_noise_condition(const Dataset& ds, const NoiseLevel& nl) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "small-noise condition needs n >= 2");
  const double n = static_cast<double>(ds.n());
  const double d = ds.delta();
  const double r = nl.mu * d / nl.sigma;
  SmallNoiseReport rep;
  rep.exponential = check_le("16 n^3 exp(-mu^2 Delta^2 / (4 sigma^2)) <= 1", 16.0 * n * n * n * std::exp(-0.25 * r * r), 1.0);
  rep.spacing_2 = check_ge("Delta >= 2 sigma / mu", d, 2.0 * nl.sigma / nl.mu);
  rep.spacing_8 = check_ge("Delta >= 8 sigma / mu", d, 8.0 * nl.sigma / nl.mu);
  return rep;
}

}  // namespace dsm
