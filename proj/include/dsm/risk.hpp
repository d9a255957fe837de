#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/empirical_score.hpp"
#include "dsm/gaussian.hpp"
#include "dsm/net.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/piecewise.hpp"
#include "dsm/rng.hpp"

namespace dsm {

enum class RiskMethod { Exact, Quadrature, MonteCarlo };

inline const char* to_string(RiskMethod m) {
  switch (m) {
    case RiskMethod::Exact: return "exact";
    case RiskMethod::Quadrature: return "quadrature";
    case RiskMethod::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

struct RiskValue {
  double value = 0.0;
  RiskMethod method = RiskMethod::Exact;
  double standard_error = 0.0;  // Monte Carlo only
};

/// R_n(theta) integrated piece by piece in closed form.
inline RiskValue risk_exact(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl) {
  return {RiskEngine(net, ds, nl).risk(), RiskMethod::Exact, 0.0};
}

/// R_n(theta) by Gauss-Hermite quadrature of the given order; order 0 means exact.
inline RiskValue risk_quadrature(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl, int order = 128) {
  if (order == 0) return risk_exact(net, ds, nl);
  const PiecewiseLinear s(net);
  const auto& rule = gauss_hermite(order);
  const double kappa = 1.0 / (nl.sigma * nl.sigma);
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double c = nl.mu * ds[i];
    acc += rule.expect(
        [&](double y) {
          const double r = s(y) + (y - c) * kappa;
          return r * r;
        },
        c, nl.sigma);
  }
  return {acc / static_cast<double>(ds.n()), RiskMethod::Quadrature, 0.0};
}

/// One minibatch draw: indices uniform with replacement, fresh noise per element.
struct StochasticRisk {
  double sum = 0.0;    // sum over the batch of squared residuals
  double mean = 0.0;   // sum / |B|, unbiased for R_n
  Eigen::VectorXd grad_sum;  // gradient of `sum` with respect to (w2, b)
};

inline StochasticRisk risk_stochastic(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl,
                                      std::size_t batch, std::uint64_t seed) {
  require(batch >= 1, ErrorCode::InvalidArgument, "batch must be non-empty");
  Rng rng(seed);
  const auto m = static_cast<Eigen::Index>(net.width());
  const double inv_m = 1.0 / static_cast<double>(m);
  const double kappa = 1.0 / (nl.sigma * nl.sigma);
  StochasticRisk out;
  out.grad_sum = Eigen::VectorXd::Zero(2 * m);
  const auto w1 = net.w1().array(), w2 = net.w2().array(), b = net.b().array();
  Eigen::ArrayXd z(m), act(m);
  for (std::size_t k = 0; k < batch; ++k) {
    const double c = nl.mu * ds[rng.index(ds.n())];
    const double y = c + nl.sigma * rng.normal();
    z = w1 * y + b;
    act = z.max(0.0);
    const double r = (w2 * act).sum() * inv_m + (y - c) * kappa;
    out.sum += r * r;
    out.grad_sum.head(m).array() += 2.0 * r * inv_m * act;
    out.grad_sum.tail(m).array() += (z >= 0.0).select(2.0 * r * inv_m * w2, 0.0);
  }
  out.mean = out.sum / static_cast<double>(batch);
  return out;
}

// ---------------------------------------------------------------------------
// Training

enum class TrainMode { Sgd, GdPopulation };
enum class Reduction { Mean, Sum };

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "sgd") return TrainMode::Sgd;
  if (s == "gd-population") return TrainMode::GdPopulation;
  throw Error(ErrorCode::ConfigError, "unknown training mode '" + s + "'");
}

inline Reduction reduction_from_string(const std::string& s) {
  if (s == "mean") return Reduction::Mean;
  if (s == "sum") return Reduction::Sum;
  throw Error(ErrorCode::ConfigError, "unknown batch reduction '" + s + "'");
}

/// Update theta <- theta - m eta grad L, with L the batch loss (plain eta grad L
/// when scale_by_width is off). With Reduction::Mean L averages the batch (the scale under which lambda_max <= 2/(m eta) is the
/// stability threshold); Reduction::Sum uses the plain batch sum.
struct TrainConfig {
  double eta = 0.1;
  std::size_t epochs = 1000;  // one epoch is one update
  std::size_t batch_size = 50;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::Sgd;
  Reduction reduction = Reduction::Mean;
  std::size_t log_every = 0;  // 0 logs only the initial and final states
  double divergence_factor = 1e6;
  bool scale_by_width = true;  // step m eta grad L; false gives plain eta grad L
  bool coordinate_mean = true;  // time-conditioned nets: average the squared error over output coordinates
};

struct TrainLogRow {
  std::size_t step = 0;
  double eta = 0.0;
  double risk = 0.0;
  double excess_risk = 0.0;  // risk - R_n(s*), with R_n(s*) by quadrature
  double max_abs_w2 = 0.0;
  double wallclock = 0.0;    // seconds since the start of training
};

enum class TrainStatus { Converged, Diverged };

inline const char* to_string(TrainStatus s) { return s == TrainStatus::Converged ? "ok" : "diverged"; }

struct TrainResult {
  TwoLayerNet net;
  std::vector<TrainLogRow> log;
  TrainStatus status = TrainStatus::Converged;
  std::size_t steps_done = 0;
};

/// Runs SGD (fresh noise every step) or full-population GD on the exact risk,
/// clipping w2 onto [-A, A] after every update. Divergence (risk above
/// divergence_factor times the initial risk, or a non-finite parameter) stops
/// the run and is reported through the status.
inline TrainResult train(const TwoLayerNet& init, const Dataset& ds, const NoiseLevel& nl, const TrainConfig& cfg) {
  require(cfg.eta >= 0.0, ErrorCode::InvalidArgument, "eta must be >= 0");
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
  init.require_theory("train");
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  TrainResult res{init, {}, TrainStatus::Converged, 0};
  TwoLayerNet& net = res.net;
  const double sstar_risk = risk_of_sstar_quadrature(ds, nl);
  const double risk0 = risk_exact(net, ds, nl).value;
  auto log_row = [&](std::size_t step) {
    const double r = risk_exact(net, ds, nl).value;
    res.log.push_back({step, cfg.eta, r, r - sstar_risk, net.max_abs_w2(), seconds()});
    return r;
  };
  log_row(0);

  const auto m = static_cast<Eigen::Index>(net.width());
  const double md = static_cast<double>(m);
  const double kappa = 1.0 / (nl.sigma * nl.sigma);
  const double batch_scale = cfg.reduction == Reduction::Mean ? 1.0 / static_cast<double>(cfg.batch_size) : 1.0;
  Rng rng(cfg.seed, 1);
  const Eigen::ArrayXd w1 = net.w1().array();
  Eigen::ArrayXd z(m), act(m), gw(m), gb(m);
  std::vector<double> centers(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) centers[i] = nl.mu * ds[i];

  for (std::size_t step = 1; step <= cfg.epochs; ++step) {
    if (cfg.mode == TrainMode::Sgd) {
      gw.setZero();
      gb.setZero();
      auto w2 = net.w2().array();
      auto b = net.b().array();
      for (std::size_t k = 0; k < cfg.batch_size; ++k) {
        const double c = centers[rng.index(ds.n())];
        const double y = c + nl.sigma * rng.normal();
        z = w1 * y + b;
        act = z.max(0.0);
        const double r = (w2 * act).sum() / md + (y - c) * kappa;
        gw += r * act;
        gb += (z >= 0.0).select(r * w2, 0.0);
      }
      // m eta times the gradient 2 r grad s, where grad s carries a 1/m.
      const double step_size = 2.0 * cfg.eta * batch_scale * (cfg.scale_by_width ? 1.0 : 1.0 / md);
      net.w2().array() -= step_size * gw;
      net.b().array() -= step_size * gb;
    } else {
      const Eigen::VectorXd g = RiskEngine(net, ds, nl).gradient();
      const double lr = cfg.scale_by_width ? md * cfg.eta : cfg.eta;
      net.w2() -= lr * g.head(m);
      net.b() -= lr * g.tail(m);
    }
    net.project();
    res.steps_done = step;

    const bool finite = net.w2().allFinite() && net.b().allFinite();
    const bool at_log = cfg.log_every > 0 && step % cfg.log_every == 0;
    if (!finite) {
      res.status = TrainStatus::Diverged;
      res.log.push_back({step, cfg.eta, std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(), net.max_abs_w2(), seconds()});
      return res;
    }
    if (at_log || step == cfg.epochs) {
      const double r = log_row(step);
      if (!(r <= cfg.divergence_factor * risk0)) {
        res.status = TrainStatus::Diverged;
        return res;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Excess risk

struct ExcessRisk {
  double direct = 0.0;           // MC mean of (s_theta - s*)^2
  double direct_se = 0.0;
  double via_difference = 0.0;   // R_n(theta) exact minus MC R_n(s*)
  double difference_se = 0.0;
};

/// R_n(theta) - R_n(s*) = (1/n) sum_i E[(s_theta(Y) - s*(Y))^2], estimated directly
/// with `mc_samples` draws per data point, and cross-checked as a difference of risks.
inline ExcessRisk excess_risk(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl,
                              std::size_t mc_samples, std::uint64_t seed) {
  require(mc_samples >= 2, ErrorCode::InvalidArgument, "excess_risk needs at least 2 samples");
  const PiecewiseLinear s(net);
  Rng rng(seed);
  const std::size_t n = ds.n();
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < mc_samples; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = nl.mu * ds[i] + nl.sigma * rng.normal();
      const double d = s(y) - s_star(ds, nl, y);
      v += d * d;
    }
    v /= static_cast<double>(n);
    sum += v;
    sum2 += v * v;
  }
  const double md = static_cast<double>(mc_samples);
  ExcessRisk out;
  out.direct = sum / md;
  out.direct_se = std::sqrt(std::max(0.0, (sum2 - md * out.direct * out.direct) / (md - 1.0)) / md);
  const auto sstar = risk_of_sstar(ds, nl, std::max<std::size_t>(mc_samples, 100), seed ^ 0x5bd1e995ULL);
  out.via_difference = risk_exact(net, ds, nl).value - sstar.estimate;
  out.difference_se = sstar.standard_error;
  return out;
}

}  // namespace dsm
