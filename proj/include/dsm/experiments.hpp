#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dsm/bounds.hpp"
#include "dsm/diffusion.hpp"
#include "dsm/hessian.hpp"
#include "dsm/metrics.hpp"
#include "dsm/risk.hpp"

namespace dsm {

// Drivers shared by the command-line tool and the acceptance checks.

/// Epoch count for a learning-rate sweep: epoch_scale / eta, rounded.
inline std::size_t inverse_epochs(double epoch_scale, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "eta must be > 0");
  return static_cast<std::size_t>(std::llround(epoch_scale / eta));
}

struct SweepCell {
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  TrainStatus status = TrainStatus::Converged;
  std::size_t steps_done = 0;
  double risk = 0.0;
  double excess_risk = 0.0;  // R_n(theta) exact minus R_n(s*) by quadrature
  double lambda_max = std::numeric_limits<double>::quiet_NaN();
  double stability_bound = 0.0;  // 2 / (m eta)
  TwoLayerNet net;
};

struct SweepCellConfig {
  std::size_t m = 1000;
  double clip = 0.0;  // 0 selects default_clip_bound
  std::size_t batch = 50;
  TrainMode mode = TrainMode::Sgd;
  Reduction reduction = Reduction::Mean;
  bool measure_sharpness = true;
  PowerOptions power{};
};

/// One (eta, seed) cell: theory-mode net seeded by `seed`, trained, then excess
/// risk and (unless diverged) lambda_max of the exact-risk Hessian.
inline SweepCell run_sweep_cell(const Dataset& ds, const NoiseLevel& nl, double eta, std::size_t epochs,
                                std::uint64_t seed, const SweepCellConfig& sc) {
  const double A = sc.clip > 0.0 ? sc.clip : default_clip_bound(ds, nl);
  TrainConfig cfg;
  cfg.eta = eta;
  cfg.epochs = epochs;
  cfg.batch_size = sc.batch;
  cfg.seed = seed;
  cfg.mode = sc.mode;
  cfg.reduction = sc.reduction;
  auto res = train(TwoLayerNet::init(sc.m, A, seed), ds, nl, cfg);
  SweepCell c;
  c.eta = eta;
  c.seed = seed;
  c.epochs = epochs;
  c.status = res.status;
  c.steps_done = res.steps_done;
  c.stability_bound = 2.0 / (static_cast<double>(sc.m) * eta);
  c.risk = res.log.back().risk;
  c.excess_risk = res.log.back().excess_risk;
  if (res.status == TrainStatus::Converged && sc.measure_sharpness)
    c.lambda_max = stability_report(res.net, ds, nl, eta, sc.power).lambda_max;
  c.net = std::move(res.net);
  return c;
}

/// Median of a non-empty vector (copied).
inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::EmptyInput, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// ---------------------------------------------------------------------------
// Randomized bound batches

struct BoundBatchConfig {
  std::size_t instances = 50;
  std::uint64_t seed = 0;
  double ratio_min = 0.01;  // sigma / (mu Delta)
  double ratio_max = 2.0;
  std::size_t n_min = 10;
  std::size_t n_max = 20;
  std::size_t m = 16;
  std::size_t mc = 2000;
};

/// Equispaced datasets with a random offset and spacing, noise ratios
/// sigma/(mu Delta) log-uniform in [ratio_min, ratio_max], random theory-mode
/// nets with A = max(2/sigma^2, 1). Runs every verifier on each instance.
inline std::vector<BoundReport> run_bound_batch(const BoundBatchConfig& bc) {
  require(bc.instances >= 1 && bc.n_min >= 2 && bc.n_max >= bc.n_min, ErrorCode::InvalidArgument,
          "bound batch needs instances >= 1 and 2 <= n_min <= n_max");
  require(bc.ratio_min > 0.0 && bc.ratio_max >= bc.ratio_min, ErrorCode::InvalidArgument, "bad noise-ratio range");
  Rng rng(bc.seed, 7);
  std::vector<BoundReport> out;
  for (std::size_t k = 0; k < bc.instances; ++k) {
    const std::size_t n = bc.n_min + rng.index(bc.n_max - bc.n_min + 1);
    const double delta = 0.5 + rng.uniform();
    const double start = rng.normal();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = start + delta * static_cast<double>(i);
    const auto ds = Dataset::from_points(x);
    const double mu = 0.3 + 0.7 * rng.uniform();
    const double ratio = std::exp(std::log(bc.ratio_min) + rng.uniform() * std::log(bc.ratio_max / bc.ratio_min));
    const auto nl = NoiseLevel::from_pair(mu, ratio * mu * ds.delta());
    const double A = std::max(2.0 / (nl.sigma * nl.sigma), 1.0);
    TwoLayerNet net = TwoLayerNet::init(bc.m, A, rng.engine()());
    for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(bc.m); ++l) {
      net.b()[l] = -net.w1()[l] * (ds.front() + ds.span_width() * rng.uniform());
      net.w2()[l] = A * (2.0 * rng.uniform() - 1.0);
    }
    out.push_back(verify_prop1(ds, nl));
    out.push_back(verify_cor2(ds, nl, bc.mc, rng.engine()()));
    out.push_back(verify_thm3(ds, nl));
    out.push_back(verify_prop6(net, ds, nl));
    out.push_back(verify_prop7(net, ds, nl));
    out.push_back(verify_prop10(ds, nl));
    out.push_back(verify_prop11(net, ds, nl));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diffusion runs

struct DiffusionRun {
  DiffusionTrainResult trained;
  Samples samples;
};

/// Trains a TimeNet on `data` and draws samples with it. The reverse grid is the training grid.
inline DiffusionRun train_and_sample(const Samples& data, std::size_t m, std::uint64_t net_seed, const TrainConfig& cfg,
                                     const SamplerConfig& sc) {
  DiffusionRun run{train_time_conditioned(TimeNet::init(m, static_cast<std::size_t>(data.cols()), net_seed), data,
                                          reverse_time_grid(sc), cfg),
                   {}};
  if (run.trained.status == TrainStatus::Converged) run.samples = sample_backward(run.trained.net, sc);
  return run;
}

}  // namespace dsm
