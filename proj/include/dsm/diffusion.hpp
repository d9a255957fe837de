#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/error.hpp"
#include "dsm/metrics.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/risk.hpp"
#include "dsm/rng.hpp"

namespace dsm {

// Forward Ornstein-Uhlenbeck process dX = -X dt + sqrt(2) dB:
// X_t = mu(t) X_0 + sigma(t) Z with mu = e^{-t}, sigma = sqrt(1 - e^{-2t}).
inline double ou_mu(double t) { return std::exp(-t); }
inline double ou_sigma(double t) { return std::sqrt(-std::expm1(-2.0 * t)); }

struct SamplerConfig {
  double T = 1.0;
  double delta = 0.01;
  std::size_t steps = 100;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    require(delta > 0.0 && delta < T, ErrorCode::InvalidArgument, "sampler needs 0 < delta < T");
    require(steps >= 2, ErrorCode::InvalidArgument, "sampler needs steps >= 2");
    require(n_samples >= 1, ErrorCode::InvalidArgument, "sampler needs n_samples >= 1");
  }
  double step() const { return (T - delta) / static_cast<double>(steps); }
};

/// Times at which the reverse sampler evaluates the score: T - k h for
/// k = 0..steps-1 with h = (T - delta)/steps. Training uses the same grid.
inline TimeGrid reverse_time_grid(const SamplerConfig& cfg) {
  cfg.validate();
  TimeGrid g;
  g.t_min = cfg.T - cfg.step() * static_cast<double>(cfg.steps - 1);
  g.t_max = cfg.T;
  g.times.resize(cfg.steps);
  for (std::size_t k = 0; k < cfg.steps; ++k) g.times[k] = cfg.T - cfg.step() * static_cast<double>(k);
  std::reverse(g.times.begin(), g.times.end());
  return g;
}

// ---------------------------------------------------------------------------
// Score providers. Each maps (t, rows of X) to the rows of s(t, X).

class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual Samples score(double t, const Samples& X) const = 0;
  virtual std::string name() const = 0;
};

/// Two-layer ReLU net r(t, x) = (1/m) W2 relu(W1 [x; t] + b), with s = -r / sigma(t).
class TimeNet : public ScoreProvider {
 public:
  TimeNet() = default;
  TimeNet(Eigen::MatrixXd W1, Eigen::VectorXd b, Eigen::MatrixXd W2)
      : W1_(std::move(W1)), b_(std::move(b)), W2_(std::move(W2)) {
    require(W1_.rows() >= 1 && W1_.cols() >= 2, ErrorCode::InvalidArgument, "TimeNet needs width >= 1 and d >= 1");
    require(b_.size() == W1_.rows() && W2_.cols() == W1_.rows() && W2_.rows() + 1 == W1_.cols(),
            ErrorCode::DimensionMismatch, "TimeNet parameter shapes disagree");
  }

  /// Outer weights N(0, 1), inner weights N(0, 1/d), zero bias.
  static TimeNet init(std::size_t m, std::size_t d, std::uint64_t seed) {
    require(m >= 1 && d >= 1, ErrorCode::InvalidArgument, "TimeNet needs m >= 1 and d >= 1");
    Rng rng(seed);
    const auto mi = static_cast<Eigen::Index>(m), di = static_cast<Eigen::Index>(d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    Eigen::MatrixXd W1(mi, di + 1), W2(di, mi);
    for (Eigen::Index r = 0; r < mi; ++r)
      for (Eigen::Index c = 0; c <= di; ++c) W1(r, c) = s * rng.normal();
    for (Eigen::Index r = 0; r < di; ++r)
      for (Eigen::Index c = 0; c < mi; ++c) W2(r, c) = rng.normal();
    return TimeNet(std::move(W1), Eigen::VectorXd::Zero(mi), std::move(W2));
  }

  std::size_t width() const { return static_cast<std::size_t>(W1_.rows()); }
  std::size_t dim() const override { return static_cast<std::size_t>(W2_.rows()); }
  std::string name() const override { return "timenet"; }

  const Eigen::MatrixXd& W1() const { return W1_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::MatrixXd& W2() const { return W2_; }
  Eigen::MatrixXd& W1() { return W1_; }
  Eigen::VectorXd& b() { return b_; }
  Eigen::MatrixXd& W2() { return W2_; }

  /// r(t, X) row-wise.
  Samples r(double t, const Samples& X) const {
    require(static_cast<std::size_t>(X.cols()) == dim(), ErrorCode::DimensionMismatch, "input dimension mismatch");
    const Eigen::Index d = X.cols();
    Eigen::MatrixXd H = W1_.leftCols(d) * X.transpose();
    H.colwise() += b_ + W1_.col(d) * t;
    return (W2_ * H.cwiseMax(0.0) / static_cast<double>(width())).transpose();
  }

  Samples score(double t, const Samples& X) const override { return -r(t, X) / ou_sigma(t); }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << "# timenet m=" << width() << " d=" << dim() << "\n" << std::setprecision(17);
    for (Eigen::Index l = 0; l < W1_.rows(); ++l) {
      for (Eigen::Index c = 0; c < W1_.cols(); ++c) out << W1_(l, c) << ",";
      out << b_[l];
      for (Eigen::Index c = 0; c < W2_.rows(); ++c) out << "," << W2_(c, l);
      out << "\n";
    }
  }

  static TimeNet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    std::size_t m = 0, d = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream hs(line.substr(1));
        std::string tok;
        while (hs >> tok) {
          if (tok.rfind("m=", 0) == 0) m = std::stoul(tok.substr(2));
          if (tok.rfind("d=", 0) == 0) d = std::stoul(tok.substr(2));
        }
        continue;
      }
      std::vector<double> row;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    require(d >= 1 && m == rows.size(), ErrorCode::IoError, "malformed TimeNet file " + path);
    const auto mi = static_cast<Eigen::Index>(m), di = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd W1(mi, di + 1), W2(di, mi);
    Eigen::VectorXd b(mi);
    for (Eigen::Index l = 0; l < mi; ++l) {
      const auto& r = rows[static_cast<std::size_t>(l)];
      require(r.size() == 2 * d + 2, ErrorCode::IoError, "malformed TimeNet row in " + path);
      for (Eigen::Index c = 0; c <= di; ++c) W1(l, c) = r[static_cast<std::size_t>(c)];
      b[l] = r[d + 1];
      for (Eigen::Index c = 0; c < di; ++c) W2(c, l) = r[d + 2 + static_cast<std::size_t>(c)];
    }
    return TimeNet(std::move(W1), std::move(b), std::move(W2));
  }

 private:
  Eigen::MatrixXd W1_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd W2_;
};

/// The empirical optimal score at time t in d dimensions:
/// s*(t, x) = (mu sum_i alpha_i(x) x_i - x) / sigma^2, alpha = softmax(-|x - mu x_i|^2 / (2 sigma^2)).
class AnalyticEmpirical : public ScoreProvider {
 public:
  explicit AnalyticEmpirical(Samples train) : train_(std::move(train)) {
    require(train_.rows() >= 1 && train_.cols() >= 1, ErrorCode::EmptyInput, "AnalyticEmpirical needs training points");
  }
  std::size_t dim() const override { return static_cast<std::size_t>(train_.cols()); }
  std::string name() const override { return "analytic-empirical"; }

  /// Score at an explicit noise level; the diffusion path uses mu = e^{-t}.
  Eigen::VectorXd score_at(const NoiseLevel& nl, const Eigen::VectorXd& x) const {
    const Eigen::Index n = train_.rows();
    Eigen::VectorXd e(n);
    const double inv = 0.5 / (nl.sigma * nl.sigma);
    for (Eigen::Index i = 0; i < n; ++i) e[i] = -(x - nl.mu * train_.row(i).transpose()).squaredNorm() * inv;
    const double emax = e.maxCoeff();
    const Eigen::VectorXd w = (e.array() - emax).exp().matrix();
    const Eigen::VectorXd mean = train_.transpose() * w / w.sum();
    return (nl.mu * mean - x) / (nl.sigma * nl.sigma);
  }

  Samples score(double t, const Samples& X) const override {
    require(X.cols() == train_.cols(), ErrorCode::DimensionMismatch, "input dimension mismatch");
    const NoiseLevel nl{ou_mu(t), ou_sigma(t), true, t};
    Samples out(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out.row(r) = score_at(nl, X.row(r).transpose()).transpose();
    return out;
  }

 private:
  Samples train_;
};

/// Exact score of the diffused Gaussian: X_0 ~ N(m, C) gives X_t ~ N(mu m, mu^2 C + sigma^2 I).
/// With m = 0 and C = I the score is -x at every t.
class GaussianScore : public ScoreProvider {
 public:
  GaussianScore(Eigen::VectorXd mean, Eigen::MatrixXd cov, std::string label = "gaussian")
      : mean_(std::move(mean)), cov_(std::move(cov)), label_(std::move(label)) {
    require(cov_.rows() == mean_.size() && cov_.cols() == mean_.size(), ErrorCode::DimensionMismatch,
            "covariance shape must match the mean");
  }
  static GaussianScore fit(const Samples& train) {
    auto f = gaussian_fit(train);
    return GaussianScore(f.mean, f.cov, "gaussian-fit");
  }
  static GaussianScore standard_normal(std::size_t d) {
    const auto di = static_cast<Eigen::Index>(d);
    return GaussianScore(Eigen::VectorXd::Zero(di), Eigen::MatrixXd::Identity(di, di), "standard-normal");
  }

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  std::string name() const override { return label_; }

  Samples score(double t, const Samples& X) const override {
    require(X.cols() == mean_.size(), ErrorCode::DimensionMismatch, "input dimension mismatch");
    const double mu = ou_mu(t), s2 = -std::expm1(-2.0 * t);
    const Eigen::MatrixXd S = mu * mu * cov_ + s2 * Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols());
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::MatrixXd centered = (X.rowwise() - (mu * mean_).transpose()).transpose();
    return -llt.solve(centered).transpose();
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::string label_;
};

/// Reverse-time Euler-Maruyama for dX = (X + 2 s(T - u, X)) du + sqrt(2) dB,
/// from X ~ N(0, I) at u = 0 (time T) to u = T - delta.
inline Samples sample_backward(const ScoreProvider& provider, const SamplerConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, 2);
  const auto d = static_cast<Eigen::Index>(provider.dim());
  Samples X(static_cast<Eigen::Index>(cfg.n_samples), d);
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < d; ++c) X(r, c) = rng.normal();
  const double h = cfg.step(), noise = std::sqrt(2.0 * h);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = cfg.T - h * static_cast<double>(k);
    const Samples s = provider.score(t, X);
    X += h * (X + 2.0 * s);
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      for (Eigen::Index c = 0; c < d; ++c) X(r, c) += noise * rng.normal();
  }
  return X;
}

// ---------------------------------------------------------------------------
// Time-conditioned training on the noise-prediction objective
//   mean over the batch of |r(t, mu(t) x_i + sigma(t) Z) - Z|^2,
// t drawn from the grid with probability proportional to sigma(t).

struct DiffusionLogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double wallclock = 0.0;
};

struct DiffusionTrainResult {
  TimeNet net;
  std::vector<DiffusionLogRow> log;
  TrainStatus status = TrainStatus::Converged;
  std::size_t steps_done = 0;
};

enum class DiffusionKernel { Auto, Fused, Gemm };

namespace detail {

// Gradient of the summed squared error over one chunk of the batch, in single
// precision. Columns of X are [x; t], columns of Z the noise draws. Adds the
// gradients (without the 1/m of the output layer) and returns the summed loss.
struct ChunkGrads {
  Eigen::MatrixXf gW1, gW2;
  Eigen::VectorXf gb;
};

// One sample at a time over all hidden units; fastest for small d.
inline double accumulate_fused(const Eigen::MatrixXf& W1, const Eigen::VectorXf& b, const Eigen::MatrixXf& W2t,
                               const Eigen::MatrixXf& X, const Eigen::MatrixXf& Z, Eigen::Index cols, float inv_m,
                               float gscale, ChunkGrads& g, Eigen::ArrayXf& a, Eigen::ArrayXf& da) {
  const Eigen::Index d = Z.rows();
  double loss = 0.0;
  Eigen::VectorXf r(d);
  for (Eigen::Index c = 0; c < cols; ++c) {
    a = b.array();
    for (Eigen::Index j = 0; j <= d; ++j) a += X(j, c) * W1.col(j).array();
    a = a.max(0.0f);
    for (Eigen::Index k = 0; k < d; ++k) r[k] = W2t.col(k).dot(a.matrix()) * inv_m - Z(k, c);
    loss += static_cast<double>(r.squaredNorm());
    r *= gscale;
    da.setZero();
    for (Eigen::Index k = 0; k < d; ++k) {
      g.gW2.col(k) += r[k] * a.matrix();
      da += r[k] * W2t.col(k).array();
    }
    da = (a > 0.0f).select(da, 0.0f);
    g.gb += da.matrix();
    for (Eigen::Index j = 0; j <= d; ++j) g.gW1.col(j) += X(j, c) * da.matrix();
  }
  return loss;
}

// Whole chunk as matrix products; better once d is large.
inline double accumulate_gemm(const Eigen::MatrixXf& W1, const Eigen::VectorXf& b, const Eigen::MatrixXf& W2t,
                              const Eigen::MatrixXf& X, const Eigen::MatrixXf& Z, Eigen::Index cols, float inv_m,
                              float gscale, ChunkGrads& g, Eigen::MatrixXf& H, Eigen::MatrixXf& G) {
  const auto Xc = X.leftCols(cols);
  H.noalias() = W1 * Xc;
  H.colwise() += b;
  H = H.cwiseMax(0.0f);
  G.noalias() = W2t.transpose() * H;
  G *= inv_m;
  G -= Z.leftCols(cols);
  const double loss = static_cast<double>(G.squaredNorm());
  G *= gscale;
  g.gW2.noalias() += H * G.transpose();
  Eigen::MatrixXf dA = W2t * G;
  dA = (H.array() > 0.0f).select(dA, 0.0f);
  g.gW1.noalias() += dA * Xc.transpose();
  g.gb += dA.rowwise().sum();
  return loss;
}

}  // namespace detail

/// Parameters move by eta (times m when cfg.scale_by_width) times the gradient of
/// the batch loss (mean or sum over the batch per cfg.reduction; mean or sum over
/// output coordinates per cfg.coordinate_mean). Forward and backward passes run
/// in single precision; the parameters are kept in double.
inline DiffusionTrainResult train_time_conditioned(const TimeNet& init, const Samples& data, const TimeGrid& grid,
                                                   const TrainConfig& cfg, DiffusionKernel kernel = DiffusionKernel::Auto) {
  require(data.rows() >= 1, ErrorCode::EmptyInput, "training set is empty");
  require(static_cast<std::size_t>(data.cols()) == init.dim(), ErrorCode::DimensionMismatch,
          "training data and net disagree in dimension");
  require(!grid.times.empty(), ErrorCode::InvalidArgument, "time grid is empty");
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  DiffusionTrainResult res{init, {}, TrainStatus::Converged, 0};
  if (cfg.epochs == 0) return res;
  TimeNet& net = res.net;
  const Eigen::Index m = static_cast<Eigen::Index>(net.width());
  const Eigen::Index d = data.cols();
  if (kernel == DiffusionKernel::Auto) kernel = d <= 8 ? DiffusionKernel::Fused : DiffusionKernel::Gemm;
  const float inv_m = 1.0f / static_cast<float>(m);
  const std::size_t B = cfg.batch_size;
  const double per_coord = cfg.coordinate_mean ? 1.0 / static_cast<double>(d) : 1.0;
  const double scale = (cfg.scale_by_width ? static_cast<double>(m) : 1.0) * cfg.eta *
                       (cfg.reduction == Reduction::Sum ? static_cast<double>(B) : 1.0) * per_coord;

  std::vector<double> mus(grid.times.size()), sigmas(grid.times.size());
  for (std::size_t k = 0; k < grid.times.size(); ++k) {
    mus[k] = ou_mu(grid.times[k]);
    sigmas[k] = ou_sigma(grid.times[k]);
  }
  Rng rng(cfg.seed, 3);
  std::discrete_distribution<std::size_t> pick_t(sigmas.begin(), sigmas.end());

  constexpr Eigen::Index kChunk = 256;
  Eigen::MatrixXf W1f, W2t, X(d + 1, kChunk), Z(d, kChunk), H, G;
  Eigen::VectorXf bf;
  Eigen::ArrayXf a(m), da(m);
  detail::ChunkGrads g{Eigen::MatrixXf(m, d + 1), Eigen::MatrixXf(m, d), Eigen::VectorXf(m)};
  double loss0 = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t step = 1; step <= cfg.epochs; ++step) {
    W1f = net.W1().cast<float>();
    W2t = net.W2().transpose().cast<float>();
    bf = net.b().cast<float>();
    g.gW1.setZero();
    g.gW2.setZero();
    g.gb.setZero();
    double loss = 0.0;
    const float gscale = 2.0f / static_cast<float>(B);
    for (std::size_t start = 0; start < B; start += kChunk) {
      const Eigen::Index cols = static_cast<Eigen::Index>(std::min<std::size_t>(kChunk, B - start));
      for (Eigen::Index c = 0; c < cols; ++c) {
        const std::size_t k = pick_t(rng.engine());
        const Eigen::Index i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(data.rows())));
        for (Eigen::Index j = 0; j < d; ++j) {
          const double z = rng.normal();
          Z(j, c) = static_cast<float>(z);
          X(j, c) = static_cast<float>(mus[k] * data(i, j) + sigmas[k] * z);
        }
        X(d, c) = static_cast<float>(grid.times[k]);
      }
      if (kernel == DiffusionKernel::Gemm)
        loss += detail::accumulate_gemm(W1f, bf, W2t, X, Z, cols, inv_m, gscale, g, H, G);
      else
        loss += detail::accumulate_fused(W1f, bf, W2t, X, Z, cols, inv_m, gscale, g, a, da);
    }
    loss /= static_cast<double>(B);
    if (step == 1) loss0 = loss;
    // The 1/m of the output layer enters the W2 and hidden-layer gradients once each.
    const double s = scale * static_cast<double>(inv_m);
    net.W2() -= s * g.gW2.transpose().cast<double>();
    net.W1() -= s * g.gW1.cast<double>();
    net.b() -= s * g.gb.cast<double>();
    res.steps_done = step;

    const bool finite = std::isfinite(loss) && net.W1().allFinite() && net.W2().allFinite() && net.b().allFinite();
    const bool at_log = cfg.log_every > 0 && (step % cfg.log_every == 0 || step == 1);
    const bool diverged = !finite || loss > cfg.divergence_factor * loss0;
    if (at_log || step == cfg.epochs || diverged) res.log.push_back({step, loss, seconds()});
    if (diverged) {
      res.status = TrainStatus::Diverged;
      return res;
    }
  }
  return res;
}

}  // namespace dsm
