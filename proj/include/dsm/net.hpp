#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dsm/error.hpp"
#include "dsm/rng.hpp"

namespace dsm {

enum class NetMode { Theory, Standard };

inline const char* to_string(NetMode m) { return m == NetMode::Theory ? "theory" : "standard"; }

inline NetMode net_mode_from_string(const std::string& s) {
  if (s == "theory") return NetMode::Theory;
  if (s == "standard") return NetMode::Standard;
  throw Error(ErrorCode::ConfigError, "unknown net mode '" + s + "'");
}

/// Gradient of s_theta(y) with respect to the trainable parameters (w2, b).
struct ParamGradient {
  Eigen::VectorXd d_w2;
  Eigen::VectorXd d_b;
};

/// Breakpoint tau = -b / w1 of one unit and the mass of s'' there.
struct Kink {
  double tau = 0.0;
  double jump = 0.0;
  std::size_t unit = 0;
};

/// One-dimensional two-layer ReLU score model
///   s(y) = (1/m) sum_l w2_l relu(w1_l y + b_l).
/// Only (w2, b) are trained; w1 stays at its initial value.
class TwoLayerNet {
 public:
  TwoLayerNet() = default;

  TwoLayerNet(Eigen::VectorXd w1, Eigen::VectorXd w2, Eigen::VectorXd b, double clip, NetMode mode)
      : w1_(std::move(w1)), w2_(std::move(w2)), b_(std::move(b)), clip_(clip), mode_(mode) {
    require(w1_.size() >= 1, ErrorCode::InvalidArgument, "width must be >= 1");
    require(w1_.size() == w2_.size() && w1_.size() == b_.size(), ErrorCode::DimensionMismatch,
            "w1, w2 and b must have equal length");
    require(clip_ > 0.0, ErrorCode::InvalidArgument, "clip bound A must be > 0");
    if (mode_ == NetMode::Theory)
      for (Eigen::Index l = 0; l < w1_.size(); ++l)
        require(std::abs(w1_[l]) == 1.0, ErrorCode::NotTheoryMode, "theory-mode inner weights must be +-1");
  }

  /// Theory mode: w1 uniform on {-1,+1}, b = 0, w2 ~ N(0,1) clipped to [-A, A].
  /// Standard mode: w1 ~ N(0, 1), b = 0, w2 ~ N(0,1).
  static TwoLayerNet init(std::size_t m, double clip, std::uint64_t seed, NetMode mode = NetMode::Theory) {
    require(m >= 1, ErrorCode::InvalidArgument, "width must be >= 1");
    require(clip > 0.0, ErrorCode::InvalidArgument, "clip bound A must be > 0");
    Rng rng(seed);
    const auto mm = static_cast<Eigen::Index>(m);
    Eigen::VectorXd w1(mm), w2(mm), b = Eigen::VectorXd::Zero(mm);
    for (Eigen::Index l = 0; l < mm; ++l) w1[l] = mode == NetMode::Theory ? rng.sign() : rng.normal();
    for (Eigen::Index l = 0; l < mm; ++l) w2[l] = rng.normal();
    if (mode == NetMode::Theory) w2 = w2.cwiseMax(-clip).cwiseMin(clip);
    return TwoLayerNet(std::move(w1), std::move(w2), std::move(b), clip, mode);
  }

  std::size_t width() const { return static_cast<std::size_t>(w1_.size()); }
  double clip() const { return clip_; }
  NetMode mode() const { return mode_; }
  const Eigen::VectorXd& w1() const { return w1_; }
  const Eigen::VectorXd& w2() const { return w2_; }
  const Eigen::VectorXd& b() const { return b_; }
  Eigen::VectorXd& w2() { return w2_; }
  Eigen::VectorXd& b() { return b_; }
  void set_clip(double a) { clip_ = a; }

  double forward(double y) const {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < w1_.size(); ++l) acc += w2_[l] * std::max(0.0, w1_[l] * y + b_[l]);
    return acc / static_cast<double>(w1_.size());
  }

  /// The indicator uses >= 0 at the kink itself.
  ParamGradient grad_params(double y) const {
    const Eigen::Index m = w1_.size();
    const double inv = 1.0 / static_cast<double>(m);
    ParamGradient g{Eigen::VectorXd(m), Eigen::VectorXd(m)};
    for (Eigen::Index l = 0; l < m; ++l) {
      const double z = w1_[l] * y + b_[l];
      g.d_w2[l] = inv * std::max(0.0, z);
      g.d_b[l] = z >= 0.0 ? inv * w2_[l] : 0.0;
    }
    return g;
  }

  /// Kinks with the mass of s'' at each: |w1| w2 / m (the unit's slope always
  /// steps up by |w1| when crossing tau from left to right).
  std::vector<Kink> kinks() const {
    require_theory("kinks");
    std::vector<Kink> out(width());
    const double inv = 1.0 / static_cast<double>(width());
    for (std::size_t l = 0; l < width(); ++l) {
      const auto i = static_cast<Eigen::Index>(l);
      out[l] = {-b_[i] / w1_[i], std::abs(w1_[i]) * w2_[i] * inv, l};
    }
    return out;
  }

  /// Flat parameter vector (w2, b) of length 2m, in this order.
  Eigen::VectorXd params() const {
    Eigen::VectorXd p(2 * w1_.size());
    p << w2_, b_;
    return p;
  }

  void set_params(const Eigen::VectorXd& p) {
    require(p.size() == 2 * w1_.size(), ErrorCode::DimensionMismatch, "parameter vector must have length 2m");
    w2_ = p.head(w1_.size());
    b_ = p.tail(w1_.size());
  }

  /// Clip w2 onto [-A, A].
  void project() { w2_ = w2_.cwiseMax(-clip_).cwiseMin(clip_); }

  double max_abs_w2() const { return w2_.cwiseAbs().maxCoeff(); }

  /// True when max |w2| < A - margin * A.
  bool interior(double margin = 1e-6) const { return max_abs_w2() < clip_ * (1.0 - margin); }

  void require_theory(const char* what) const {
    if (mode_ != NetMode::Theory) throw Error(ErrorCode::NotTheoryMode, std::string(what) + " needs a theory-mode net");
  }

  /// CSV checkpoint: a '#' header line with m, A and mode, then one row w1,w2,b per unit.
  void save(const std::string& path, const std::string& header_comment = {}) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    if (!header_comment.empty()) {
      std::stringstream ss(header_comment);
      std::string line;
      while (std::getline(ss, line)) out << "# " << line << '\n';
    }
    out << std::setprecision(17);
    out << "# net m=" << width() << " A=" << clip_ << " mode=" << to_string(mode_) << " dim=1\n";
    out << "w1,w2,b\n";
    for (Eigen::Index l = 0; l < w1_.size(); ++l) out << w1_[l] << ',' << w2_[l] << ',' << b_[l] << '\n';
  }

  static TwoLayerNet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    double clip = 0.0;
    NetMode mode = NetMode::Theory;
    std::vector<double> w1, w2, b;
    bool have_header = false;
    while (std::getline(in, line)) {
      if (line.rfind("# net ", 0) == 0) {
        std::stringstream ss(line.substr(6));
        std::string kv;
        while (ss >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
          if (key == "A") clip = std::stod(val);
          if (key == "mode") mode = net_mode_from_string(val);
        }
        have_header = true;
        continue;
      }
      if (line.empty() || line[0] == '#' || line.rfind("w1", 0) == 0) continue;
      double a = 0, c = 0, d = 0;
      char s1 = 0, s2 = 0;
      std::stringstream ss(line);
      if (!(ss >> a >> s1 >> c >> s2 >> d) || s1 != ',' || s2 != ',')
        throw Error(ErrorCode::IoError, path + ": malformed row '" + line + "'");
      w1.push_back(a);
      w2.push_back(c);
      b.push_back(d);
    }
    require(have_header, ErrorCode::IoError, path + ": missing '# net' header");
    auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval(); };
    return TwoLayerNet(vec(w1), vec(w2), vec(b), clip, mode);
  }

 private:
  Eigen::VectorXd w1_, w2_, b_;
  double clip_ = 1.0;
  NetMode mode_ = NetMode::Theory;
};

/// Theory-mode net that reproduces the continuous piecewise-linear function with
/// the given knots: value `left_value` at knots[0], slope `slopes[0]` left of
/// knots[0], `slopes[k+1]` on [knots[k], knots[k+1]] and `slopes.back()` right of
/// the last knot (slopes.size() == knots.size() + 1).
///
/// Uses c + a y = c [relu(y+1) - relu(-y-1) - relu(y) + relu(-y)] + a [relu(y) - relu(-y)]
/// plus one unit relu(y - knot) per slope change. The clip bound is set to the
/// largest outer weight.
inline TwoLayerNet piecewise_linear_net(const std::vector<double>& knots, double left_value,
                                        const std::vector<double>& slopes) {
  require(!knots.empty(), ErrorCode::EmptyInput, "need at least one knot");
  require(slopes.size() == knots.size() + 1, ErrorCode::DimensionMismatch, "need knots.size() + 1 slopes");
  const double a = slopes.front();
  const double c = left_value - a * knots.front();
  std::vector<double> w1 = {1, -1, 1, -1, 1, -1};
  std::vector<double> b = {1, -1, 0, 0, 0, 0};
  std::vector<double> coef = {c, -c, -c, c, a, -a};
  for (std::size_t k = 0; k < knots.size(); ++k) {
    w1.push_back(1.0);
    b.push_back(-knots[k]);
    coef.push_back(slopes[k + 1] - slopes[k]);
  }
  const auto m = static_cast<Eigen::Index>(w1.size());
  Eigen::VectorXd W1(m), W2(m), B(m);
  for (Eigen::Index l = 0; l < m; ++l) {
    W1[l] = w1[l];
    B[l] = b[l];
    W2[l] = static_cast<double>(m) * coef[l];
  }
  const double clip = std::max(1.0, W2.cwiseAbs().maxCoeff());
  return TwoLayerNet(W1, W2, B, clip, NetMode::Theory);
}

}  // namespace dsm
