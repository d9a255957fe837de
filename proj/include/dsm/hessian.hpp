#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "dsm/dataset.hpp"
#include "dsm/net.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/piecewise.hpp"
#include "dsm/report.hpp"
#include "dsm/rng.hpp"
#include "dsm/tv.hpp"
#include "dsm/weight_pi.hpp"
#include "json.hpp"

namespace dsm {

/// Hessian of R_n at theta, as an operator on (w2, b) in R^{2m}:
///   NTK term      (2/n) sum_i E[grad s grad s^T]
///   cross term    c_l on the (w2_l, b_l) and (b_l, w2_l) entries
///   boundary term D_l on the (b_l, b_l) entry.
class HessianOperator {
 public:
  HessianOperator(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl)
      : engine_(net, ds, nl), cross_(engine_.cross_coefficients()), boundary_(engine_.boundary_diagonal()) {
    net.require_theory("the Hessian");
  }

  Eigen::Index dim() const { return 2 * static_cast<Eigen::Index>(engine_.width()); }
  const RiskEngine& engine() const { return engine_; }
  const Eigen::VectorXd& cross() const { return cross_; }
  const Eigen::VectorXd& boundary() const { return boundary_; }

  Eigen::VectorXd apply_ntk(const Eigen::VectorXd& v) const { return engine_.ntk_apply(v); }

  Eigen::VectorXd apply_cross(const Eigen::VectorXd& v) const {
    const Eigen::Index m = dim() / 2;
    Eigen::VectorXd out(dim());
    out.head(m) = cross_.cwiseProduct(v.tail(m));
    out.tail(m) = cross_.cwiseProduct(v.head(m));
    return out;
  }

  Eigen::VectorXd apply_boundary(const Eigen::VectorXd& v) const {
    const Eigen::Index m = dim() / 2;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    out.tail(m) = boundary_.cwiseProduct(v.tail(m));
    return out;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    require(v.size() == dim(), ErrorCode::DimensionMismatch, "Hessian operator applied to a vector of wrong length");
    return apply_ntk(v) + apply_cross(v) + apply_boundary(v);
  }

  /// Assembled column by column; exactly symmetric after averaging with the transpose.
  Eigen::MatrixXd dense() const { return assemble([&](const Eigen::VectorXd& v) { return apply(v); }); }
  Eigen::MatrixXd dense_ntk() const { return assemble([&](const Eigen::VectorXd& v) { return apply_ntk(v); }); }

  /// Upper bound on the spectral norm: trace of the (PSD) NTK term plus the
  /// largest |c_l| (the cross block has eigenvalues +-c_l) plus the largest |D_l|.
  double norm_upper_bound() const {
    return engine_.ntk_trace() + cross_.cwiseAbs().maxCoeff() + boundary_.cwiseAbs().maxCoeff();
  }

 private:
  template <class F>
  Eigen::MatrixXd assemble(F&& f) const {
    const Eigen::Index d = dim();
    Eigen::MatrixXd M(d, d);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      e[k] = 1.0;
      M.col(k) = f(e);
      e[k] = 0.0;
    }
    return 0.5 * (M + M.transpose());
  }

  RiskEngine engine_;
  Eigen::VectorXd cross_, boundary_;
};

/// Dense closed-form Hessian (2m x 2m).
inline Eigen::MatrixXd hessian_closed_form(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl) {
  return HessianOperator(net, ds, nl).dense();
}

struct EigenEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
};

struct PowerOptions {
  double tol = 1e-6;
  std::size_t max_iters = 200000;
  std::uint64_t seed = 12345;
};

/// Largest eigenvalue of a symmetric operator by power iteration on op + shift I,
/// with shift >= the spectral radius so that the top of the shifted spectrum is
/// lambda_max + shift. Stops when ||op v - rho v|| <= tol * |rho|, which places
/// an eigenvalue within tol * |rho| of rho.
template <class Op>
EigenEstimate power_iteration(Op&& op, Eigen::Index dim, double shift, const PowerOptions& opt = {}) {
  require(dim >= 1, ErrorCode::InvalidArgument, "operator dimension must be >= 1");
  Rng rng(opt.seed);
  Eigen::VectorXd v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v[k] = rng.normal();
  v.normalize();
  EigenEstimate est;
  const double floor = 1e-13 * std::max(shift, 1e-300);
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    const Eigen::VectorXd hv = op(v);
    const double rho = v.dot(hv);
    est = {rho, it, (hv - rho * v).norm()};
    if (est.residual <= opt.tol * std::max(std::abs(rho), floor)) return est;
    Eigen::VectorXd next = hv + shift * v;
    const double nrm = next.norm();
    if (nrm == 0.0) return est;  // op = -shift I on the start vector
    v = next / nrm;
  }
  throw Error(ErrorCode::NoConvergence, "power iteration hit max_iters", est.value);
}

/// lambda_max of a dense symmetric matrix; the shift is the Gershgorin bound.
inline EigenEstimate lambda_max(const Eigen::MatrixXd& M, const PowerOptions& opt = {}) {
  require(M.rows() == M.cols(), ErrorCode::DimensionMismatch, "matrix must be square");
  const double shift = M.cwiseAbs().rowwise().sum().maxCoeff();
  return power_iteration([&](const Eigen::VectorXd& v) { return (M * v).eval(); }, M.rows(), shift, opt);
}

/// lambda_max of the full Hessian operator (matrix-free).
inline EigenEstimate lambda_max(const HessianOperator& H, const PowerOptions& opt = {}) {
  return power_iteration([&](const Eigen::VectorXd& v) { return H.apply(v); }, H.dim(), H.norm_upper_bound(), opt);
}

/// lambda_max of the NTK term alone; it is positive semi-definite, so no shift is needed.
inline EigenEstimate ntk_lambda_max(const HessianOperator& H, const PowerOptions& opt = {}) {
  return power_iteration([&](const Eigen::VectorXd& v) { return H.apply_ntk(v); }, H.dim(), 0.0, opt);
}

struct HessianReport {
  double lambda_max = 0.0;
  double ntk_term_lambda_max = 0.0;  // lambda_max of (2/n) sum_i E[grad s grad s^T]
  double ntk_norm = 0.0;
  double cross_norm = 0.0;
  double boundary_norm = 0.0;
  double eta = 0.0;
  double stability_bound = 0.0;  // 2 / (m eta)
  bool is_stable_necessary = false;
  bool interior_flag = false;
  double gradient_norm = 0.0;
  double risk = 0.0;
  std::size_t iterations = 0;
  bool dense = false;
};

/// Eq. lambda_max <= 2/(m eta) is a necessary condition for linear stability,
/// not a proof of it. Nets with m <= 256 go through the assembled matrix.
inline HessianReport stability_report(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl, double eta,
                                      const PowerOptions& opt = {}) {
  const HessianOperator H(net, ds, nl);
  HessianReport r;
  r.dense = net.width() <= 256;
  EigenEstimate top;
  if (r.dense) {
    top = lambda_max(H.dense(), opt);
  } else {
    top = lambda_max(H, opt);
  }
  r.lambda_max = top.value;
  r.iterations = top.iterations;
  r.ntk_term_lambda_max = ntk_lambda_max(H, opt).value;
  r.ntk_norm = r.ntk_term_lambda_max;
  r.cross_norm = H.cross().cwiseAbs().maxCoeff();
  r.boundary_norm = H.boundary().cwiseAbs().maxCoeff();
  r.eta = eta;
  r.stability_bound = eta > 0.0 ? 2.0 / (static_cast<double>(net.width()) * eta) : std::numeric_limits<double>::infinity();
  r.is_stable_necessary = r.lambda_max <= r.stability_bound;
  r.interior_flag = net.interior();
  r.gradient_norm = H.engine().gradient().norm();
  r.risk = H.engine().risk();
  return r;
}

inline nlohmann::json to_json(const HessianReport& r) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(std::to_string(x)); };
  return {{"lambda_max", num(r.lambda_max)},
          {"ntk_term_lambda_max", num(r.ntk_term_lambda_max)},
          {"components", {{"ntk", num(r.ntk_norm)}, {"cross", num(r.cross_norm)}, {"boundary", num(r.boundary_norm)}}},
          {"eta", num(r.eta)},
          {"stability_bound", num(r.stability_bound)},
          {"is_stable_necessary", r.is_stable_necessary},
          {"condition", "necessary only: lambda_max <= 2/(m eta)"},
          {"interior_flag", r.interior_flag},
          {"gradient_norm", num(r.gradient_norm)},
          {"risk", num(r.risk)},
          {"iterations", r.iterations},
          {"assembly", r.dense ? "dense" : "matrix-free"}};
}

/// lambda_max((1/n) sum_i E[grad s grad s^T]) >= (2/m) TV_pi(s_theta).
inline BoundReport ntk_tv_lower_bound_check(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl,
                                            const PowerOptions& opt = {}) {
  const HessianOperator H(net, ds, nl);
  const PiEvaluator pi(ds, nl, 0);
  // The Hessian's NTK term carries a factor 2.
  const auto top = ntk_lambda_max(H, opt);
  const double lhs = 0.5 * top.value;
  const double rhs = 2.0 / static_cast<double>(net.width()) * tv_of_net(net, pi).value;
  BoundReport rep;
  rep.name = "ntk_tv_lower_bound";
  rep.instance = "n=" + std::to_string(ds.n()) + " m=" + std::to_string(net.width());
  rep.premises.push_back(check_le("theory-mode net (|w1| = 1)", 0.0, 0.0));
  rep.conclusions.push_back(conclude_ge("lambda_max(NTK) >= (2/m) TV_pi(s_theta)", lhs, rhs, opt.tol * std::abs(lhs)));
  return rep;
}

}  // namespace dsm
