#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/empirical_score.hpp"
#include "dsm/hessian.hpp"
#include "dsm/net.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/report.hpp"
#include "dsm/risk.hpp"
#include "dsm/tv.hpp"
#include "dsm/weight_pi.hpp"

namespace dsm {

// Every verifier returns premises, both sides of each conclusion and a verdict.
// A conclusion is only asserted when its premises hold; a failure on an
// instance where they do hold is a bug somewhere.

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline std::string describe(const Dataset& ds, const NoiseLevel& nl) {
  std::ostringstream os;
  os.precision(6);
  os << "n=" << ds.n() << " mu=" << nl.mu << " sigma=" << nl.sigma;
  if (ds.has_delta()) os << " delta=" << ds.delta() << " sigma/(mu delta)=" << nl.sigma / (nl.mu * ds.delta());
  return os.str();
}

inline std::string describe(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl) {
  return describe(ds, nl) + " m=" + std::to_string(net.width());
}

// exp(-mu^2 Delta^2 / (k sigma^2))
inline double spacing_exp(const Dataset& ds, const NoiseLevel& nl, double k) {
  const double r = nl.mu * ds.delta() / nl.sigma;
  return std::exp(-r * r / k);
}

inline Premise n_at_least_10(const Dataset& ds) {
  return check_ge("n >= 10 (used by the counting step of the proof)", static_cast<double>(ds.n()), 10.0);
}

// Among candidate conclusions keep the one closest to failing, in units of its own scale.
inline Conclusion tightest(std::vector<Conclusion> cs) {
  auto margin = [](const Conclusion& c) {
    const double gap = c.greater ? c.check.lhs - c.check.rhs : c.check.rhs - c.check.lhs;
    const double scale = std::max({std::abs(c.check.lhs), std::abs(c.check.rhs), 1e-300});
    return (gap + c.error_bar) / scale;
  };
  return *std::min_element(cs.begin(), cs.end(), [&](const auto& a, const auto& b) { return margin(a) < margin(b); });
}

// lambda_max of the full Hessian; dense assembly for small widths.
inline EigenEstimate hessian_lambda_max(const HessianOperator& H, const PowerOptions& opt) {
  return H.dim() <= 512 ? lambda_max(H.dense(), opt) : lambda_max(H, opt);
}

}  // namespace detail

/// Midpoint variance lower bound, and mean/variance concentration near each mu x_i.
inline BoundReport verify_prop1(const Dataset& ds, const NoiseLevel& nl, std::size_t window_points = 41) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_prop1 needs n >= 2");
  BoundReport rep;
  rep.name = "prop1";
  rep.instance = detail::describe(ds, nl);
  const std::size_t n = ds.n();
  const double nd = static_cast<double>(n);
  const double span = ds.span_width();
  const double var_err = 64.0 * detail::kEps * span * span;

  std::vector<Conclusion> mids;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double mi = 0.5 * nl.mu * (ds[i] + ds[i + 1]);
    const double gap = ds[i + 1] - ds[i];
    mids.push_back(conclude_ge("V[W(m_i)] >= (x_i - x_{i+1})^2 / (2n), tightest i=" + std::to_string(i + 1),
                               w_moments(ds, nl, mi).var, gap * gap / (2.0 * nd), var_err));
  }
  rep.conclusions.push_back(detail::tightest(std::move(mids)));

  // Concentration: sup over |y - mu x_i| <= mu Delta / 4 on a uniform grid.
  const double delta = ds.delta();
  const double e4 = detail::spacing_exp(ds, nl, 4.0);
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < window_points; ++k) {
      const double u = window_points == 1 ? 0.0 : -0.25 + 0.5 * static_cast<double>(k) / static_cast<double>(window_points - 1);
      const auto w = w_moments(ds, nl, nl.mu * (ds[i] + u * delta));
      worst_mean = std::max(worst_mean, std::abs(w.mean - ds[i]));
      worst_var = std::max(worst_var, w.var);
    }
  const Premise spacing = check_ge("Delta >= 2 sigma / mu", delta, 2.0 * nl.sigma / nl.mu);
  auto mean_c = conclude_le("sup |E[W(y)] - x_i| <= n Delta exp(-mu^2 Delta^2 / (4 sigma^2)) near mu x_i", worst_mean,
                            nd * delta * e4, 64.0 * detail::kEps * std::max(std::abs(ds.front()), std::abs(ds.back())));
  auto var_c = conclude_le("sup V[W(y)] <= 4 n^2 Delta^2 exp(-mu^2 Delta^2 / (4 sigma^2)) near mu x_i", worst_var,
                           4.0 * nd * nd * delta * delta * e4, var_err);
  mean_c.conditions.push_back(spacing);
  var_c.conditions.push_back(spacing);
  rep.conclusions.push_back(mean_c);
  rep.conclusions.push_back(var_c);
  rep.notes.push_back("concentration bounds checked on " + std::to_string(window_points) + " points per window");
  return rep;
}

/// Derivative-gap lower bound at the interval ends, and the closed-form bound on R_n(s*).
///
/// The gap is asserted at y = mu x_i and mu x_{i+1} (the images of the data
/// points, which is what the TV argument uses). The literal reading y = x_i is
/// reported alongside as informational.
inline BoundReport verify_cor2(const Dataset& ds, const NoiseLevel& nl, std::size_t mc, std::uint64_t seed = 7) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_cor2 needs n >= 2");
  BoundReport rep;
  rep.name = "cor2";
  rep.instance = detail::describe(ds, nl);
  rep.premises.push_back(check_ge("Delta >= 2 sigma / mu", ds.delta(), 2.0 * nl.sigma / nl.mu));
  const std::size_t n = ds.n();
  const double nd = static_cast<double>(n);
  const double s4 = std::pow(nl.sigma, 4);
  const double delta = ds.delta();
  const double e4 = detail::spacing_exp(ds, nl, 4.0);
  const double span = ds.span_width();
  const double err = nl.mu * nl.mu / s4 * 64.0 * detail::kEps * span * span;

  auto gaps = [&](bool scaled) {
    std::vector<Conclusion> cs;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double vm = w_moments(ds, nl, 0.5 * nl.mu * (ds[i] + ds[i + 1])).var;
      const double g = ds[i + 1] - ds[i];
      const double rhs = nl.mu * nl.mu / s4 * (g * g / (2.0 * nd) - 4.0 * nd * nd * delta * delta * e4);
      for (std::size_t j : {i, i + 1}) {
        const double y = scaled ? nl.mu * ds[j] : ds[j];
        // s*'(y) - s*'(m_i) = mu^2 / sigma^4 (V[W(y)] - V[W(m_i)])
        const double lhs = nl.mu * nl.mu / s4 * std::abs(w_moments(ds, nl, y).var - vm);
        cs.push_back(conclude_ge(std::string("|s*'(y) - s*'(m_i)| >= mu^2/sigma^4 (...), y = ") +
                                     (scaled ? "mu x_" : "x_") + std::to_string(j + 1) + ", tightest i=" + std::to_string(i + 1),
                                 lhs, rhs, err));
      }
    }
    return detail::tightest(std::move(cs));
  };
  rep.conclusions.push_back(gaps(true));
  auto literal = gaps(false);
  literal.informational = true;
  rep.conclusions.push_back(literal);

  const auto r = risk_of_sstar(ds, nl, std::max<std::size_t>(mc, 100), seed);
  rep.conclusions.push_back(conclude_le("R_n(s*) <= 4 mu^2 (x_n - x_1)^2 / sigma^4 exp(-mu^2 Delta^2 / (32 sigma^2))",
                                        r.estimate, r.upper_bound, 4.0 * r.standard_error));
  rep.notes.push_back("R_n(s*) by Monte Carlo with " + std::to_string(std::max<std::size_t>(mc, 100)) +
                      " draws per point; error bar 4 standard errors");
  return rep;
}

/// TV_pi(s*) >= mu^3 n Delta^3 / (2^12 sigma^4) when 16 n^3 exp(-mu^2 Delta^2 / (4 sigma^2)) <= 1.
inline BoundReport verify_thm3(const Dataset& ds, const NoiseLevel& nl, TvOptions opt = {.rel_tol = 1e-4, .pi_order = 0}) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_thm3 needs n >= 2");
  BoundReport rep;
  rep.name = "thm3";
  rep.instance = detail::describe(ds, nl);
  const double nd = static_cast<double>(ds.n());
  rep.premises.push_back(small_noise_condition(ds, nl).exponential);
  rep.premises.push_back(detail::n_at_least_10(ds));
  const double d = ds.delta();
  const double rhs = std::pow(nl.mu, 3) * nd * d * d * d / (4096.0 * std::pow(nl.sigma, 4));
  if (!all_hold(rep.premises)) {
    rep.conclusions.push_back(conclude_ge("TV_pi(s*) >= mu^3 n Delta^3 / (2^12 sigma^4)", 0.0, rhs));
    rep.notes.push_back("premises fail; TV not evaluated");
    return rep;
  }
  const auto tv = tv_of_sstar(ds, nl, opt);
  rep.conclusions.push_back(conclude_ge("TV_pi(s*) >= mu^3 n Delta^3 / (2^12 sigma^4)", tv.value, rhs, 10.0 * opt.rel_tol * tv.value));
  rep.notes.push_back("TV by graded adaptive Simpson, " + std::to_string(tv.evaluations) + " evaluations");
  return rep;
}

/// Premises used by the upper bound on TV_pi(s_theta): a theory-mode net with
/// max |w2| <= A and A + 1/sigma^2 <= 2A (the Lipschitz step of the proof).
inline std::vector<Premise> prop6_premises(const TwoLayerNet& net, const NoiseLevel& nl) {
  const double A = net.clip();
  return {check_le("max |w2| <= A", net.max_abs_w2(), A),
          check_le("A + 1/sigma^2 <= 2A", A + 1.0 / (nl.sigma * nl.sigma), 2.0 * A)};
}

/// Third term of the TV upper bound:
/// A / (sqrt(2 pi) sigma) max(sqrt(2 n R), (sqrt(2 pi e) A sigma n R)^(1/3)).
inline double prop6_boundary_term(double A, double sigma, std::size_t n, double risk) {
  const double nd = static_cast<double>(n);
  const double a = std::sqrt(2.0 * nd * risk);
  const double b = std::cbrt(std::sqrt(2.0 * std::numbers::pi * std::numbers::e) * A * sigma * nd * risk);
  return A / (std::sqrt(2.0 * std::numbers::pi) * sigma) * std::max(a, b);
}

/// TV_pi(s_theta) <= lambda_max m / 4 + sqrt(R_n)/2 + boundary term, for any theta.
/// With eta, also the stable form (1/(2 eta) in place of lambda_max m / 4),
/// conditional on lambda_max <= 2/(m eta).
inline BoundReport verify_prop6(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl,
                                std::optional<double> eta = std::nullopt, const PowerOptions& popt = {}) {
  net.require_theory("verify_prop6");
  BoundReport rep;
  rep.name = "prop6";
  rep.instance = detail::describe(net, ds, nl);
  rep.premises = prop6_premises(net, nl);
  const double A = net.clip();
  const double s6 = std::pow(nl.sigma, 6);
  if (ds.n() >= 2)
    rep.notes.push_back("A >= C_n / sigma^6: " + std::string(A >= sstar_tail_bound(ds, nl).c_n / s6 ? "yes" : "no") +
                        " (informational; the proof only needs A >= 1/sigma^2)");

  const HessianOperator H(net, ds, nl);
  const double md = static_cast<double>(net.width());
  const auto top = detail::hessian_lambda_max(H, popt);
  const double risk = H.engine().risk();
  const double tv = tv_of_net(net, PiEvaluator(ds, nl, 0)).value;
  const double tail = std::sqrt(risk) / 2.0 + prop6_boundary_term(A, nl.sigma, ds.n(), risk);
  rep.conclusions.push_back(conclude_le("TV_pi(s_theta) <= lambda_max m / 4 + sqrt(R_n)/2 + boundary term", tv,
                                        top.value * md / 4.0 + tail, popt.tol * std::abs(top.value) * md / 4.0));
  if (eta) {
    auto stable = conclude_le("TV_pi(s_theta) <= 1/(2 eta) + sqrt(R_n)/2 + boundary term", tv, 1.0 / (2.0 * *eta) + tail);
    stable.conditions.push_back(check_le("lambda_max <= 2/(m eta)", top.value, 2.0 / (md * *eta)));
    rep.conclusions.push_back(stable);
  }
  rep.notes.push_back("lambda_max = " + std::to_string(top.value) + ", R_n(theta) = " + std::to_string(risk));
  return rep;
}

/// TV_pi(s_theta) >= mu n^2 Delta / (2^11 sigma^2) when Delta >= 8 sigma / mu and R_n(theta) <= 1/(16 n sigma^2).
inline BoundReport verify_prop7(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl) {
  net.require_theory("verify_prop7");
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_prop7 needs n >= 2");
  BoundReport rep;
  rep.name = "prop7";
  rep.instance = detail::describe(net, ds, nl);
  const double nd = static_cast<double>(ds.n());
  const double s2 = nl.sigma * nl.sigma;
  const double risk = risk_exact(net, ds, nl).value;
  rep.premises.push_back(small_noise_condition(ds, nl).spacing_8);
  rep.premises.push_back(check_le("R_n(theta) <= 1/(16 n sigma^2)", risk, 1.0 / (16.0 * nd * s2)));
  rep.premises.push_back(detail::n_at_least_10(ds));
  const double tv = tv_of_net(net, PiEvaluator(ds, nl, 0)).value;
  rep.conclusions.push_back(
      conclude_ge("TV_pi(s_theta) >= mu n^2 Delta / (2^11 sigma^2)", tv, nl.mu * nd * nd * ds.delta() / (2048.0 * s2)));
  return rep;
}

/// pi bounds: min over [mu x_i, mu x_{i+1}] of pi against the lower bound, and
/// pi <= mu (x_n - x_1) everywhere. The minimum is taken over `grid` points per
/// interval with the closed-form pi. The printed constant is informational.
inline BoundReport verify_prop10(const Dataset& ds, const NoiseLevel& nl, std::size_t grid = 64) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_prop10 needs n >= 2");
  require(grid >= 2, ErrorCode::InvalidArgument, "grid must have at least 2 points");
  BoundReport rep;
  rep.name = "prop10";
  rep.instance = detail::describe(ds, nl);
  const PiEvaluator pi(ds, nl, 0);
  const double err = 64.0 * detail::kEps * pi.pi_upper_bound();
  std::vector<Conclusion> lower, stated;
  double sup = 0.0;
  for (std::size_t i = 0; i + 1 < ds.n(); ++i) {
    const double a = nl.mu * ds[i], b = nl.mu * ds[i + 1];
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid; ++k) {
      const double v = pi.pi(a + (b - a) * static_cast<double>(k) / static_cast<double>(grid - 1));
      lo = std::min(lo, v);
      sup = std::max(sup, v);
    }
    const std::string tag = ", tightest i=" + std::to_string(i + 1);
    lower.push_back(conclude_ge("min pi on [mu x_i, mu x_{i+1}] >= lower bound" + tag, lo, pi.pi_lower_bound(i + 1), err));
    stated.push_back(conclude_ge("min pi on [mu x_i, mu x_{i+1}] >= lower bound, printed constant" + tag, lo,
                                 pi.pi_lower_bound_as_stated(i + 1), err));
  }
  rep.conclusions.push_back(detail::tightest(std::move(lower)));
  auto printed = detail::tightest(std::move(stated));
  printed.informational = true;
  rep.conclusions.push_back(printed);
  rep.conclusions.push_back(conclude_le("sup pi <= mu (x_n - x_1)", sup, pi.pi_upper_bound(), err));
  return rep;
}

inline BoundReport verify_prop11(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl, const PowerOptions& popt = {}) {
  auto rep = ntk_tv_lower_bound_check(net, ds, nl, popt);
  rep.name = "prop11";
  rep.instance = detail::describe(net, ds, nl);
  return rep;
}

/// Checkable sub-conditions standing in for sigma <= sigma_0, each as used by the proof.
inline std::vector<Premise> thm9_sigma_conditions(const Dataset& ds, const NoiseLevel& nl, double A) {
  const double nd = static_cast<double>(ds.n());
  const double mu = nl.mu, s = nl.sigma, s2 = s * s, d = ds.delta(), w = ds.span_width();
  const double sqrt_e = std::exp(0.5);
  const double r_star = std::numbers::pi * std::pow(nd, 5) * std::pow(mu, 3) * d * d * d /
                        (std::ldexp(1.0, 35) * sqrt_e * std::pow(A, 4) * s2 * s2);
  return {
      check_le("sigma <= mu Delta / 8", s, mu * d / 8.0),
      check_le("exp(-mu^2 Delta^2 / (32 sigma^2)) <= pi n^5 mu / (2^38 e^(1/2) (x_n - x_1)^2 A^4)",
               detail::spacing_exp(ds, nl, 32.0), std::numbers::pi * std::pow(nd, 5) * mu / (std::ldexp(1.0, 38) * sqrt_e * w * w * std::pow(A, 4))),
      check_le("sigma <= 1/n", s, 1.0 / nd),
      check_le("R* <= 1/(16 n sigma^2), R* = pi n^5 mu^3 Delta^3 / (2^35 e^(1/2) A^4 sigma^4)", r_star, 1.0 / (16.0 * nd * s2)),
      check_le("1/(16 n sigma^2) <= (pi e / 4) A^2 sigma^2 / n", 1.0 / (16.0 * nd * s2),
               std::numbers::pi * std::numbers::e / 4.0 * A * A * s2 / nd),
      check_le("sqrt(R*)/2 <= mu n^2 Delta / (2^13 sigma^2)", std::sqrt(r_star) / 2.0, mu * nd * nd * d / (8192.0 * s2)),
  };
}

/// Excess risk > pi n^5 mu^3 Delta^3 / (2^36 e^(1/2) A^4 sigma^4) for a net with
/// lambda_max <= 2/(m eta), eta > 2^12 sigma^2 / (mu n^2 Delta), and sigma small
/// in the sense of thm9_sigma_conditions. Local minimality is not needed by the
/// chain of inequalities and is not checked.
inline BoundReport verify_thm9(const TwoLayerNet& net, const Dataset& ds, const NoiseLevel& nl, double eta,
                               std::size_t mc = 2000, std::uint64_t seed = 11, const PowerOptions& popt = {}) {
  net.require_theory("verify_thm9");
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "verify_thm9 needs n >= 2");
  require(eta > 0.0, ErrorCode::InvalidArgument, "eta must be > 0");
  BoundReport rep;
  rep.name = "thm9";
  rep.instance = detail::describe(net, ds, nl) + " eta=" + std::to_string(eta);
  const double nd = static_cast<double>(ds.n()), md = static_cast<double>(net.width());
  const double A = net.clip();
  const double s2 = nl.sigma * nl.sigma;
  rep.premises = prop6_premises(net, nl);
  for (auto& p : thm9_sigma_conditions(ds, nl, A)) rep.premises.push_back(std::move(p));
  rep.premises.push_back(detail::n_at_least_10(ds));
  rep.premises.push_back(check_ge("eta > 2^12 sigma^2 / (mu n^2 Delta)", eta, 4096.0 * s2 / (nl.mu * nd * nd * ds.delta())));
  rep.premises.back().holds = eta > rep.premises.back().rhs;

  const double rhs = std::numbers::pi * std::pow(nd, 5) * std::pow(nl.mu, 3) * std::pow(ds.delta(), 3) /
                     (std::ldexp(1.0, 36) * std::exp(0.5) * std::pow(A, 4) * s2 * s2);
  if (!all_hold(rep.premises)) {
    rep.conclusions.push_back(conclude_ge("R_n(theta) - R_n(s*) > pi n^5 mu^3 Delta^3 / (2^36 e^(1/2) A^4 sigma^4)", 0.0, rhs));
    rep.notes.push_back("premises fail; Hessian and excess risk not evaluated");
    return rep;
  }
  const HessianOperator H(net, ds, nl);
  const auto top = detail::hessian_lambda_max(H, popt);
  rep.premises.push_back(check_le("lambda_max <= 2/(m eta) (necessary condition for linear stability)", top.value, 2.0 / (md * eta)));
  const auto sstar = risk_of_sstar(ds, nl, std::max<std::size_t>(mc, 100), seed);
  const double excess = H.engine().risk() - sstar.estimate;
  auto c = conclude_ge("R_n(theta) - R_n(s*) > pi n^5 mu^3 Delta^3 / (2^36 e^(1/2) A^4 sigma^4)", excess, rhs,
                       4.0 * sstar.standard_error);
  c.check.holds = excess > rhs;
  rep.conclusions.push_back(c);
  rep.notes.push_back("sigma_0 has no closed form; the proof's sub-conditions are checked instead");
  return rep;
}

/// Pass/vacuous/fail tallies over a batch of reports.
struct BoundSummary {
  std::size_t holds = 0, holds_within_error = 0, vacuous = 0, fails = 0;
};

inline BoundSummary summarize(const std::vector<BoundReport>& reports) {
  BoundSummary s;
  for (const auto& r : reports) switch (r.verdict()) {
      case Verdict::Holds: ++s.holds; break;
      case Verdict::HoldsWithinError: ++s.holds_within_error; break;
      case Verdict::Vacuous: ++s.vacuous; break;
      case Verdict::Fails: ++s.fails; break;
    }
  return s;
}

}  // namespace dsm
