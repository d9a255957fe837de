#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/empirical_score.hpp"
#include "dsm/net.hpp"
#include "dsm/noise_schedule.hpp"
#include "dsm/weight_pi.hpp"

namespace dsm {

enum class TvMethod { Quadrature, KinkSum };

inline const char* to_string(TvMethod m) { return m == TvMethod::Quadrature ? "quadrature" : "kink-sum"; }

struct TvReport {
  double value = 0.0;
  // pi vanishes outside [mu x_1, mu x_n], so truncating the integral there costs nothing.
  double truncation_error_bound = 0.0;
  TvMethod method = TvMethod::Quadrature;
  std::size_t evaluations = 0;
};

struct TvOptions {
  double rel_tol = 1e-4;
  int pi_order = 0;        // 0 selects the closed-form pi, > 0 a Hermite order
  int max_depth = 40;
};

namespace detail {

template <class F>
struct AdaptiveSimpson {
  F& f;
  double abs_tol;
  int max_depth;
  std::size_t evals = 0;
  bool stalled = false;

  double simpson(double a, double fa, double, double fm, double b, double fb) const {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  double refine(double a, double fa, double m, double fm, double b, double fb, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    evals += 2;
    const double left = simpson(a, fa, lm, flm, m, fm);
    const double right = simpson(m, fm, rm, frm, b, fb);
    const double diff = left + right - whole;
    if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    if (depth >= max_depth) {
      stalled = true;
      return left + right + diff / 15.0;
    }
    return refine(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1) +
           refine(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1);
  }

  double integrate(double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    evals += 3;
    return refine(a, fa, m, fm, b, fb, simpson(a, fa, m, fm, b, fb), tol, 0);
  }
};

}  // namespace detail

/// TV_pi(s*) = integral of |s*''| pi over [mu x_1, mu x_n].
///
/// On [mu x_i, mu x_{i+1}] the integrand is concentrated around the midpoint in a
/// window of width sigma^2 / (mu (x_{i+1} - x_i)), so each interval is cut at the
/// midpoint +- that width times 1, 2, 4, ... before adaptive Simpson runs. A
/// coarse pass sets the absolute tolerance rel_tol * (coarse total).
inline TvReport tv_of_sstar(const Dataset& ds, const NoiseLevel& nl, const TvOptions& opt = {}) {
  require(ds.n() >= 2, ErrorCode::InvalidArgument, "tv_of_sstar needs n >= 2");
  const PiEvaluator pi(ds, nl, opt.pi_order);
  auto f = [&](double y) { return std::abs(s_star_d2(ds, nl, y)) * pi.pi(y); };

  std::vector<std::vector<double>> cuts(ds.n() - 1);
  for (std::size_t i = 0; i + 1 < ds.n(); ++i) {
    const double a = nl.mu * ds[i], b = nl.mu * ds[i + 1];
    const double mid = 0.5 * (a + b);
    const double w = nl.sigma * nl.sigma / (b - a);
    std::vector<double> left, right;
    for (double h = w; mid - h > a; h *= 2.0) left.push_back(mid - h);
    for (double h = w; mid + h < b; h *= 2.0) right.push_back(mid + h);
    auto& c = cuts[i];
    c.push_back(a);
    c.insert(c.end(), left.rbegin(), left.rend());
    c.push_back(mid);
    c.insert(c.end(), right.begin(), right.end());
    c.push_back(b);
  }

  // Coarse pass: plain Simpson on every piece.
  double coarse = 0.0;
  std::size_t evals = 0;
  for (const auto& c : cuts)
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      const double a = c[k], b = c[k + 1], m = 0.5 * (a + b);
      coarse += (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
      evals += 3;
    }

  TvReport rep;
  rep.method = TvMethod::Quadrature;
  if (coarse == 0.0) {
    rep.evaluations = evals;
    return rep;
  }
  std::size_t pieces = 0;
  for (const auto& c : cuts) pieces += c.size() - 1;
  detail::AdaptiveSimpson<decltype(f)> integ{f, 0.0, opt.max_depth};
  const double piece_tol = opt.rel_tol * coarse / static_cast<double>(pieces);
  double total = 0.0;
  for (const auto& c : cuts)
    for (std::size_t k = 0; k + 1 < c.size(); ++k) total += integ.integrate(c[k], c[k + 1], piece_tol);
  rep.value = total;
  rep.evaluations = evals + integ.evals;
  if (integ.stalled)
    throw Error(ErrorCode::NonConvergentQuadrature, "adaptive Simpson reached its depth limit", total);
  return rep;
}

/// TV_pi(s_theta) for a theory-mode net: (1/m) sum_l |w2_l| pi(tau_l).
inline TvReport tv_of_net(const TwoLayerNet& net, const PiEvaluator& pi) {
  TvReport rep;
  rep.method = TvMethod::KinkSum;
  for (const auto& k : net.kinks()) {
    if (k.jump == 0.0) continue;
    rep.value += std::abs(k.jump) * pi.pi(k.tau);
    ++rep.evaluations;
  }
  return rep;
}

}  // namespace dsm
