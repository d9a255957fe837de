#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

namespace dsm {

/// One checked inequality lhs <= rhs (or lhs >= rhs, as described).
struct Premise {
  std::string description;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline Premise check_le(std::string description, double lhs, double rhs) {
  return {std::move(description), lhs, rhs, lhs <= rhs};
}

inline Premise check_ge(std::string description, double lhs, double rhs) {
  return {std::move(description), lhs, rhs, lhs >= rhs};
}

inline bool all_hold(const std::vector<Premise>& ps) {
  for (const auto& p : ps)
    if (!p.holds) return false;
  return true;
}

enum class Verdict { Holds, HoldsWithinError, Vacuous, Fails };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::HoldsWithinError: return "holds-within-error";
    case Verdict::Vacuous: return "vacuous";
    case Verdict::Fails: return "fails";
  }
  return "?";
}

/// The conclusion of an inequality together with the uncertainty of its
/// estimated side. `error_bar` is an absolute half-width; closed-form sides use
/// a relative tolerance of 1e-9 on top of it.
struct Conclusion {
  Premise check;
  double error_bar = 0.0;
  bool greater = false;        // true when the claim is lhs >= rhs
  std::vector<Premise> conditions;  // extra premises for this conclusion only
  bool informational = false;  // reported, never gates the verdict

  bool applies() const { return all_hold(conditions); }
};

inline Conclusion conclude_le(std::string description, double lhs, double rhs, double error_bar = 0.0) {
  return {check_le(std::move(description), lhs, rhs), error_bar, false, {}, false};
}

inline Conclusion conclude_ge(std::string description, double lhs, double rhs, double error_bar = 0.0) {
  return {check_ge(std::move(description), lhs, rhs), error_bar, true, {}, false};
}

inline constexpr double kClosedFormRelTol = 1e-9;

struct BoundReport {
  std::string name;
  std::string instance;
  std::vector<Premise> premises;
  std::vector<Conclusion> conclusions;
  std::vector<std::string> notes;

  /// Vacuous when any premise fails or no gating conclusion applies; otherwise
  /// the worst verdict over the applicable conclusions.
  Verdict verdict() const {
    if (!all_hold(premises)) return Verdict::Vacuous;
    Verdict worst = Verdict::Vacuous;
    for (const auto& c : conclusions) {
      if (c.informational || !c.applies()) continue;
      if (worst == Verdict::Vacuous) worst = Verdict::Holds;
      if (c.check.holds) continue;
      const double slack = c.error_bar + kClosedFormRelTol * std::max(std::abs(c.check.lhs), std::abs(c.check.rhs));
      const double gap = c.greater ? c.check.rhs - c.check.lhs : c.check.lhs - c.check.rhs;
      if (gap <= slack)
        worst = Verdict::HoldsWithinError;
      else
        return Verdict::Fails;
    }
    return worst;
  }

  bool failed() const { return verdict() == Verdict::Fails; }
};

inline nlohmann::json to_json(const Premise& p) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(std::to_string(x)); };
  return {{"description", p.description}, {"lhs", num(p.lhs)}, {"rhs", num(p.rhs)}, {"holds", p.holds}};
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["instance"] = r.instance;
  j["verdict"] = to_string(r.verdict());
  j["premises"] = nlohmann::json::array();
  for (const auto& p : r.premises) j["premises"].push_back(to_json(p));
  j["conclusions"] = nlohmann::json::array();
  for (const auto& c : r.conclusions) {
    auto cj = to_json(c.check);
    cj["error_bar"] = c.error_bar;
    cj["applies"] = c.applies();
    cj["informational"] = c.informational;
    if (!c.conditions.empty()) {
      cj["conditions"] = nlohmann::json::array();
      for (const auto& p : c.conditions) cj["conditions"].push_back(to_json(p));
    }
    j["conclusions"].push_back(cj);
  }
  j["notes"] = r.notes;
  return j;
}

}  // namespace dsm
