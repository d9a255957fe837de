#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsm/error.hpp"

namespace dsm {

/// Flat `key = value` text with `[section]` headers; keys are addressed as
/// "section.key". `#` and `;` start comments. Every lookup records the value it
/// resolved to (including defaults), so `resolved()` and `run_hash()` describe
/// exactly what a run used.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>") {
    Config c;
    std::string line, section;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
      const std::string s = trim(strip_comment(line));
      if (s.empty()) continue;
      const std::string where = source + ":" + std::to_string(lineno);
      if (s.front() == '[') {
        if (s.back() != ']') throw Error(ErrorCode::ConfigError, where + ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) throw Error(ErrorCode::ConfigError, where + ": empty section name");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected key = value, got '" + s + "'");
      const std::string key = trim(s.substr(0, eq));
      if (key.empty()) throw Error(ErrorCode::ConfigError, where + ": missing key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (c.entries_.count(full)) throw Error(ErrorCode::ConfigError, where + ": duplicate key '" + full + "'");
      c.entries_[full] = {trim(s.substr(eq + 1)), where};
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
    return parse(in, path);
  }

  static Config from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  /// Command-line override "section.key=value"; replaces any file value.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "override '" + assignment + "' is not key=value");
    entries_[trim(assignment.substr(0, eq))] = {trim(assignment.substr(eq + 1)), "--set"};
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) {
    return record(key, lookup(key).value_or(def));
  }

  double get_double(const std::string& key, double def) {
    const auto raw = lookup(key);
    if (!raw) return record_num(key, def);
    return record_num(key, to_double(key, *raw));
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t def) {
    const auto raw = lookup(key);
    if (!raw) return record_uint(key, def);
    return record_uint(key, to_uint(key, *raw));
  }

  bool get_bool(const std::string& key, bool def) {
    const auto raw = lookup(key);
    bool v = def;
    if (raw) {
      if (*raw == "true" || *raw == "1" || *raw == "yes")
        v = true;
      else if (*raw == "false" || *raw == "0" || *raw == "no")
        v = false;
      else
        throw bad(key, "expected a boolean, got '" + *raw + "'");
    }
    record(key, v ? "true" : "false");
    return v;
  }

  /// Comma-separated list of reals.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) {
    const auto raw = lookup(key);
    std::vector<double> out;
    if (!raw) {
      out = def;
    } else {
      for (const auto& item : split(*raw)) out.push_back(to_double(key, item));
    }
    std::string canon;
    for (std::size_t k = 0; k < out.size(); ++k) canon += (k ? "," : "") + num(out[k]);
    record(key, canon);
    return out;
  }

  std::vector<std::uint64_t> get_uints(const std::string& key, const std::vector<std::uint64_t>& def) {
    const auto raw = lookup(key);
    std::vector<std::uint64_t> out;
    if (!raw) {
      out = def;
    } else {
      for (const auto& item : split(*raw)) out.push_back(to_uint(key, item));
    }
    std::string canon;
    for (std::size_t k = 0; k < out.size(); ++k) canon += (k ? "," : "") + std::to_string(out[k]);
    record(key, canon);
    return out;
  }

  /// Fails on keys the run never looked up (typos, misplaced sections).
  void reject_unknown() const {
    for (const auto& [key, e] : entries_)
      if (!resolved_.count(key)) throw Error(ErrorCode::ConfigError, e.where + ": unknown key '" + key + "'");
  }

  const std::map<std::string, std::string>& resolved() const { return resolved_; }

  /// Resolved configuration as "key = value" lines, sorted by key.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : resolved_) out += k + " = " + v + "\n";
    return out;
  }

  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  std::string run_hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = hex[h & 15];
    return out;
  }

  /// canonical() with every line prefixed by "# ", for CSV headers.
  std::string header_comment() const {
    std::string out = "# run_hash = " + run_hash() + "\n";
    for (const auto& [k, v] : resolved_) out += "# " + k + " = " + v + "\n";
    return out;
  }

 private:
  struct Entry {
    std::string value;
    std::string where;
  };

  static std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  // Shortest round-trip decimal form, so the hash does not depend on how a value was spelled.
  static std::string num(double x) {
    std::string out;
    for (int p = 1; p <= 17; ++p) {
      std::ostringstream t;
      t.precision(p);
      t << x;
      out = t.str();
      if (std::stod(out) == x) break;
    }
    return out;
  }

  std::optional<std::string> lookup(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  Error bad(const std::string& key, const std::string& msg) const {
    const auto it = entries_.find(key);
    const std::string where = it == entries_.end() ? std::string("<default>") : it->second.where;
    return Error(ErrorCode::ConfigError, where + ": key '" + key + "': " + msg);
  }

  double to_double(const std::string& key, const std::string& raw) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(raw, &used);
    } catch (const std::exception&) {
      throw bad(key, "expected a number, got '" + raw + "'");
    }
    if (used != raw.size()) throw bad(key, "expected a number, got '" + raw + "'");
    return v;
  }

  std::uint64_t to_uint(const std::string& key, const std::string& raw) const {
    // Accept forms like 1e6 for epoch counts, but only exact non-negative integers.
    const double v = to_double(key, raw);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw bad(key, "expected a non-negative integer, got '" + raw + "'");
    return static_cast<std::uint64_t>(v);
  }

  const std::string& record(const std::string& key, const std::string& value) { return resolved_[key] = value; }
  double record_num(const std::string& key, double v) {
    record(key, num(v));
    return v;
  }
  std::uint64_t record_uint(const std::string& key, std::uint64_t v) {
    record(key, std::to_string(v));
    return v;
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace dsm
