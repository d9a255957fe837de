#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dsm/error.hpp"
#include "dsm/rng.hpp"

namespace dsm {

/// Row-major sample matrix: one row per point.
using Samples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sorted one-dimensional training sample. Immutable after construction.
class Dataset {
 public:
  static Dataset from_points(std::span<const double> raw) {
    require(!raw.empty(), ErrorCode::EmptyInput, "dataset needs at least one point");
    std::vector<double> pts(raw.begin(), raw.end());
    for (double x : pts) require(std::isfinite(x), ErrorCode::InvalidArgument, "dataset points must be finite");
    std::sort(pts.begin(), pts.end());
    double delta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double gap = pts[i] - pts[i - 1];
      if (gap <= 0.0) {
        std::ostringstream os;
        os << std::setprecision(17) << "point " << pts[i] << " appears more than once";
        throw Error(ErrorCode::DuplicatePoint, os.str());
      }
      delta = std::min(delta, gap);
    }
    return Dataset(std::move(pts), delta);
  }

  static Dataset from_points(std::initializer_list<double> raw) {
    return from_points(std::span<const double>(raw.begin(), raw.size()));
  }

  const std::vector<double>& points() const { return points_; }
  std::size_t n() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double span_width() const { return points_.back() - points_.front(); }

  /// False when n == 1: the minimum spacing is undefined.
  bool has_delta() const { return points_.size() >= 2; }

  /// Minimum spacing between consecutive sorted points.
  double delta() const {
    require(has_delta(), ErrorCode::InvalidArgument, "minimum spacing needs n >= 2");
    return delta_;
  }

 private:
  Dataset(std::vector<double> pts, double delta) : points_(std::move(pts)), delta_(delta) {}

  std::vector<double> points_;
  double delta_;
};

/// n x dim draws from N(0, std^2 I); deterministic for a fixed seed.
inline Samples sample_gaussian(std::size_t n, std::size_t dim, double std_dev, std::uint64_t seed) {
  require(n >= 1 && dim >= 1, ErrorCode::InvalidArgument, "sample_gaussian needs n >= 1 and dim >= 1");
  require(std_dev > 0.0, ErrorCode::InvalidArgument, "sample_gaussian needs std > 0");
  Rng rng(seed);
  Samples out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = std_dev * rng.normal();
  return out;
}

/// Convenience: a sorted 1-D dataset of n standard-normal-scaled draws.
inline Dataset gaussian_dataset(std::size_t n, double std_dev, std::uint64_t seed) {
  Samples s = sample_gaussian(n, 1, std_dev, seed);
  return Dataset::from_points(std::span<const double>(s.data(), n));
}

// ---------------------------------------------------------------------------
// Plain-text and CSV persistence. Lines starting with '#' are comments.

inline Samples read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_allowed = true;  // a single column-name line before the data is skipped
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (std::exchange(header_allowed, false)) {
      const auto p = line.find_first_not_of(" \t");
      if (p != std::string::npos && std::isalpha(static_cast<unsigned char>(line[p])) &&
          line.compare(p, 3, "nan") != 0 && line.compare(p, 3, "inf") != 0)
        continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::DimensionMismatch, path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::EmptyInput, path + " holds no data rows");
  Samples out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
  return out;
}

inline void write_samples_csv(const std::string& path, const Samples& s, const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  if (!header_comment.empty()) {
    std::stringstream ss(header_comment);
    std::string line;
    while (std::getline(ss, line)) out << "# " << line << '\n';
  }
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) out << (c ? "," : "") << s(r, c);
    out << '\n';
  }
}

/// One value per line (the 1-D text format); also accepts a single-column CSV.
inline Dataset load_dataset(const std::string& path) {
  Samples s = read_samples_csv(path);
  require(s.cols() == 1, ErrorCode::DimensionMismatch, path + " is not one-dimensional");
  return Dataset::from_points(std::span<const double>(s.data(), static_cast<std::size_t>(s.rows())));
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  Samples s(static_cast<Eigen::Index>(ds.n()), 1);
  for (std::size_t i = 0; i < ds.n(); ++i) s(static_cast<Eigen::Index>(i), 0) = ds[i];
  write_samples_csv(path, s);
}

}  // namespace dsm
