#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace dsm {

enum class ErrorCode {
  EmptyInput,
  DuplicatePoint,
  NonPositiveTime,
  InvalidArgument,
  IndexOutOfRange,
  NotTheoryMode,
  DimensionMismatch,
  NoConvergence,
  NonConvergentQuadrature,
  DivergenceDetected,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicatePoint: return "DuplicatePoint";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NotTheoryMode: return "NotTheoryMode";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonConvergentQuadrature: return "NonConvergentQuadrature";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Library exception. `code()` identifies the failure class; `partial()` carries
/// the last iterate / partial value for the iterative failures (NaN otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, double partial = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), partial_(partial) {}

  ErrorCode code() const noexcept { return code_; }
  double partial() const noexcept { return partial_; }

 private:
  ErrorCode code_;
  double partial_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace dsm
