#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shotmetric {

enum class ErrorKind {
  InvalidInput,       // violated precondition on a value or shape
  DimensionMismatch,  // feature dimensions disagree
  ParseError,         // malformed JSON/CSV
  AxisMismatch,       // paired grids with different shot axes
  ZeroNormVector,     // cosine head saw a (near) zero query or prototype
  ZeroSupport,        // support covariance has vanishing norm
  ZeroQuery,          // query covariance has vanishing norm
  DegenerateRatio,    // term-ratio denominator too small
  NumericalFailure,   // factorization failed on a system that should be SPD
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for the kinds that describe bad data rather than a numerical breakdown.
bool is_data_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::AxisMismatch: return "AxisMismatch";
    case ErrorKind::ZeroNormVector: return "ZeroNormVector";
    case ErrorKind::ZeroSupport: return "ZeroSupport";
    case ErrorKind::ZeroQuery: return "ZeroQuery";
    case ErrorKind::DegenerateRatio: return "DegenerateRatio";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

inline bool is_data_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ParseError:
    case ErrorKind::AxisMismatch:
      return true;
    default:
      return false;
  }
}

}  // namespace shotmetric
