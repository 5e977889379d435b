#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reprl {

enum class ErrorKind {
  DimMismatch,
  NotPositiveDefinite,
  NonFiniteInput,
  InvalidArgument,
  EmptyDecisionSet,
  EmptyHistory,
  EmptyTrajectory,
  IndexOutOfRange,
  SingularSystem,
  UnsupportedForLinear,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyDecisionSet: return "EmptyDecisionSet";
    case ErrorKind::EmptyHistory: return "EmptyHistory";
    case ErrorKind::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::UnsupportedForLinear: return "UnsupportedForLinear";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace reprl
