#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvxorder {

enum class ErrorCode {
  invalid_argument,
  not_finite_support,
  growth_mismatch,
  hypothesis_unverifiable,
  backend_unavailable,
  out_of_range,
  grid_mismatch,
  index_out_of_range,
  config_error,
  domination_violated,
  bounds_uncertified,
  param_out_of_range,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::not_finite_support: return "NotFiniteSupport";
    case ErrorCode::growth_mismatch: return "GrowthMismatch";
    case ErrorCode::hypothesis_unverifiable: return "HypothesisUnverifiable";
    case ErrorCode::backend_unavailable: return "BackendUnavailable";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::grid_mismatch: return "GridMismatch";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::domination_violated: return "DominationViolated";
    case ErrorCode::bounds_uncertified: return "BoundsUncertified";
    case ErrorCode::param_out_of_range: return "ParamOutOfRange";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace cvxorder
