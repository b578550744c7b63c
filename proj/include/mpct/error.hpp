#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpct {

enum class ErrorCode {
  DimensionMismatch,
  NotControllable,
  DegenerateNullSpace,
  ProjectionDimTooHigh,
  EmptyReachableSet,
  EmptySet,
  SolverError,
  MaxIterationsExceeded,
  NonConvex,
  NoConvergence,
  Unstable,
  ConfigError,
  NoEquilibrium,
  SingularH,
  RegulationInfeasible,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mpct
