#include "mpct/error.hpp"

namespace mpct {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotControllable: return "NotControllable";
    case ErrorCode::DegenerateNullSpace: return "DegenerateNullSpace";
    case ErrorCode::ProjectionDimTooHigh: return "ProjectionDimTooHigh";
    case ErrorCode::EmptyReachableSet: return "EmptyReachableSet";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::SolverError: return "SolverError";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::NonConvex: return "NonConvex";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoEquilibrium: return "NoEquilibrium";
    case ErrorCode::SingularH: return "SingularH";
    case ErrorCode::RegulationInfeasible: return "RegulationInfeasible";
  }
  return "Unknown";
}

}  // namespace mpct
