#include "covsteer/error.hpp"

namespace covsteer {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotControllable: return "NotControllable";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::IntegrationFailure: return "IntegrationFailure";
    case ErrorKind::SingularFlow: return "SingularFlow";
    case ErrorKind::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::InsufficientPaths: return "InsufficientPaths";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace covsteer
