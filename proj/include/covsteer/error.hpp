#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covsteer {

enum class ErrorKind {
  DimensionMismatch,
  NotPositiveDefinite,
  NotControllable,
  RankDeficient,
  IntegrationFailure,
  SingularFlow,
  ConstraintInfeasible,
  NoConvergence,
  InsufficientPaths,
  ParseError,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

// Every failure in the library surfaces as this exception. what() always
// starts with the kind name so one-line diagnostics can be grepped.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace covsteer
