#pragma once

#include <optional>
#include <string>
#include <vector>

#include "covsteer/dyn_bridge.hpp"
#include "covsteer/model.hpp"
#include "covsteer/monte_carlo.hpp"
#include "covsteer/static_bridge.hpp"

namespace covsteer {

inline constexpr const char* kVersion = "0.1.0";

struct Provenance {
  std::string config_hash;
  int steps = kDefaultSteps;
  std::string version = kVersion;
};

/// Everything the solver produces for one model, ready to serialize.
struct SolutionBundle {
  ModelSpec spec;
  PriorMoments moments;
  StaticSolution sol;
  SymMatrix pi_terminal;
  GainSchedule gains;
  CovSchedule cov;
  EnergyReport energy;
  StaticResiduals static_res;
  std::optional<BoundaryResiduals> boundary;  // empty when Sigma0^{-1} - Pi(0) is not SPD
  double riccati = 0.0;
  std::optional<double> q_lyapunov;  // empty when Pi(t) is never invertible
  Provenance provenance;
};

/// moments -> controllability -> static solve -> Pi schedule -> closed loop -> energy.
[[nodiscard]] SolutionBundle solve_pipeline(const ModelSpec& spec, int steps = kDefaultSteps);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  bool run_oracle = true;
  /// Test hook: adds this multiple of the identity to the multiplier before
  /// the stationarity checks run.
  double multiplier_perturbation = 0.0;
};

/// Residual table covering stationarity, the terminal constraint, the
/// quadratic root, boundary conditions, Riccati/Lyapunov flows, energy
/// consistency and (optionally) the gap to the descent oracle.
[[nodiscard]] std::vector<Check> verify_bundle(const SolutionBundle& bundle, const VerifyOptions& options = {});

/// Covariance of C x(T) for an output target, of x(T) otherwise.
[[nodiscard]] Matrix target_projection(const ModelSpec& spec, const Matrix& state_cov);

/// Monte Carlo statistics compared with the solver's predictions. Each check
/// passes when the empirical value lies within three standard errors.
struct SimulationSummary {
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  Matrix empirical_terminal_cov;
  Matrix predicted_terminal_cov;
  Matrix empirical_target_cov;  // C Sigma_emp(T) C' (or Sigma_emp(T) for state targets)
  Matrix target_cov;
  Matrix target_std_error;
  MeanAndError energy;
  double jdyn = 0.0;
  std::vector<Check> checks;
  bool pass = false;
};

[[nodiscard]] SimulationSummary summarize_simulation(const SolutionBundle& bundle, const TrajectoryBatch& batch);

}  // namespace covsteer
