#pragma once

#include <optional>
#include <vector>

#include "covsteer/model.hpp"
#include "covsteer/static_bridge.hpp"

namespace covsteer {

/// Feedback schedule u = K(t) x with K = -B' Pi. `pi_dot` holds the Riccati
/// right-hand side -A'Pi - Pi A + Pi B B' Pi at each node; it is used for
/// Hermite interpolation of Pi between nodes.
struct GainSchedule {
  TimeGrid grid{1.0, 2};
  std::vector<Matrix> pi;
  std::vector<Matrix> pi_dot;
  std::vector<Matrix> gain;

  /// Cubic Hermite interpolant of Pi inside [t_k, t_{k+1}].
  [[nodiscard]] Matrix pi_between(std::size_t k, double theta) const;
};

/// Closed-loop state covariance, plus the forward Lyapunov factor P(t) when
/// P(0) = (Sigma0^{-1} - Pi(0))^{-1} exists as an SPD matrix.
struct CovSchedule {
  TimeGrid grid{1.0, 2};
  std::vector<Matrix> sigma;
  std::optional<std::vector<Matrix>> pmat;
};

struct EnergyReport {
  double jdyn = 0.0;
  double jstatic = 0.0;
  double relgap = 0.0;
};

struct BoundaryResiduals {
  double initial = 0.0;        // ||Sigma0^{-1} - P(0)^{-1} - Pi(0)|| relative
  double terminal = 0.0;       // ||X^{-1} - P(T)^{-1} - Pi(T)|| relative
  double lyapunov = 0.0;       // max-node finite-difference residual of dP/dt = AP + PA' + BB'
  double factorization = 0.0;  // max-node ||Sigma^{-1} - P^{-1} - Pi|| relative
};

inline constexpr double kEnergyFloor = 1e-8;

/// Pi(T) = Z^{-1} - M_{0,T}^{-1}; equals C' Mlag C and has rank <= p.
[[nodiscard]] SymMatrix terminal_pi(const StaticSolution& sol, const PriorMoments& moments);

/// Pi(t) = Phi(T,t)' Pi_T (I + M_{t,T} Pi_T)^{-1} Phi(T,t) on the moment grid.
/// Never forms Q(T) = Pi_T^{-1}, which does not exist for output targets.
[[nodiscard]] GainSchedule pi_schedule(const ModelSpec& spec, const SymMatrix& pi_terminal,
                                       const PriorMoments& moments);

/// Max over interior nodes of ||dPi/dt + A'Pi + Pi A - Pi B B' Pi|| / (1 + ||Pi||^2),
/// with dPi/dt from a fourth-order central difference.
[[nodiscard]] double riccati_residual(const ModelSpec& spec, const GainSchedule& sched);

/// Same check for Q = Pi^{-1} against dQ/dt = AQ + QA' - BB', over nodes where
/// Pi is well conditioned. Empty when no such stencil exists, which is the
/// usual case for output targets: the flow keeps rank(Pi(t)) = rank(Pi_T).
[[nodiscard]] std::optional<double> q_lyapunov_residual(const ModelSpec& spec, const GainSchedule& sched);

/// RK4 integration of the closed-loop Lyapunov equation
///   dSigma/dt = (A - BB'Pi) Sigma + Sigma (A - BB'Pi)' + BB'
/// and of dP/dt = AP + PA' + BB'.
[[nodiscard]] CovSchedule propagate_closed_loop(const ModelSpec& spec, const GainSchedule& sched);

[[nodiscard]] BoundaryResiduals pq_boundary_residuals(const GainSchedule& sched, const CovSchedule& cov,
                                                      const ModelSpec& spec, const StaticSolution& sol);

/// Simpson quadrature of E|u|^2 = tr(K Sigma K') against the static prediction.
[[nodiscard]] EnergyReport expected_energy(const GainSchedule& sched, const CovSchedule& cov,
                                           const StaticSolution& sol);

/// Composite Simpson rule on a uniform grid (3/8 rule on the last three
/// intervals when the interval count is odd).
[[nodiscard]] double simpson(const std::vector<double>& values, double h);

}  // namespace covsteer
