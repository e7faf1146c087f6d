#pragma once

#include "covsteer/model.hpp"
#include "covsteer/symmat.hpp"

namespace covsteer {

/// Change of state coordinates x = T x~ that brings C into the normal form
/// C T = [I_p | 0]. Columns are C'(CC')^{-1} followed by an orthonormal basis
/// of null(C), each null column signed so its first nonzero entry is positive.
struct OutputTransform {
  Matrix t;
  Matrix t_inv;
};

[[nodiscard]] OutputTransform output_transform(const Matrix& c);

/// Optimal endpoint statistics of the static relative-entropy problem, all in
/// the original state coordinates.
struct StaticSolution {
  SpdMatrix x;      // terminal state covariance
  Matrix y;         // Cov(x(0), x(T))
  SpdMatrix z;      // X - Y' Sigma0^{-1} Y
  SymMatrix mlag;   // multiplier of C X C' = Sigma_y (p x p; n x n for a state target)
  SpdMatrix joint;  // [Sigma0 Y; Y' X]
  double objective = 0.0;  // -ln det joint + tr(S^{-1} joint)
  double jpred = 0.0;      // 2 KL(joint || S), the minimum control energy
  double multiplier_asymmetry = 0.0;  // |M - M'| before symmetrization
};

/// -ln det(joint) + tr(S^{-1} joint).
[[nodiscard]] double static_objective(const SpdMatrix& joint, const SpdMatrix& s);

/// Closed-form solution when only C x(T) has a prescribed covariance.
[[nodiscard]] StaticSolution solve_output_bridge(const ModelSpec& spec, const PriorMoments& moments);

/// Closed-form solution when the whole terminal state covariance is given.
[[nodiscard]] StaticSolution solve_state_bridge(const ModelSpec& spec, const PriorMoments& moments);

/// Dispatches on the kind of target.
[[nodiscard]] StaticSolution solve_static(const ModelSpec& spec, const PriorMoments& moments);

struct OracleOptions {
  int max_iterations = 100000;
  double gradient_tol = 1e-9;  // Frobenius norm of the projected gradient
};

struct OracleResult {
  StaticSolution solution;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Descent on the same convex program over the affine set C X C' = Sigma_y:
/// X is re-projected onto the set after every step, directions are Newton
/// steps within the feasible subspace, and step lengths come from Armijo
/// backtracking halving from 1. Uses only the objective and its derivatives,
/// never the closed form.
[[nodiscard]] OracleResult oracle_minimize(const ModelSpec& spec, const PriorMoments& moments,
                                           const OracleOptions& options = {});

/// First-order optimality residuals of a static solution.
struct StaticResiduals {
  double stationarity_x = 0.0;  // ||P + C'MC - Z^{-1}|| / (1 + ||P||), normal-form coordinates
  double stationarity_y = 0.0;  // ||V + Sigma0^{-1} Y Z^{-1}|| / (1 + ||V||)
  double constraint = 0.0;      // ||C X C' - Sigma_y|| / (1 + ||Sigma_y||)
  double quadratic = 0.0;       // ||Z11 + Z11 A Z11 - Sigma_y|| / (1 + ||Sigma_y||)
  double multiplier_asymmetry = 0.0;
};

[[nodiscard]] StaticResiduals static_residuals(const ModelSpec& spec, const PriorMoments& moments,
                                               const StaticSolution& sol);

}  // namespace covsteer
