#pragma once

#include <variant>
#include <vector>

#include "covsteer/symmat.hpp"

namespace covsteer {

/// A(t) or B(t): either constant, or samples on a uniform time grid with
/// linear interpolation in between (clamped outside the sampled range).
class MatrixFunction {
 public:
  MatrixFunction() = default;

  static MatrixFunction constant(Matrix value);
  static MatrixFunction sampled(std::vector<double> times, std::vector<Matrix> values);

  [[nodiscard]] Matrix at(double t) const;
  [[nodiscard]] Eigen::Index rows() const noexcept { return values_.empty() ? 0 : values_.front().rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values_.empty() ? 0 : values_.front().cols(); }
  [[nodiscard]] bool is_constant() const noexcept { return times_.empty(); }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] const std::vector<Matrix>& values() const noexcept { return values_; }

 private:
  std::vector<double> times_;
  std::vector<Matrix> values_;
};

struct FullStateTarget {
  SpdMatrix sigma;
};

struct OutputTarget {
  SpdMatrix sigma;
};

using Target = std::variant<FullStateTarget, OutputTarget>;

/// Linear Gauss-Markov model dx = A x dt + B u dt + B dw, x(0) ~ N(0, sigma0),
/// output y = C x, and the terminal covariance to reach.
struct ModelSpec {
  MatrixFunction a;
  MatrixFunction b;
  Matrix c;
  double horizon = 1.0;
  SpdMatrix sigma0;
  Target target;

  [[nodiscard]] Eigen::Index n() const noexcept { return a.rows(); }
  [[nodiscard]] Eigen::Index m() const noexcept { return b.cols(); }
  [[nodiscard]] Eigen::Index p() const noexcept { return c.rows(); }
  [[nodiscard]] bool output_target() const noexcept { return std::holds_alternative<OutputTarget>(target); }
  [[nodiscard]] const SpdMatrix& target_sigma() const;

  /// Dimension, rank and horizon checks. Throws DimensionMismatch or RankDeficient.
  void validate() const;
};

/// Harmonically bound Brownian particle with unit stiffness and friction,
/// momentum variance steered from 1/2 to 1/16 on [0, 1].
[[nodiscard]] ModelSpec make_ou_example();

class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  [[nodiscard]] double horizon() const noexcept { return horizon_; }
  [[nodiscard]] int steps() const noexcept { return steps_; }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(steps_) + 1; }
  [[nodiscard]] double spacing() const noexcept { return horizon_ / steps_; }
  [[nodiscard]] double node(std::size_t k) const noexcept {
    return k == static_cast<std::size_t>(steps_) ? horizon_ : horizon_ * static_cast<double>(k) / steps_;
  }

 private:
  double horizon_;
  int steps_;
};

inline constexpr int kDefaultSteps = 1000;
inline constexpr double kCtrlTol = 1e-10;

/// Second-order statistics of the uncontrolled model on a grid, together with
/// the prior joint covariance S of (x(0), x(T)) and the blocks of its inverse
///   S^{-1} = [ N  V ; V'  P ].
struct PriorMoments {
  TimeGrid grid{1.0, 2};
  std::vector<Matrix> phi_from0;   // Phi(t_k, 0)
  std::vector<Matrix> phi_to_end;  // Phi(T, t_k)
  std::vector<Matrix> gram_from0;  // M_{0, t_k}
  std::vector<Matrix> gram_to_end; // M_{t_k, T}
  SpdMatrix sigma0;
  Matrix joint;  // S; SPD iff M_{0,T} is nonsingular
  // Inverse blocks are NaN when the model is not controllable.
  Matrix n_blk;
  Matrix v_blk;
  Matrix p_blk;

  [[nodiscard]] const Matrix& phi() const { return phi_from0.back(); }
  [[nodiscard]] const Matrix& gramian() const { return gram_from0.back(); }
  /// S_T = Phi(T,0) sigma0 Phi(T,0)' + M_{0,T}
  [[nodiscard]] Matrix terminal_cov() const;
};

/// Integrates the transition matrices and Gramians with classical RK4 on the
/// grid (forward for Phi(t,0) and M_{0,t}, backward for Phi(T,t) and M_{t,T}).
[[nodiscard]] PriorMoments compute_prior_moments(const ModelSpec& spec, const TimeGrid& grid);

/// lambda_min / lambda_max of M_{0,T}.
[[nodiscard]] double controllability_ratio(const PriorMoments& moments);

/// Throws NotControllable when controllability_ratio <= kCtrlTol.
void assert_controllable(const PriorMoments& moments);

}  // namespace covsteer
