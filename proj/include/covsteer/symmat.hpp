#pragma once

#include <Eigen/Dense>

namespace covsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymTol = 1e-9;
inline constexpr double kSpdTol = 1e-10;

/// Dense symmetric matrix. Construction stores (M + M')/2 and rejects inputs
/// whose asymmetry exceeds kSymTol * (1 + max|M|).
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix zero(Eigen::Index dim);

  [[nodiscard]] Eigen::Index dim() const noexcept { return m_.rows(); }
  [[nodiscard]] const Matrix& mat() const noexcept { return m_; }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 protected:
  struct Trusted {};
  SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
};

/// Symmetric positive definite matrix: smallest eigenvalue above
/// -kSpdTol * largest and a successful Cholesky factorization.
class SpdMatrix : public SymMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& m);
  explicit SpdMatrix(const SymMatrix& s);

  static SpdMatrix identity(Eigen::Index dim);
};

[[nodiscard]] Matrix symmetrize(const Matrix& m);

/// True when `m` (after symmetrization) passes the SpdMatrix checks.
[[nodiscard]] bool is_spd(const Matrix& m);

/// Principal square root via symmetric eigendecomposition.
[[nodiscard]] SpdMatrix sym_sqrt(const SpdMatrix& s);

/// Inverse principal square root.
[[nodiscard]] SpdMatrix sym_inv_sqrt(const SpdMatrix& s);

[[nodiscard]] SpdMatrix spd_inverse(const SpdMatrix& s);

/// log det from the Cholesky factor.
[[nodiscard]] double log_det(const SpdMatrix& s);

struct QuadraticRoots {
  SpdMatrix positive;
  SymMatrix negative;
};

/// Both symmetric roots of Z + Z H Z = R:
///   Z± = H^{-1/2} [ ±(I/4 + H^{1/2} R H^{1/2})^{1/2} - I/2 ] H^{-1/2}.
[[nodiscard]] QuadraticRoots quadratic_roots(const SpdMatrix& h, const SpdMatrix& r);

/// The positive definite root of Z + Z H Z = R, evaluated in a form that
/// never inverts H.
[[nodiscard]] SpdMatrix quadratic_solve(const SpdMatrix& h, const SpdMatrix& r);

/// KL( N(0, sigma) || N(0, s) ) = 1/2 [tr(s^{-1} sigma) - d + ln det s - ln det sigma].
[[nodiscard]] double kl_gaussian(const SpdMatrix& sigma, const SpdMatrix& s);

/// Frobenius norm of a - b divided by (1 + ||ref||_F).
[[nodiscard]] double rel_residual(const Matrix& a, const Matrix& b, const Matrix& ref);

}  // namespace covsteer
