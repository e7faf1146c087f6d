#include "covsteer/symmat.hpp"

#include <cmath>
#include <sstream>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << " must be square, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* what) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << what << ": dimensions " << a.dim() << " and " << b.dim() << " differ";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

// Returns the eigendecomposition of a matrix already known to be SPD.
Eigen::SelfAdjointEigenSolver<Matrix> spectral(const SpdMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.mat());
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "eigendecomposition did not converge");
  }
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::NotPositiveDefinite, "non-positive eigenvalue in square root");
  }
  return eig;
}

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SymMatrix::SymMatrix(const Matrix& m) {
  require_square(m, "symmetric matrix");
  const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!std::isfinite(asym) || asym > kSymTol * (1.0 + scale)) {
    std::ostringstream os;
    os << "matrix is not symmetric (max asymmetry " << asym << ")";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  m_ = symmetrize(m);
}

SymMatrix SymMatrix::identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim), Trusted{}); }

SymMatrix SymMatrix::zero(Eigen::Index dim) { return SymMatrix(Matrix::Zero(dim, dim), Trusted{}); }

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  const Matrix s = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) return false;
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (hi <= 0.0 || lo <= -kSpdTol * hi) return false;
  Eigen::LLT<Matrix> llt(s);
  return llt.info() == Eigen::Success;
}

SpdMatrix::SpdMatrix(const Matrix& m) : SpdMatrix(SymMatrix(m)) {}

SpdMatrix::SpdMatrix(const SymMatrix& s) : SymMatrix(s) {
  if (!is_spd(m_)) {
    throw Error(ErrorKind::NotPositiveDefinite, "matrix failed the positive definiteness check");
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) { return SpdMatrix(Matrix::Identity(dim, dim)); }

SpdMatrix sym_sqrt(const SpdMatrix& s) {
  const auto eig = spectral(s);
  const Matrix& u = eig.eigenvectors();
  return SpdMatrix(symmetrize(u * eig.eigenvalues().cwiseSqrt().asDiagonal() * u.transpose()));
}

SpdMatrix sym_inv_sqrt(const SpdMatrix& s) {
  const auto eig = spectral(s);
  const Matrix& u = eig.eigenvectors();
  return SpdMatrix(
      symmetrize(u * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose()));
}

SpdMatrix spd_inverse(const SpdMatrix& s) {
  Eigen::LLT<Matrix> llt(s.mat());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  }
  return SpdMatrix(symmetrize(llt.solve(Matrix::Identity(s.dim(), s.dim()))));
}

double log_det(const SpdMatrix& s) {
  Eigen::LLT<Matrix> llt(s.mat());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

QuadraticRoots quadratic_roots(const SpdMatrix& h, const SpdMatrix& r) {
  require_same_dim(h, r, "quadratic_solve");
  const auto n = h.dim();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix h_half = sym_sqrt(h).mat();
  const Matrix h_inv_half = sym_inv_sqrt(h).mat();
  const SpdMatrix inner(symmetrize(0.25 * id + h_half * r.mat() * h_half));
  const Matrix root = sym_sqrt(inner).mat();
  Matrix minus = symmetrize(h_inv_half * (-root - 0.5 * id) * h_inv_half);
  return {quadratic_solve(h, r), SymMatrix(minus)};
}

// Same root as H^{-1/2}[(I/4 + H^{1/2} R H^{1/2})^{1/2} - I/2]H^{-1/2}, written
// as Z = R^{1/2} U R^{1/2} with U = 2 (I + (I + 4 R^{1/2} H R^{1/2})^{1/2})^{-1}.
// No inverse of H appears, so small eigenvalues of H cost no accuracy.
SpdMatrix quadratic_solve(const SpdMatrix& h, const SpdMatrix& r) {
  require_same_dim(h, r, "quadratic_solve");
  const Matrix r_half = sym_sqrt(r).mat();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(r_half * h.mat() * r_half));
  const Vector g = eig.eigenvalues().cwiseMax(0.0);
  const Vector u = (2.0 / (1.0 + (1.0 + 4.0 * g.array()).sqrt())).matrix();
  const Matrix& q = eig.eigenvectors();
  const Matrix u_mat = q * u.asDiagonal() * q.transpose();
  return SpdMatrix(symmetrize(r_half * u_mat * r_half));
}

double kl_gaussian(const SpdMatrix& sigma, const SpdMatrix& s) {
  require_same_dim(sigma, s, "kl_gaussian");
  Eigen::LLT<Matrix> llt(s.mat());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "reference covariance is not SPD");
  }
  const double tr = llt.solve(sigma.mat()).trace();
  const auto d = static_cast<double>(sigma.dim());
  return 0.5 * (tr - d + log_det(s) - log_det(sigma));
}

double rel_residual(const Matrix& a, const Matrix& b, const Matrix& ref) {
  return (a - b).norm() / (1.0 + ref.norm());
}

}  // namespace covsteer
