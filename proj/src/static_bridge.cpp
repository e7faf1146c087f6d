#include "covsteer/static_bridge.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

constexpr double kConstraintTol = 1e-8;

Matrix inverse_of(const Matrix& m) {
  Eigen::PartialPivLU<Matrix> lu(m);
  return lu.inverse();
}

// Data of the static problem expressed in normal-form coordinates, where
// C~ = [I_p | 0]. Covariances transform by congruence with T^{-1}, precision
// blocks by congruence with T'.
struct NormalForm {
  OutputTransform tf;
  Eigen::Index p = 0;
  Matrix sigma0;
  Matrix v;
  Matrix p_blk;
  Matrix k;  // V' Sigma0 V
};

NormalForm to_normal_form(const PriorMoments& moments, const OutputTransform& tf, Eigen::Index p) {
  NormalForm nf;
  nf.tf = tf;
  nf.p = p;
  nf.sigma0 = symmetrize(tf.t_inv * moments.sigma0.mat() * tf.t_inv.transpose());
  nf.v = tf.t.transpose() * moments.v_blk * tf.t;
  nf.p_blk = symmetrize(tf.t.transpose() * moments.p_blk * tf.t);
  nf.k = symmetrize(nf.v.transpose() * nf.sigma0 * nf.v);
  return nf;
}

// Reduced matrix of the terminal quadratic, F K F' with F = [I, -P12 P22^{-1}].
Matrix reduced_quadratic_matrix(const NormalForm& nf) {
  const auto n = nf.p_blk.rows();
  const auto p = nf.p;
  if (p == n) return nf.k;
  const Matrix p12 = nf.p_blk.topRightCorner(p, n - p);
  const Matrix p22 = nf.p_blk.bottomRightCorner(n - p, n - p);
  Matrix f(p, n);
  f.leftCols(p) = Matrix::Identity(p, p);
  f.rightCols(n - p) = -p12 * Eigen::LDLT<Matrix>(p22).solve(Matrix::Identity(n - p, n - p));
  return symmetrize(f * nf.k * f.transpose());
}

StaticSolution assemble(const PriorMoments& moments, const Matrix& x, const Matrix& y, const Matrix& z,
                        const Matrix& mlag_raw) {
  const auto n = x.rows();
  StaticSolution sol;
  sol.x = SpdMatrix(symmetrize(x));
  sol.y = y;
  sol.z = SpdMatrix(symmetrize(z));
  sol.multiplier_asymmetry = (mlag_raw - mlag_raw.transpose()).norm();
  sol.mlag = SymMatrix(symmetrize(mlag_raw));
  Matrix joint(2 * n, 2 * n);
  joint << moments.sigma0.mat(), y, y.transpose(), sol.x.mat();
  sol.joint = SpdMatrix(symmetrize(joint));
  const SpdMatrix s(moments.joint);
  sol.objective = static_objective(sol.joint, s);
  sol.jpred = 2.0 * kl_gaussian(sol.joint, s);
  return sol;
}

void check_constraint(const Matrix& c, const Matrix& x, const Matrix& target) {
  const double r = rel_residual(c * x * c.transpose(), target, target);
  if (!(r <= kConstraintTol)) {
    std::ostringstream os;
    os << "C X C' misses the target by " << r << " (relative)";
    throw Error(ErrorKind::ConstraintInfeasible, os.str());
  }
}

}  // namespace

OutputTransform output_transform(const Matrix& c) {
  const auto p = c.rows();
  const auto n = c.cols();
  if (p == 0 || p > n) {
    throw Error(ErrorKind::RankDeficient, "C must have 1 <= p <= n rows");
  }
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  if (!(sv(p - 1) > 1e-12 * std::max(1.0, sv(0)))) {
    throw Error(ErrorKind::RankDeficient, "C does not have full row rank");
  }
  OutputTransform tf;
  tf.t.resize(n, n);
  const Matrix cct = c * c.transpose();
  tf.t.leftCols(p) = c.transpose() * Eigen::LDLT<Matrix>(cct).solve(Matrix::Identity(p, p));
  for (Eigen::Index j = p; j < n; ++j) {
    Vector col = svd.matrixV().col(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > 1e-12) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
    tf.t.col(j) = col;
  }
  tf.t_inv = inverse_of(tf.t);
  return tf;
}

double static_objective(const SpdMatrix& joint, const SpdMatrix& s) {
  if (joint.dim() != s.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "static_objective: joint and prior dimensions differ");
  }
  Eigen::LLT<Matrix> llt(s.mat());
  return -log_det(joint) + llt.solve(joint.mat()).trace();
}

StaticSolution solve_output_bridge(const ModelSpec& spec, const PriorMoments& moments) {
  if (!spec.output_target()) {
    throw Error(ErrorKind::DimensionMismatch, "solve_output_bridge needs an output target");
  }
  spec.validate();
  assert_controllable(moments);
  const auto n = spec.n();
  const auto p = spec.p();
  const Matrix& sigma_y = spec.target_sigma().mat();

  const NormalForm nf = to_normal_form(moments, output_transform(spec.c), p);
  const Matrix a_hat = reduced_quadratic_matrix(nf);
  const Matrix z11 = quadratic_solve(SpdMatrix(a_hat), spec.target_sigma()).mat();

  Matrix z(n, n);
  Matrix mlag_raw;
  if (p == n) {
    z = z11;
    mlag_raw = inverse_of(z) - nf.p_blk;
  } else {
    const Matrix p11 = nf.p_blk.topLeftCorner(p, p);
    const Matrix p12 = nf.p_blk.topRightCorner(p, n - p);
    const Matrix p21 = nf.p_blk.bottomLeftCorner(n - p, p);
    const Matrix p22 = nf.p_blk.bottomRightCorner(n - p, n - p);
    const Matrix p22_inv = symmetrize(Eigen::LDLT<Matrix>(p22).solve(Matrix::Identity(n - p, n - p)));
    const Matrix z21 = -p22_inv * p21 * z11;
    const Matrix z12 = z21.transpose();
    const Matrix z22 = p22_inv - z21 * p12 * p22_inv;
    z << z11, z12, z21, z22;
    z = symmetrize(z);
    mlag_raw = inverse_of(z11) * (Matrix::Identity(p, p) - z12 * p21) - p11;
  }
  const Matrix y_nf = -nf.sigma0 * nf.v * z;
  Matrix x_nf = z + z * nf.k * z;
  // Z11 + Z11 A^ Z11 = Sigma_y holds by construction of Z11, but evaluating
  // it through K loses about cond(K) * eps. The constrained block is pinned.
  x_nf.topLeftCorner(p, p) = sigma_y;

  const Matrix& t = nf.tf.t;
  const Matrix x = symmetrize(t * x_nf * t.transpose());
  const Matrix y = t * y_nf * t.transpose();
  const Matrix z_orig = symmetrize(t * z * t.transpose());
  check_constraint(spec.c, x, sigma_y);
  return assemble(moments, x, y, z_orig, mlag_raw);
}

StaticSolution solve_state_bridge(const ModelSpec& spec, const PriorMoments& moments) {
  if (spec.output_target()) {
    throw Error(ErrorKind::DimensionMismatch, "solve_state_bridge needs a full-state target");
  }
  spec.validate();
  assert_controllable(moments);
  const Matrix& sigma0 = moments.sigma0.mat();
  const Matrix& v = moments.v_blk;
  const SpdMatrix k(symmetrize(v.transpose() * sigma0 * v));
  const Matrix z = quadratic_solve(k, spec.target_sigma()).mat();
  const Matrix y = -sigma0 * v * z;
  const Matrix mlag_raw = inverse_of(z) - moments.p_blk;
  return assemble(moments, spec.target_sigma().mat(), y, z, mlag_raw);
}

StaticSolution solve_static(const ModelSpec& spec, const PriorMoments& moments) {
  return spec.output_target() ? solve_output_bridge(spec, moments) : solve_state_bridge(spec, moments);
}

OracleResult oracle_minimize(const ModelSpec& spec, const PriorMoments& moments, const OracleOptions& options) {
  spec.validate();
  assert_controllable(moments);
  const auto n = spec.n();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix c = spec.output_target() ? spec.c : id;
  const auto p = c.rows();
  const Matrix& target = spec.target_sigma().mat();
  const Matrix c_pinv = c.transpose() * (c * c.transpose()).ldlt().solve(Matrix::Identity(p, p));
  const Matrix row_proj = c_pinv * c;  // orthogonal projector onto the row space of C
  const Matrix& p_blk = moments.p_blk;
  const Matrix& v_blk = moments.v_blk;
  const Matrix s0_inv = spd_inverse(moments.sigma0).mat();

  auto project = [&](const Matrix& x_free) {
    return symmetrize(x_free + c_pinv * (target - c * x_free * c.transpose()) * c_pinv.transpose());
  };

  // Basis of the feasible directions: symmetric dX with C dX C' = 0 (written
  // with orthonormal bases W of row(C) and Q of null(C)), then every entry of dY.
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
  const Matrix w = svd.matrixV().leftCols(p);
  const Matrix q = svd.matrixV().rightCols(n - p);
  std::vector<Matrix> dirs_x;
  std::vector<Matrix> dirs_y;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < n - p; ++j) {
      const Matrix e = w.col(i) * q.col(j).transpose();
      dirs_x.push_back(e + e.transpose());
    }
  }
  for (Eigen::Index k = 0; k < n - p; ++k) {
    for (Eigen::Index l = k; l < n - p; ++l) {
      const Matrix e = q.col(k) * q.col(l).transpose();
      dirs_x.push_back(k == l ? Matrix(e) : Matrix(e + e.transpose()));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = 1.0;
      dirs_y.push_back(e);
    }
  }
  const auto nx = static_cast<Eigen::Index>(dirs_x.size());
  const auto dim = nx + static_cast<Eigen::Index>(dirs_y.size());
  const Matrix zero = Matrix::Zero(n, n);
  auto dir_x = [&](Eigen::Index i) -> const Matrix& { return i < nx ? dirs_x[i] : zero; };
  auto dir_y = [&](Eigen::Index i) -> const Matrix& { return i < nx ? zero : dirs_y[i - nx]; };

  const Matrix comp = id - row_proj;
  Matrix x = project(comp * moments.terminal_cov() * comp);
  Matrix y = Matrix::Zero(n, n);

  OracleResult result;
  for (int it = 0;; ++it) {
    const Matrix z = symmetrize(x - y.transpose() * s0_inv * y);
    Eigen::LLT<Matrix> llt(z);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::NotPositiveDefinite, "oracle iterate left the feasible set");
    }
    const Matrix z_inv = symmetrize(llt.solve(id));
    Matrix gx = symmetrize(p_blk - z_inv);
    gx = symmetrize(gx - row_proj * gx * row_proj);
    const Matrix gy = 2.0 * v_blk + 2.0 * s0_inv * y * z_inv;
    result.gradient_norm = std::sqrt(gx.squaredNorm() + gy.squaredNorm());
    result.iterations = it;
    if (result.gradient_norm < options.gradient_tol) break;
    if (it >= options.max_iterations) {
      std::ostringstream os;
      os << "projected descent stalled at |g| = " << result.gradient_norm << " after " << it << " iterations";
      throw Error(ErrorKind::NoConvergence, os.str());
    }

    // Gradient and Hessian of the objective in the feasible basis.
    Vector g(dim);
    std::vector<Matrix> zinv_dz(static_cast<std::size_t>(dim));
    std::vector<Matrix> s0inv_dy(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Matrix& dx = dir_x(i);
      const Matrix& dy = dir_y(i);
      g(i) = (gx.transpose() * dx).trace() + (gy.transpose() * dy).trace();
      const Matrix cross = dy.transpose() * s0_inv * y;
      zinv_dz[i] = z_inv * (dx - cross - cross.transpose());
      s0inv_dy[i] = s0_inv * dy;
    }
    Matrix hess(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = i; j < dim; ++j) {
        double h = (zinv_dz[i] * zinv_dz[j]).trace();
        if (i >= nx && j >= nx) h += 2.0 * (z_inv * dir_y(i).transpose() * s0inv_dy[j]).trace();
        hess(i, j) = h;
        hess(j, i) = h;
      }
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = -ldlt.solve(g);
    double slope = g.dot(step);
    if (ldlt.info() != Eigen::Success || !(slope < 0.0)) {
      step = -g;  // plain gradient step if the Hessian solve is unusable
      slope = -g.squaredNorm();
    }
    Matrix step_x = Matrix::Zero(n, n);
    Matrix step_y = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < dim; ++i) {
      step_x += step(i) * dir_x(i);
      step_y += step(i) * dir_y(i);
    }

    // Backtracking from a unit step. The objective change is evaluated in
    // incremental form so the Armijo test stays meaningful near roundoff of f.
    const Matrix l_inv = llt.matrixL().solve(id);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Matrix dx = alpha * step_x;
      const Matrix dy = alpha * step_y;
      const Matrix cross = dy.transpose() * s0_inv * y;
      const Matrix dz = symmetrize(dx - cross - cross.transpose() - dy.transpose() * s0_inv * dy);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(l_inv * dz * l_inv.transpose()), Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() <= -1.0) continue;
      double df = (p_blk * dx).trace() + 2.0 * (v_blk.transpose() * dy).trace();
      for (Eigen::Index i = 0; i < n; ++i) df -= std::log1p(eig.eigenvalues()(i));
      if (df <= 1e-4 * alpha * slope) {
        x = project(x + dx);
        y += dy;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "line search failed at |g| = " << result.gradient_norm;
      throw Error(ErrorKind::NoConvergence, os.str());
    }
  }

  const Matrix z = symmetrize(x - y.transpose() * s0_inv * y);
  const Matrix z_inv = inverse_of(z);
  const Matrix mlag = c_pinv.transpose() * (z_inv - p_blk) * c_pinv;
  result.solution = assemble(moments, x, y, z, mlag);
  return result;
}

StaticResiduals static_residuals(const ModelSpec& spec, const PriorMoments& moments, const StaticSolution& sol) {
  const auto n = spec.n();
  const bool output = spec.output_target();
  const Matrix c = output ? spec.c : Matrix::Identity(n, n);
  const auto p = c.rows();
  const Matrix& target = spec.target_sigma().mat();
  const OutputTransform tf = output ? output_transform(c) : OutputTransform{Matrix::Identity(n, n), Matrix::Identity(n, n)};
  const NormalForm nf = to_normal_form(moments, tf, p);

  StaticResiduals r;
  const Matrix z_nf = symmetrize(tf.t_inv * sol.z.mat() * tf.t_inv.transpose());
  Matrix c_nf = Matrix::Zero(p, n);
  c_nf.leftCols(p) = Matrix::Identity(p, p);
  const Matrix lhs = nf.p_blk + c_nf.transpose() * sol.mlag.mat() * c_nf;
  r.stationarity_x = rel_residual(lhs, inverse_of(z_nf), nf.p_blk);

  const Matrix s0_inv = spd_inverse(moments.sigma0).mat();
  r.stationarity_y = rel_residual(moments.v_blk, -s0_inv * sol.y * inverse_of(sol.z.mat()), moments.v_blk);
  r.constraint = rel_residual(c * sol.x.mat() * c.transpose(), target, target);

  const Matrix a_hat = reduced_quadratic_matrix(nf);
  const Matrix z11 = z_nf.topLeftCorner(p, p);
  r.quadratic = rel_residual(z11 + z11 * a_hat * z11, target, target);
  r.multiplier_asymmetry = sol.multiplier_asymmetry;
  return r;
}

}  // namespace covsteer
