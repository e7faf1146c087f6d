#include "covsteer/dyn_bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

constexpr double kSingularFlowRcond = 1e-12;
constexpr double kQConditionLimit = 1e6;

Matrix inverse_of(const Matrix& m) { return Eigen::PartialPivLU<Matrix>(m).inverse(); }

Matrix riccati_rhs(const Matrix& a, const Matrix& b, const Matrix& pi) {
  const Matrix bbt = b * b.transpose();
  return symmetrize(-a.transpose() * pi - pi * a + pi * bbt * pi);
}

// Fourth-order central difference of a node sequence at interior node k.
Matrix central_diff4(const std::vector<Matrix>& f, std::size_t k, double h) {
  return (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * h);
}

double condition(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m), Eigen::EigenvaluesOnly);
  const Vector abs_ev = eig.eigenvalues().cwiseAbs();
  const double lo = abs_ev.minCoeff();
  return lo > 0.0 ? abs_ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

template <typename Rhs>
Matrix rk4_step(const Rhs& f, double t, const Matrix& y, double h) {
  const Matrix k1 = f(t, y, 0.0);
  const Matrix k2 = f(t, y + 0.5 * h * k1, 0.5);
  const Matrix k3 = f(t, y + 0.5 * h * k2, 0.5);
  const Matrix k4 = f(t, y + h * k3, 1.0);
  return symmetrize(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace

Matrix GainSchedule::pi_between(std::size_t k, double theta) const {
  if (theta <= 0.0) return pi[k];
  if (theta >= 1.0) return pi[k + 1];
  const double h = grid.spacing();
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + theta;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * pi[k] + h10 * h * pi_dot[k] + h01 * pi[k + 1] + h11 * h * pi_dot[k + 1];
}

SymMatrix terminal_pi(const StaticSolution& sol, const PriorMoments& moments) {
  assert_controllable(moments);
  const Matrix gram_inv = inverse_of(moments.gramian());
  return SymMatrix(symmetrize(inverse_of(sol.z.mat()) - gram_inv));
}

GainSchedule pi_schedule(const ModelSpec& spec, const SymMatrix& pi_terminal, const PriorMoments& moments) {
  const auto n = spec.n();
  if (pi_terminal.dim() != n) {
    throw Error(ErrorKind::DimensionMismatch, "terminal Pi must be n x n");
  }
  const Matrix id = Matrix::Identity(n, n);
  const Matrix& pi_t = pi_terminal.mat();
  GainSchedule s;
  s.grid = moments.grid;
  const std::size_t nodes = s.grid.size();
  s.pi.resize(nodes);
  s.pi_dot.resize(nodes);
  s.gain.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const Matrix& psi = moments.phi_to_end[k];
    const Matrix flow = id + moments.gram_to_end[k] * pi_t;
    // Judged against the size of the terms being summed, so that a scalar
    // 1 + m pi that cancels to roundoff counts as singular.
    const double sv_min = Eigen::JacobiSVD<Matrix>(flow).singularValues().minCoeff();
    const double scale = 1.0 + moments.gram_to_end[k].norm() * pi_t.norm();
    Eigen::PartialPivLU<Matrix> lu(flow);
    if (!(sv_min > kSingularFlowRcond * scale)) {
      std::ostringstream os;
      os << "I + M_{t,T} Pi_T is singular at t = " << s.grid.node(k) << " (relative singular value "
         << sv_min / scale << ")";
      throw Error(ErrorKind::SingularFlow, os.str());
    }
    s.pi[k] = k + 1 == nodes ? pi_t : symmetrize(psi.transpose() * pi_t * lu.solve(psi));
    const double t = s.grid.node(k);
    const Matrix b = spec.b.at(t);
    s.pi_dot[k] = riccati_rhs(spec.a.at(t), b, s.pi[k]);
    s.gain[k] = -b.transpose() * s.pi[k];
  }
  return s;
}

double riccati_residual(const ModelSpec& spec, const GainSchedule& sched) {
  const double h = sched.grid.spacing();
  double worst = 0.0;
  for (std::size_t k = 2; k + 2 < sched.grid.size(); ++k) {
    const double t = sched.grid.node(k);
    const Matrix d = central_diff4(sched.pi, k, h);
    const Matrix rhs = riccati_rhs(spec.a.at(t), spec.b.at(t), sched.pi[k]);
    const double norm = sched.pi[k].norm();
    worst = std::max(worst, (d - rhs).norm() / (1.0 + norm * norm));
  }
  return worst;
}

std::optional<double> q_lyapunov_residual(const ModelSpec& spec, const GainSchedule& sched) {
  const std::size_t nodes = sched.grid.size();
  const double h = sched.grid.spacing();
  std::vector<bool> usable(nodes);
  std::vector<Matrix> q(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    usable[k] = condition(sched.pi[k]) < kQConditionLimit;
    if (usable[k]) q[k] = symmetrize(inverse_of(sched.pi[k]));
  }
  std::optional<double> worst;
  for (std::size_t k = 2; k + 2 < nodes; ++k) {
    if (!(usable[k - 2] && usable[k - 1] && usable[k] && usable[k + 1] && usable[k + 2])) continue;
    const double t = sched.grid.node(k);
    const Matrix a = spec.a.at(t);
    const Matrix b = spec.b.at(t);
    const Matrix rhs = a * q[k] + q[k] * a.transpose() - b * b.transpose();
    const double norm = q[k].norm();
    worst = std::max(worst.value_or(0.0), (central_diff4(q, k, h) - rhs).norm() / (1.0 + norm * norm));
  }
  return worst;
}

CovSchedule propagate_closed_loop(const ModelSpec& spec, const GainSchedule& sched) {
  const std::size_t nodes = sched.grid.size();
  const double h = sched.grid.spacing();
  CovSchedule out;
  out.grid = sched.grid;
  out.sigma.resize(nodes);
  out.sigma[0] = spec.sigma0.mat();

  std::size_t current = 0;
  auto closed_loop = [&](double t, const Matrix& sig, double theta) -> Matrix {
    const Matrix a = spec.a.at(t + theta * h);
    const Matrix b = spec.b.at(t + theta * h);
    const Matrix bbt = b * b.transpose();
    const Matrix acl = a - bbt * sched.pi_between(current, theta);
    return acl * sig + sig * acl.transpose() + bbt;
  };
  auto open_loop = [&](double t, const Matrix& pm, double theta) -> Matrix {
    const Matrix a = spec.a.at(t + theta * h);
    const Matrix b = spec.b.at(t + theta * h);
    return a * pm + pm * a.transpose() + b * b.transpose();
  };

  for (current = 0; current + 1 < nodes; ++current) {
    out.sigma[current + 1] = rk4_step(closed_loop, sched.grid.node(current), out.sigma[current], h);
    if (!out.sigma[current + 1].allFinite()) {
      throw Error(ErrorKind::IntegrationFailure, "closed-loop covariance became non-finite");
    }
  }

  const Matrix p0_inv = symmetrize(spd_inverse(spec.sigma0).mat() - sched.pi.front());
  if (is_spd(p0_inv)) {
    std::vector<Matrix> pm(nodes);
    pm[0] = spd_inverse(SpdMatrix(p0_inv)).mat();
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
      pm[k + 1] = rk4_step(open_loop, sched.grid.node(k), pm[k], h);
    }
    out.pmat = std::move(pm);
  }
  return out;
}

BoundaryResiduals pq_boundary_residuals(const GainSchedule& sched, const CovSchedule& cov, const ModelSpec& spec,
                                        const StaticSolution& sol) {
  if (!cov.pmat) {
    throw Error(ErrorKind::NotPositiveDefinite, "Sigma0^{-1} - Pi(0) is not positive definite");
  }
  const auto& pm = *cov.pmat;
  const std::size_t nodes = sched.grid.size();
  const double h = sched.grid.spacing();
  BoundaryResiduals r;

  const Matrix s0_inv = spd_inverse(spec.sigma0).mat();
  r.initial = rel_residual(s0_inv, inverse_of(pm.front()) + sched.pi.front(), s0_inv);
  const Matrix x_inv = spd_inverse(sol.x).mat();
  r.terminal = rel_residual(x_inv, inverse_of(pm.back()) + sched.pi.back(), x_inv);

  for (std::size_t k = 2; k + 2 < nodes; ++k) {
    const double t = sched.grid.node(k);
    const Matrix a = spec.a.at(t);
    const Matrix b = spec.b.at(t);
    const Matrix rhs = a * pm[k] + pm[k] * a.transpose() + b * b.transpose();
    r.lyapunov = std::max(r.lyapunov, rel_residual(central_diff4(pm, k, h), rhs, pm[k]));
  }
  for (std::size_t k = 0; k < nodes; ++k) {
    const Matrix sig_inv = inverse_of(cov.sigma[k]);
    r.factorization = std::max(r.factorization, rel_residual(sig_inv, inverse_of(pm[k]) + sched.pi[k], sig_inv));
  }
  return r;
}

double simpson(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  const std::size_t intervals = f.size() - 1;
  if (intervals == 1) return 0.5 * h * (f[0] + f[1]);
  const std::size_t even_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double sum = 0.0;
  for (std::size_t k = 0; k + 2 <= even_end; k += 2) {
    sum += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
  }
  if (even_end != intervals) {
    const std::size_t k = even_end;
    sum += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
  }
  return sum;
}

EnergyReport expected_energy(const GainSchedule& sched, const CovSchedule& cov, const StaticSolution& sol) {
  if (sched.grid.size() != cov.grid.size()) {
    throw Error(ErrorKind::DimensionMismatch, "gain and covariance schedules use different grids");
  }
  std::vector<double> power(sched.grid.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    const Matrix& gain = sched.gain[k];
    power[k] = (gain * cov.sigma[k] * gain.transpose()).trace();
  }
  EnergyReport e;
  e.jdyn = simpson(power, sched.grid.spacing());
  e.jstatic = sol.jpred;
  e.relgap = std::abs(e.jdyn - e.jstatic) / std::max(e.jstatic, kEnergyFloor);
  return e;
}

}  // namespace covsteer
