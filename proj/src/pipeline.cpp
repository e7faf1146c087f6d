#include "covsteer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "covsteer/config.hpp"
#include "covsteer/error.hpp"

namespace covsteer {
namespace {

Check make_check(std::string name, double value, double tol) {
  const bool pass = std::isfinite(value) && value <= tol;
  return {std::move(name), value, tol, pass};
}

Matrix effective_c(const ModelSpec& spec) {
  return spec.output_target() ? spec.c : Matrix::Identity(spec.n(), spec.n());
}

}  // namespace

Matrix target_projection(const ModelSpec& spec, const Matrix& state_cov) {
  const Matrix c = effective_c(spec);
  return symmetrize(c * state_cov * c.transpose());
}

SolutionBundle solve_pipeline(const ModelSpec& spec, int steps) {
  spec.validate();
  SolutionBundle b;
  b.spec = spec;
  b.provenance.config_hash = config_hash(spec, steps);
  b.provenance.steps = steps;
  b.moments = compute_prior_moments(spec, TimeGrid(spec.horizon, steps));
  assert_controllable(b.moments);
  b.sol = solve_static(spec, b.moments);
  b.static_res = static_residuals(spec, b.moments, b.sol);
  b.pi_terminal = terminal_pi(b.sol, b.moments);
  b.gains = pi_schedule(spec, b.pi_terminal, b.moments);
  b.cov = propagate_closed_loop(spec, b.gains);
  b.energy = expected_energy(b.gains, b.cov, b.sol);
  if (b.cov.pmat) b.boundary = pq_boundary_residuals(b.gains, b.cov, spec, b.sol);
  b.riccati = riccati_residual(spec, b.gains);
  b.q_lyapunov = q_lyapunov_residual(spec, b.gains);
  return b;
}

std::vector<Check> verify_bundle(const SolutionBundle& bundle, const VerifyOptions& options) {
  const ModelSpec& spec = bundle.spec;
  std::vector<Check> checks;

  StaticSolution sol = bundle.sol;
  StaticResiduals sr = bundle.static_res;
  if (options.multiplier_perturbation != 0.0) {
    const auto p = sol.mlag.dim();
    sol.mlag = SymMatrix(sol.mlag.mat() + options.multiplier_perturbation * Matrix::Identity(p, p));
    sr = static_residuals(spec, bundle.moments, sol);
  }
  checks.push_back(make_check("stationarity_x", sr.stationarity_x, 1e-7));
  checks.push_back(make_check("stationarity_y", sr.stationarity_y, 1e-7));
  checks.push_back(make_check("terminal_constraint", sr.constraint, 1e-8));
  checks.push_back(make_check("quadratic_root", sr.quadratic, 1e-9));
  checks.push_back(make_check("multiplier_symmetry", sr.multiplier_asymmetry / (1.0 + sol.mlag.mat().norm()), 1e-7));

  const Matrix c = effective_c(spec);
  const Matrix pi_from_multiplier = c.transpose() * sol.mlag.mat() * c;
  checks.push_back(make_check("terminal_pi_vs_multiplier",
                              rel_residual(bundle.pi_terminal.mat(), pi_from_multiplier, pi_from_multiplier), 1e-6));

  if (bundle.boundary) {
    checks.push_back(make_check("boundary_initial", bundle.boundary->initial, 1e-5));
    checks.push_back(make_check("boundary_terminal", bundle.boundary->terminal, 1e-5));
    checks.push_back(make_check("lyapunov_p", bundle.boundary->lyapunov, 1e-5));
    checks.push_back(make_check("factorization", bundle.boundary->factorization, 1e-5));
  } else {
    checks.push_back({"boundary_initial", std::numeric_limits<double>::infinity(), 1e-5, false});
  }
  checks.push_back(make_check("riccati_pi", bundle.riccati, 1e-5));
  if (bundle.q_lyapunov) checks.push_back(make_check("lyapunov_q", *bundle.q_lyapunov, 1e-5));

  const Matrix& sigma_end = bundle.cov.sigma.back();
  checks.push_back(make_check("closed_loop_terminal", rel_residual(sigma_end, sol.x.mat(), sol.x.mat()), 1e-5));
  const Matrix& target = spec.target_sigma().mat();
  checks.push_back(make_check("closed_loop_target", rel_residual(target_projection(spec, sigma_end), target, target), 1e-5));
  checks.push_back(make_check("energy_consistency", bundle.energy.relgap, 1e-3));

  if (options.run_oracle) {
    try {
      const OracleResult oracle = oracle_minimize(spec, bundle.moments);
      checks.push_back(make_check("oracle_objective_gap", std::abs(oracle.solution.objective - sol.objective), 1e-6));
      checks.push_back(make_check("oracle_x_gap", (oracle.solution.x.mat() - sol.x.mat()).norm() / sol.x.mat().norm(), 1e-4));
    } catch (const Error& e) {
      checks.push_back({"oracle_objective_gap", std::numeric_limits<double>::infinity(), 1e-6, false});
    }
  }
  return checks;
}

}  // namespace covsteer

namespace covsteer {

SimulationSummary summarize_simulation(const SolutionBundle& bundle, const TrajectoryBatch& batch) {
  SimulationSummary s;
  s.paths = batch.paths();
  s.seed = batch.seed();
  s.empirical_terminal_cov = empirical_moments(batch, batch.nodes() - 1).cov;
  s.predicted_terminal_cov = bundle.sol.x.mat();
  s.empirical_target_cov = target_projection(bundle.spec, s.empirical_terminal_cov);
  s.target_cov = bundle.spec.target_sigma().mat();
  s.target_std_error = covariance_std_error(s.target_cov, s.paths);
  for (Eigen::Index i = 0; i < s.target_cov.rows(); ++i) {
    for (Eigen::Index j = i; j < s.target_cov.cols(); ++j) {
      const std::string name = "target_cov[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      const double diff = std::abs(s.empirical_target_cov(i, j) - s.target_cov(i, j));
      s.checks.push_back({name, diff, 3.0 * s.target_std_error(i, j), diff <= 3.0 * s.target_std_error(i, j)});
    }
  }
  s.energy = empirical_energy(batch);
  s.jdyn = bundle.energy.jdyn;
  const double ediff = std::abs(s.energy.mean - s.jdyn);
  s.checks.push_back({"energy", ediff, 3.0 * s.energy.std_error, ediff <= 3.0 * s.energy.std_error});
  s.pass = std::all_of(s.checks.begin(), s.checks.end(), [](const Check& c) { return c.pass; });
  return s;
}

}  // namespace covsteer
