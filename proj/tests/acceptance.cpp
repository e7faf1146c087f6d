// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "covsteer/error.hpp"
#include "covsteer/pipeline.hpp"
#include "reference_values.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace covsteer;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s | %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<ModelSpec> random_instances() {
  std::mt19937_64 rng(20240501);
  std::vector<ModelSpec> out;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    const Eigen::Index p = 1 + (trial / 4) % n;
    out.push_back(testing::random_model(rng, n, p));
  }
  return out;
}

SolutionBundle state_bridge(const Matrix& x) {
  ModelSpec spec = make_ou_example();
  spec.c = Matrix::Identity(2, 2);
  spec.target = FullStateTarget{SpdMatrix(x)};
  return solve_pipeline(spec);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  std::vector<double> relgaps;  // criterion 7 collects these from 1-3

  try {
    // 1. Oscillator output steering.
    const auto start = std::chrono::steady_clock::now();
    const SolutionBundle ou = solve_pipeline(make_ou_example());
    SimConfig sim;
    sim.paths = 10000;
    sim.seed = 42;
    sim.store_every = 100;
    const TrajectoryBatch batch = simulate_paths(ou.spec, ou.gains, sim);
    const Matrix emp = empirical_moments(batch, batch.nodes() - 1).cov;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double cxc = ou.sol.x.mat()(1, 1);
    const double cxc_res = std::abs(cxc - 0.0625);
    const double cl_res = std::abs(ou.cov.sigma.back()(1, 1) - 0.0625) / 0.0625;
    const double band = 3.0 * 0.0625 * std::sqrt(2.0 / 9999.0);
    const double mc_dev = std::abs(emp(1, 1) - 0.0625);
    relgaps.push_back(ou.energy.relgap);
    report(1, "oscillator output steering",
           cxc_res < 1e-8 && cl_res <= 1e-5 && mc_dev <= band && seconds < 10.0,
           "|CXC'-1/16| " + fmt("%.2e", cxc_res) + ", closed loop rel " + fmt("%.2e", cl_res) +
               ", MC |Var p(1)-1/16| " + fmt("%.5f", mc_dev) + " <= " + fmt("%.5f", band) + ", " +
               fmt("%.2f", seconds) + " s");

    // 2. Scalar analytic instance.
    const SolutionBundle sc = solve_pipeline(testing::scalar_model());
    const double z = (std::sqrt(5.0) - 1.0) / 2.0;
    const double two_kl = ref::kScalarTwoKl;
    const double e_z = std::abs(sc.sol.z.mat()(0, 0) - z);
    const double e_y = std::abs(sc.sol.y(0, 0) - z);
    const double e_x = std::abs(sc.sol.x.mat()(0, 0) - 1.0);
    const double e_pi = std::abs(sc.gains.pi.front()(0, 0) - (3.0 - std::sqrt(5.0)) / 2.0);
    const double e_j = std::abs(sc.energy.jdyn - two_kl);
    relgaps.push_back(sc.energy.relgap);
    report(2, "scalar analytic instance",
           e_z <= 1e-9 && e_y <= 1e-9 && e_x <= 1e-9 && e_pi <= 1e-9 && e_j <= 1e-6,
           "Z/Y/X/Pi(0) errors " + fmt("%.1e", std::max({e_z, e_y, e_x, e_pi})) + ", Jdyn " +
               fmt("%.10f", sc.energy.jdyn) + " vs 2KL " + fmt("%.10f", two_kl));

    // 3. Oracle equivalence on seeded random instances.
    double worst_obj = 0.0;
    double worst_x = 0.0;
    for (const ModelSpec& spec : random_instances()) {
      const SolutionBundle b = solve_pipeline(spec);
      const OracleResult o = oracle_minimize(spec, b.moments);
      worst_obj = std::max(worst_obj, std::abs(o.solution.objective - b.sol.objective));
      worst_x = std::max(worst_x, (o.solution.x.mat() - b.sol.x.mat()).norm() / b.sol.x.mat().norm());
      relgaps.push_back(b.energy.relgap);
    }
    report(3, "oracle equivalence (20 random instances)", worst_obj <= 1e-6 && worst_x <= 1e-4,
           "max objective gap " + fmt("%.2e", worst_obj) + ", max X gap " + fmt("%.2e", worst_x));

    // 4. Zero-control fixed point.
    ModelSpec prior = make_ou_example();
    prior.c = Matrix::Identity(2, 2);
    prior.target = OutputTarget{prior.sigma0};  // placeholder with matching size
    prior.target = OutputTarget{SpdMatrix(compute_prior_moments(prior, TimeGrid(1.0, kDefaultSteps)).terminal_cov())};
    const SolutionBundle zero = solve_pipeline(prior);
    double max_gain = 0.0;
    for (const Matrix& k : zero.gains.gain) max_gain = std::max(max_gain, k.norm());
    report(4, "zero-control fixed point", max_gain <= 1e-8 && zero.energy.jdyn <= 1e-10,
           "max |K| " + fmt("%.2e", max_gain) + ", Jdyn " + fmt("%.2e", zero.energy.jdyn));

    // 5. Residual suite, including grid convergence of the terminal boundary
    // residual and of the Riccati residual.
    double stat = 0.0;
    double fd = 0.0;
    for (const SolutionBundle* b : {&ou, &sc}) {
      stat = std::max({stat, b->static_res.stationarity_x, b->static_res.stationarity_y, b->static_res.quadratic,
                       b->static_res.multiplier_asymmetry});
      fd = std::max({fd, b->riccati, b->boundary->lyapunov, b->q_lyapunov.value_or(0.0)});
    }
    const SolutionBundle ou2 = solve_pipeline(make_ou_example(), 2 * kDefaultSteps);
    const double rt = ou.boundary->terminal;
    const double rt2 = ou2.boundary->terminal;
    constexpr double kFloor = 1e-10;
    const bool rt_converges = rt2 <= rt / 8.0 || rt2 <= kFloor;
    const bool ric_converges = ou2.riccati <= ou.riccati / 8.0 || ou2.riccati <= kFloor;
    report(5, "stationarity and boundary residuals",
           stat <= 1e-7 && rt <= 1e-5 && rt_converges && ric_converges && fd <= 1e-5,
           "stationarity " + fmt("%.1e", stat) + ", rT(N=1000) " + fmt("%.1e", rt) + " -> " + fmt("%.1e", rt2) +
               ", Riccati " + fmt("%.1e", ou.riccati) + " -> " + fmt("%.1e", ou2.riccati) + ", FD max " +
               fmt("%.1e", fd));

    // 6. Optimality sweep over feasible terminal covariances.
    const Matrix x_star = ou.sol.x.mat();
    const double j_star = state_bridge(x_star).energy.jdyn;
    Matrix dir(2, 2);
    dir << 0.2, 0.02, 0.02, 0.0;  // keeps [0 1] X [0;1] = 1/16
    double worst_drop = -1e300;
    for (int i = 0; i <= 20; ++i) {
      const double theta = -1.0 + 0.1 * i;
      const double j = state_bridge(x_star + theta * dir).energy.jdyn;
      worst_drop = std::max(worst_drop, j_star - j);
    }
    report(6, "optimality sweep (21 feasible X)", worst_drop <= 1e-6,
           "Jdyn(X*) " + fmt("%.8f", j_star) + ", max Jdyn(X*) - Jdyn(theta) " + fmt("%.2e", worst_drop));

    // 7. Energy consistency on every instance of 1-3.
    double worst_gap = 0.0;
    for (double g : relgaps) worst_gap = std::max(worst_gap, g);
    report(7, "energy consistency", worst_gap <= 1e-3,
           "max |Jdyn - 2KL| / 2KL " + fmt("%.2e", worst_gap) + " over " + std::to_string(relgaps.size()) +
               " instances");

    // 8. Byte-identical trajectory files from two CLI runs.
    const fs::path root = fs::temp_directory_path() / "covsteer_acceptance";
    fs::remove_all(root);
    bool same = true;
    std::string detail;
    std::vector<std::string> files;
    for (const char* run : {"a", "b"}) {
      const fs::path dir = root / run;
      const std::string threads = std::string(run) == "a" ? "1" : "0";
      const std::string cmd = std::string(COVSTEER_CLI) + " simulate --example ou --seed 42 --paths 2000 --threads " +
                              threads + " --out " + dir.string() + " > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        same = false;
        detail = "simulate exited with status " + std::to_string(WEXITSTATUS(status)) + "; ";
      }
      files.push_back(slurp(dir / "trajectories.csv"));
    }
    same = same && !files[0].empty() && files[0] == files[1];
    report(8, "deterministic simulate", same,
           detail + "trajectories.csv " + std::to_string(files[0].size()) + " bytes, " +
               (files[0] == files[1] ? "identical" : "different"));
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
