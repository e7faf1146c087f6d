// covsteer: minimum-energy steering of a linear Gauss-Markov model to a
// prescribed output (or state) covariance.
//
//   covsteer solve    --example ou --out results/
//   covsteer simulate --config model.toml --paths 10000 --seed 42
//   covsteer verify   --example ou

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "covsteer/config.hpp"
#include "covsteer/error.hpp"
#include "covsteer/io.hpp"
#include "covsteer/pipeline.hpp"

namespace fs = std::filesystem;
using namespace covsteer;

namespace {

enum ExitCode : int {
  kOk = 0,
  kParse = 2,
  kNotControllable = 3,
  kSolver = 4,
  kStatistics = 5,
  kVerify = 6,
};

struct RunConfig {
  std::string config_path;
  std::string example;
  std::optional<int> steps;
  std::string out_dir = ".";
  std::uint64_t seed = 42;
  int paths = 10000;
  int store_every = 10;
  std::size_t csv_paths = 200;
  unsigned threads = 0;
  bool no_oracle = false;
  double perturb_multiplier = 0.0;
};

void add_model_options(CLI::App* cmd, RunConfig& rc) {
  auto* cfg = cmd->add_option("--config", rc.config_path, "Model file (TOML)")->check(CLI::ExistingFile);
  auto* ex = cmd->add_option("--example", rc.example, "Built-in model")->check(CLI::IsMember({"ou"}));
  cfg->excludes(ex);
  cmd->add_option("--steps", rc.steps, "Grid steps on [0, T]")->check(CLI::Range(2, 100000000));
  cmd->add_option("--out", rc.out_dir, "Output directory");
}

struct Loaded {
  ModelSpec spec;
  int steps = kDefaultSteps;
};

Loaded load(const RunConfig& rc) {
  if (rc.config_path.empty() && rc.example.empty()) {
    throw Error(ErrorKind::ParseError, "one of --config or --example is required");
  }
  Loaded l;
  if (!rc.example.empty()) {
    l.spec = make_ou_example();
  } else {
    ModelConfig mc = load_model_config(rc.config_path);
    l.spec = std::move(mc.spec);
    if (mc.steps) l.steps = *mc.steps;
  }
  if (rc.steps) l.steps = *rc.steps;
  return l;
}

SolutionBundle solve(const Loaded& l) {
  const SolutionBundle b = solve_pipeline(l.spec, l.steps);
  const double ratio = controllability_ratio(b.moments);
  if (ratio < 1e-8) {
    std::cerr << "warning: controllability Gramian is nearly singular (eigenvalue ratio " << ratio << ")\n";
  }
  return b;
}

fs::path out_path(const RunConfig& rc, const char* name) {
  fs::create_directories(rc.out_dir);
  return fs::path(rc.out_dir) / name;
}

int run_solve(const RunConfig& rc) {
  const SolutionBundle b = solve(load(rc));
  write_solution_json(out_path(rc, "solution.json"), b);
  write_gains_csv(out_path(rc, "gains.csv"), b.gains);
  write_covariance_csv(out_path(rc, "covariance.csv"), b.cov);
  std::cout << "Jdyn = " << b.energy.jdyn << "  Jstatic = " << b.energy.jstatic << "\n"
            << "wrote solution.json, gains.csv, covariance.csv to " << rc.out_dir << "\n";
  return kOk;
}

int run_simulate(const RunConfig& rc) {
  const SolutionBundle b = solve(load(rc));
  SimConfig sim;
  sim.paths = rc.paths;
  sim.seed = rc.seed;
  sim.store_every = rc.store_every;
  sim.threads = rc.threads;
  const TrajectoryBatch batch = simulate_paths(b.spec, b.gains, sim);
  write_trajectories_csv(out_path(rc, "trajectories.csv"), batch, rc.csv_paths);
  if (batch.paths() < 2) {
    // Sample covariances need two paths; keep the trajectory and say so.
    std::ofstream out(out_path(rc, "summary.json"), std::ios::binary);
    out << nlohmann::json{{"paths", batch.paths()}, {"seed", batch.seed()}, {"pass", nullptr},
                          {"note", "statistical checks need at least two paths"}}
               .dump(2)
        << "\n";
    std::cerr << "note: statistical checks skipped for a single path\n";
    return kOk;
  }
  const SimulationSummary summary = summarize_simulation(b, batch);
  {
    std::ofstream out(out_path(rc, "summary.json"), std::ios::binary);
    out << summary_to_json(summary).dump(2) << "\n";
  }
  std::cout << format_checks(summary.checks);
  if (!summary.pass) {
    for (const auto& c : summary.checks) {
      if (!c.pass) std::cerr << "statistical check failed: " << c.name << "\n";
    }
    return kStatistics;
  }
  return kOk;
}

int run_verify(const RunConfig& rc) {
  const SolutionBundle b = solve(load(rc));
  VerifyOptions opts;
  opts.run_oracle = !rc.no_oracle;
  opts.multiplier_perturbation = rc.perturb_multiplier;
  const auto checks = verify_bundle(b, opts);
  std::cout << format_checks(checks);
  bool ok = true;
  for (const auto& c : checks) {
    if (!c.pass) {
      std::cerr << "failed check: " << c.name << "\n";
      ok = false;
    }
  }
  return ok ? kOk : kVerify;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ParseError: return kParse;
    case ErrorKind::NotControllable: return kNotControllable;
    default: return kSolver;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-energy covariance steering of linear stochastic systems"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* solve_cmd = app.add_subcommand("solve", "Solve and write solution.json, gains.csv, covariance.csv");
  add_model_options(solve_cmd, rc);

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo check of a solved model");
  add_model_options(sim_cmd, rc);
  sim_cmd->add_option("--seed", rc.seed, "Random seed");
  sim_cmd->add_option("--paths", rc.paths, "Number of sample paths")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--store-every", rc.store_every, "Keep every k-th grid node")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--csv-paths", rc.csv_paths, "Paths written to trajectories.csv");
  sim_cmd->add_option("--threads", rc.threads, "Worker threads (0 = all cores)");

  auto* verify_cmd = app.add_subcommand("verify", "Print the residual table; exit 6 if any check fails");
  add_model_options(verify_cmd, rc);
  verify_cmd->add_flag("--no-oracle", rc.no_oracle, "Skip the cross-check against the iterative oracle");
  verify_cmd->add_option("--perturb-multiplier", rc.perturb_multiplier)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (*solve_cmd) return run_solve(rc);
    if (*sim_cmd) return run_simulate(rc);
    return run_verify(rc);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  }
}
