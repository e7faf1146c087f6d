#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "covsteer/monte_carlo.hpp"
#include "covsteer/pipeline.hpp"

namespace covsteer {

// Column layouts are documented in docs/file_formats.md.

[[nodiscard]] nlohmann::json matrix_to_json(const Matrix& m);
[[nodiscard]] Matrix matrix_from_json(const nlohmann::json& j);

[[nodiscard]] nlohmann::json solution_to_json(const SolutionBundle& bundle);

/// What solution.json holds, read back.
struct SolutionRecord {
  Matrix x;
  Matrix y;
  Matrix z;
  Matrix mlag;
  Matrix pi_terminal;
  Matrix cxct;
  double objective = 0.0;
  double jstatic = 0.0;
  double jdyn = 0.0;
  double energy_relgap = 0.0;
  std::map<std::string, double> residuals;
  Provenance provenance;
};

[[nodiscard]] SolutionRecord solution_from_json(const nlohmann::json& j);

void write_solution_json(const std::filesystem::path& path, const SolutionBundle& bundle);
[[nodiscard]] SolutionRecord read_solution_json(const std::filesystem::path& path);

/// t, Pi_i_j (row-major), K_i_j (row-major).
void write_gains_csv(const std::filesystem::path& path, const GainSchedule& gains);
[[nodiscard]] GainSchedule read_gains_csv(const std::filesystem::path& path, Eigen::Index n, Eigen::Index m);

/// t, Sigma_i_j (row-major), radius_k (ascending, 3-sigma tube).
void write_covariance_csv(const std::filesystem::path& path, const CovSchedule& cov, double level = 3.0);
[[nodiscard]] CovSchedule read_covariance_csv(const std::filesystem::path& path, Eigen::Index n);

/// path, t, x_1..x_n, u_1..u_m for the first `max_paths` paths.
void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBatch& batch, std::size_t max_paths);

[[nodiscard]] nlohmann::json summary_to_json(const SimulationSummary& summary);

/// Residual table printed by `verify`.
[[nodiscard]] std::string format_checks(const std::vector<Check>& checks);

}  // namespace covsteer
