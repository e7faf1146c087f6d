#include "covsteer/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write '" + path.string() + "'");
  return out;
}

void put(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

void put_matrix(std::string& line, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      line += ',';
      put(line, m(i, j));
    }
  }
}

void put_header(std::string& line, const char* prefix, Eigen::Index rows, Eigen::Index cols) {
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      line += ',' + std::string(prefix) + '_' + std::to_string(i + 1) + '_' + std::to_string(j + 1);
    }
  }
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      row.push_back(std::strtod(p, &end));
      if (end == p) throw Error(ErrorKind::ParseError, "malformed number in '" + path.string() + "'");
      p = end;
      if (*p != ',') break;
      ++p;
    }
    if (*p != '\0' && *p != '\r') throw Error(ErrorKind::ParseError, "trailing characters in '" + path.string() + "'");
    if (row.size() != columns) throw Error(ErrorKind::ParseError, "unexpected column count in '" + path.string() + "'");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 3) throw Error(ErrorKind::ParseError, "too few rows in '" + path.string() + "'");
  return rows;
}

Matrix take(const std::vector<double>& row, std::size_t& at, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row[at++];
  }
  return m;
}

TimeGrid grid_from_rows(const std::vector<std::vector<double>>& rows) {
  return TimeGrid(rows.back()[0], static_cast<int>(rows.size() - 1));
}

json checks_to_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  }
  return arr;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw Error(ErrorKind::ParseError, "matrix must be an array of rows");
  }
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw Error(ErrorKind::ParseError, "ragged matrix");
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

json solution_to_json(const SolutionBundle& b) {
  json residuals = {
      {"stationarity_x", b.static_res.stationarity_x},
      {"stationarity_y", b.static_res.stationarity_y},
      {"terminal_constraint", b.static_res.constraint},
      {"quadratic_root", b.static_res.quadratic},
      {"multiplier_asymmetry", b.static_res.multiplier_asymmetry},
      {"riccati_pi", b.riccati},
  };
  if (b.q_lyapunov) residuals["lyapunov_q"] = *b.q_lyapunov;
  if (b.boundary) {
    residuals["boundary_initial"] = b.boundary->initial;
    residuals["boundary_terminal"] = b.boundary->terminal;
    residuals["lyapunov_p"] = b.boundary->lyapunov;
    residuals["factorization"] = b.boundary->factorization;
  }
  const Matrix cxct = target_projection(b.spec, b.sol.x.mat());
  return {
      {"provenance",
       {{"config_hash", b.provenance.config_hash}, {"steps", b.provenance.steps}, {"version", b.provenance.version}}},
      {"model",
       {{"n", b.spec.n()},
        {"m", b.spec.m()},
        {"p", b.spec.output_target() ? b.spec.p() : b.spec.n()},
        {"T", b.spec.horizon},
        {"target_kind", b.spec.output_target() ? "output" : "state"}}},
      {"X", matrix_to_json(b.sol.x.mat())},
      {"Y", matrix_to_json(b.sol.y)},
      {"Z", matrix_to_json(b.sol.z.mat())},
      {"Mlag", matrix_to_json(b.sol.mlag.mat())},
      {"PiT", matrix_to_json(b.pi_terminal.mat())},
      {"CXCt", matrix_to_json(cxct)},
      {"objective", b.sol.objective},
      {"Jstatic", b.energy.jstatic},
      {"Jdyn", b.energy.jdyn},
      {"energy_relgap", b.energy.relgap},
      {"residuals", residuals},
  };
}

SolutionRecord solution_from_json(const json& j) {
  try {
    SolutionRecord r;
    r.x = matrix_from_json(j.at("X"));
    r.y = matrix_from_json(j.at("Y"));
    r.z = matrix_from_json(j.at("Z"));
    r.mlag = matrix_from_json(j.at("Mlag"));
    r.pi_terminal = matrix_from_json(j.at("PiT"));
    r.cxct = matrix_from_json(j.at("CXCt"));
    r.objective = j.at("objective").get<double>();
    r.jstatic = j.at("Jstatic").get<double>();
    r.jdyn = j.at("Jdyn").get<double>();
    r.energy_relgap = j.at("energy_relgap").get<double>();
    for (const auto& [k, v] : j.at("residuals").items()) r.residuals[k] = v.get<double>();
    const auto& prov = j.at("provenance");
    r.provenance.config_hash = prov.at("config_hash").get<std::string>();
    r.provenance.steps = prov.at("steps").get<int>();
    r.provenance.version = prov.at("version").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("solution.json: ") + e.what());
  }
}

void write_solution_json(const std::filesystem::path& path, const SolutionBundle& bundle) {
  auto out = open_out(path);
  out << solution_to_json(bundle).dump(2) << "\n";
}

SolutionRecord read_solution_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path.string() + "'");
  try {
    return solution_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("solution.json: ") + e.what());
  }
}

void write_gains_csv(const std::filesystem::path& path, const GainSchedule& gains) {
  auto out = open_out(path);
  const auto n = gains.pi.front().rows();
  const auto m = gains.gain.front().rows();
  std::string line = "t";
  put_header(line, "Pi", n, n);
  put_header(line, "K", m, n);
  out << line << "\n";
  for (std::size_t k = 0; k < gains.grid.size(); ++k) {
    line.clear();
    put(line, gains.grid.node(k));
    put_matrix(line, gains.pi[k]);
    put_matrix(line, gains.gain[k]);
    out << line << "\n";
  }
}

GainSchedule read_gains_csv(const std::filesystem::path& path, Eigen::Index n, Eigen::Index m) {
  const auto rows = read_csv_rows(path, static_cast<std::size_t>(1 + n * n + m * n));
  GainSchedule g;
  g.grid = grid_from_rows(rows);
  for (const auto& row : rows) {
    std::size_t at = 1;
    g.pi.push_back(take(row, at, n, n));
    g.gain.push_back(take(row, at, m, n));
  }
  return g;
}

void write_covariance_csv(const std::filesystem::path& path, const CovSchedule& cov, double level) {
  auto out = open_out(path);
  const auto n = cov.sigma.front().rows();
  std::string line = "t";
  put_header(line, "Sigma", n, n);
  for (Eigen::Index i = 0; i < n; ++i) line += ",radius_" + std::to_string(i + 1);
  out << line << "\n";
  const auto tube = tube_radii(cov, level);
  for (std::size_t k = 0; k < cov.grid.size(); ++k) {
    line.clear();
    put(line, cov.grid.node(k));
    put_matrix(line, cov.sigma[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      line += ',';
      put(line, tube[k].radii(i));
    }
    out << line << "\n";
  }
}

CovSchedule read_covariance_csv(const std::filesystem::path& path, Eigen::Index n) {
  const auto rows = read_csv_rows(path, static_cast<std::size_t>(1 + n * n + n));
  CovSchedule c;
  c.grid = grid_from_rows(rows);
  for (const auto& row : rows) {
    std::size_t at = 1;
    c.sigma.push_back(take(row, at, n, n));
  }
  return c;
}

void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBatch& batch, std::size_t max_paths) {
  auto out = open_out(path);
  std::string line = "path,t";
  for (Eigen::Index i = 0; i < batch.n(); ++i) line += ",x_" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < batch.m(); ++i) line += ",u_" + std::to_string(i + 1);
  out << line << "\n";
  const std::size_t paths = std::min(max_paths, batch.paths());
  for (std::size_t p = 0; p < paths; ++p) {
    for (std::size_t k = 0; k < batch.nodes(); ++k) {
      line = std::to_string(p) + ',';
      put(line, batch.times()[k]);
      put_matrix(line, batch.state(p, k).transpose());
      put_matrix(line, batch.control(p, k).transpose());
      out << line << "\n";
    }
  }
}

json summary_to_json(const SimulationSummary& s) {
  return {
      {"paths", s.paths},
      {"seed", s.seed},
      {"empirical_terminal_cov", matrix_to_json(s.empirical_terminal_cov)},
      {"predicted_terminal_cov", matrix_to_json(s.predicted_terminal_cov)},
      {"empirical_target_cov", matrix_to_json(s.empirical_target_cov)},
      {"target_cov", matrix_to_json(s.target_cov)},
      {"target_cov_std_error", matrix_to_json(s.target_std_error)},
      {"target_cov_band_3se", matrix_to_json(3.0 * s.target_std_error)},
      {"empirical_energy", s.energy.mean},
      {"empirical_energy_std_error", s.energy.std_error},
      {"Jdyn", s.jdyn},
      {"checks", checks_to_json(s.checks)},
      {"pass", s.pass},
  };
}

std::string format_checks(const std::vector<Check>& checks) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "check" << std::setw(16) << "value" << std::setw(12) << "tolerance"
     << "status\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(28) << c.name << std::setw(16) << std::setprecision(6) << std::scientific << c.value
       << std::setw(12) << std::setprecision(1) << c.tolerance << (c.pass ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

}  // namespace covsteer
