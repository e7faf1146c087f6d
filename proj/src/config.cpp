#include "covsteer/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml++/toml.hpp>

#include "covsteer/error.hpp"

namespace covsteer {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::ParseError, msg); }

double as_number(const toml::node& node, const std::string& key) {
  if (auto v = node.value<double>()) return *v;
  fail("'" + key + "' must contain only numbers");
}

Matrix parse_matrix(const toml::node& node, const std::string& key) {
  if (node.is_number()) return Matrix::Constant(1, 1, as_number(node, key));
  const auto* rows = node.as_array();
  if (rows == nullptr || rows->empty()) fail("'" + key + "' must be a non-empty array of rows");
  const auto* first = (*rows)[0].as_array();
  if (first == nullptr || first->empty()) fail("'" + key + "' rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(rows->size()), static_cast<Eigen::Index>(first->size()));
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const auto* row = (*rows)[i].as_array();
    if (row == nullptr || row->size() != first->size()) fail("'" + key + "' rows must all have the same length");
    for (std::size_t j = 0; j < row->size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = as_number((*row)[j], key);
    }
  }
  return m;
}

MatrixFunction parse_matrix_function(const toml::table& root, const std::string& key) {
  const toml::node* node = root.get(key);
  if (node == nullptr) fail("missing required key '" + key + "'");
  if (const auto* tables = node->as_array(); tables != nullptr && !tables->empty() && (*tables)[0].is_table()) {
    std::vector<double> times;
    std::vector<Matrix> values;
    for (const auto& entry : *tables) {
      const auto* tbl = entry.as_table();
      if (tbl == nullptr || !tbl->contains("t") || !tbl->contains("value")) {
        fail("every '" + key + "' sample needs 't' and 'value'");
      }
      times.push_back(as_number(*tbl->get("t"), key + ".t"));
      values.push_back(parse_matrix(*tbl->get("value"), key + ".value"));
    }
    try {
      return MatrixFunction::sampled(std::move(times), std::move(values));
    } catch (const Error& e) {
      fail("'" + key + "': " + e.what());
    }
  }
  return MatrixFunction::constant(parse_matrix(*node, key));
}

Matrix required_matrix(const toml::table& tbl, const std::string& key, const std::string& label) {
  const toml::node* node = tbl.get(key);
  if (node == nullptr) fail("missing required key '" + label + "'");
  return parse_matrix(*node, label);
}

SpdMatrix to_spd(const Matrix& m, const std::string& label) {
  try {
    return SpdMatrix(m);
  } catch (const Error& e) {
    fail("'" + label + "' is not a symmetric positive definite matrix");
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_matrix(const Matrix& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    s += i == 0 ? "[" : ", [";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j != 0) s += ", ";
      s += fmt_double(m(i, j));
    }
    s += "]";
  }
  return s + "]";
}

void fmt_constant(std::ostringstream& os, const std::string& key, const MatrixFunction& f) {
  if (f.is_constant()) os << key << " = " << fmt_matrix(f.values().front()) << "\n";
}

// Array-of-tables blocks must follow every top-level key.
void fmt_samples(std::ostringstream& os, const std::string& key, const MatrixFunction& f) {
  if (f.is_constant()) return;
  for (std::size_t i = 0; i < f.times().size(); ++i) {
    os << "[[" << key << "]]\nt = " << fmt_double(f.times()[i]) << "\nvalue = " << fmt_matrix(f.values()[i]) << "\n";
  }
}

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "line " << e.source().begin.line << ": " << e.description();
    fail(os.str());
  }

  ModelConfig cfg;
  ModelSpec& spec = cfg.spec;
  const toml::node* horizon = root.get("T");
  if (horizon == nullptr) fail("missing required key 'T'");
  spec.horizon = as_number(*horizon, "T");
  spec.a = parse_matrix_function(root, "A");
  spec.b = parse_matrix_function(root, "B");
  spec.sigma0 = to_spd(required_matrix(root, "Sigma0", "Sigma0"), "Sigma0");

  const toml::table* target = root["target"].as_table();
  if (target == nullptr) fail("missing [target] table");
  const std::string kind = (*target)["kind"].value_or(std::string{});
  const SpdMatrix sigma = to_spd(required_matrix(*target, "Sigma", "target.Sigma"), "target.Sigma");
  if (kind == "output") {
    spec.c = required_matrix(root, "C", "C");
    spec.target = OutputTarget{sigma};
  } else if (kind == "state") {
    spec.c = root.contains("C") ? required_matrix(root, "C", "C") : Matrix::Identity(spec.a.rows(), spec.a.rows());
    spec.target = FullStateTarget{sigma};
  } else {
    fail("target.kind must be \"output\" or \"state\"");
  }

  if (const toml::table* grid = root["grid"].as_table()) {
    if (auto steps = (*grid)["steps"].value<int64_t>()) {
      if (*steps < 2) fail("grid.steps must be at least 2");
      cfg.steps = static_cast<int>(*steps);
    } else if (grid->contains("steps")) {
      fail("grid.steps must be an integer");
    }
  }

  try {
    spec.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::RankDeficient) throw;
    fail(e.what());
  }
  return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str());
}

std::string format_model_config(const ModelSpec& spec, std::optional<int> steps) {
  std::ostringstream os;
  os << "T = " << fmt_double(spec.horizon) << "\n";
  os << "Sigma0 = " << fmt_matrix(spec.sigma0.mat()) << "\n";
  os << "C = " << fmt_matrix(spec.c) << "\n";
  fmt_constant(os, "A", spec.a);
  fmt_constant(os, "B", spec.b);
  fmt_samples(os, "A", spec.a);
  fmt_samples(os, "B", spec.b);
  os << "\n[target]\nkind = \"" << (spec.output_target() ? "output" : "state") << "\"\n";
  os << "Sigma = " << fmt_matrix(spec.target_sigma().mat()) << "\n";
  if (steps) os << "\n[grid]\nsteps = " << *steps << "\n";
  return os.str();
}

std::string config_hash(const ModelSpec& spec, int steps) {
  const std::string canonical = format_model_config(spec, steps);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace covsteer
