#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "covsteer/model.hpp"

namespace covsteer {

/// A model file plus the optional grid size it requests.
///
/// Format (TOML):
///
///     T = 1.0
///     A = [[0.0, 1.0], [-1.0, -1.0]]     # or [[A]] tables with t = ..., value = [[...]]
///     B = [[0.0], [1.0]]
///     Sigma0 = [[0.5, 0.0], [0.0, 0.5]]
///     C = [[0.0, 1.0]]                   # required for output targets
///
///     [target]
///     kind = "output"                    # or "state"
///     Sigma = [[0.0625]]
///
///     [grid]
///     steps = 1000
struct ModelConfig {
  ModelSpec spec;
  std::optional<int> steps;
};

/// Throws Error(ParseError) with the offending key in the message.
[[nodiscard]] ModelConfig parse_model_config(std::string_view text);
[[nodiscard]] ModelConfig load_model_config(const std::filesystem::path& path);

/// Inverse of parse_model_config; matrices written with 17 significant digits.
[[nodiscard]] std::string format_model_config(const ModelSpec& spec, std::optional<int> steps = std::nullopt);

/// Hex FNV-1a hash over every solver-relevant field (model data and grid size).
[[nodiscard]] std::string config_hash(const ModelSpec& spec, int steps);

}  // namespace covsteer
