#pragma once

// JSON problem files.
//
// Top-level keys: name, comment, grid, dynamics, control, noise, cost,
// setting, boundaries, solver. A separated term is written either as a list
// of d expression strings, as {"coef": c, "factors": {axis: expr, ...}}
// (missing axes default to "1"), or as a bare number for a constant.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sephjb/boundary.hpp"
#include "sephjb/hjb.hpp"
#include "sephjb/problem.hpp"

namespace sephjb {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct ProblemConfig {
  std::string name;
  std::string comment;
  HjbProblem problem;
  BoundarySpec boundaries;
  SolveOptions solve;
  /// Rank cap between finite-horizon steps.
  Index carry_rank = 20;
};

/// Throws ConfigError (with the JSON path) for schema violations and for
/// expressions that fail to parse or evaluate.
ProblemConfig parse_config(const nlohmann::json& doc);
ProblemConfig load_config(const std::filesystem::path& path);

/// Canonical form: terms as {"coef", "factors": [d strings]}, regions as
/// node index ranges. parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ProblemConfig& c);

}  // namespace sephjb
