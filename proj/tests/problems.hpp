#pragma once

// Small problem files shared by the tests.

#include <fstream>
#include <string>

#include <json.hpp>

#include "sephjb/config.hpp"

namespace problems {

inline std::string config_path(const std::string& name) {
  return std::string(SEPHJB_CONFIG_DIR) + "/" + name;
}

inline sephjb::ProblemConfig shipped(const std::string& name) {
  return sephjb::load_config(config_path(name));
}

/// 1D first-exit problem on [0, 1]: f = 0, G = 1, R = 1, lambda = 1, q = c,
/// psi = 1 on both ends.
inline nlohmann::json bar(double c, int points = 41) {
  nlohmann::json doc = nlohmann::json::parse(R"j({
    "grid": [{"name": "x", "points": 41, "lower": 0, "upper": 1}],
    "dynamics": [[]],
    "control": [[[1]]],
    "noise": "control",
    "cost": {"q_terms": [0.0], "R": [[1]], "lambda": 1},
    "setting": "first_exit",
    "boundaries": {"faces": [{"axis": "x", "side": "both", "value": 1}]},
    "solver": {"tolerance": 1e-7, "max_rank": 2, "max_sweeps": 20, "regularization": 0}
  })j");
  doc["cost"]["q_terms"][0] = c;
  doc["grid"][0]["points"] = points;
  return doc;
}

/// 1D periodic heat equation psi_t + psi_xx / 2 = 0 with psi_T = 2 + sin(x).
inline nlohmann::json heat(double T, double dt, int points) {
  nlohmann::json doc = nlohmann::json::parse(R"j({
    "grid": [{"name": "x", "points": 64, "lower": "-pi", "upper": "pi", "periodic": true}],
    "dynamics": [[]],
    "control": [[[1]]],
    "noise": "control",
    "cost": {"q_terms": [], "R": [[1]], "lambda": 1},
    "setting": {"finite_horizon": {"T": 0.1, "dt": 0.001, "terminal_psi": [2, ["sin(x)"]]}},
    "solver": {"tolerance": 1e-12, "max_rank": 1, "max_sweeps": 3, "regularization": 0}
  })j");
  doc["grid"][0]["points"] = points;
  doc["setting"]["finite_horizon"]["T"] = T;
  doc["setting"]["finite_horizon"]["dt"] = dt;
  return doc;
}

}  // namespace problems
