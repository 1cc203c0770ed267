#pragma once

#include <fstream>
#include <random>
#include <string>

#include "json.hpp"
#include "popctrl/experiments.hpp"

namespace testing {

inline popctrl::ModelSpec load_spec(const std::string& name) {
  std::ifstream in(std::string(POPCTRL_CONFIG_DIR) + "/" + name);
  return popctrl::ModelSpec::from_json(nlohmann::json::parse(in));
}

// g = 1, A = S = 1 with the given rates; everything else zero or trivial.
inline nlohmann::json base_json() {
  return nlohmann::json::parse(R"({
    "growth": {"variant": "rate", "rate": 1.0, "max_size": 1.0},
    "mortality": {"variant": "additive", "age_rate": 0.0, "size_rate": 0.0, "max_age": 1.0, "integrable_cutoff": 0.95},
    "fertility": {"variant": "probabilistic", "min_fertile_age": 0.9, "age": 0.0},
    "diffusion": {"variant": "neumann", "length": 1.0, "conductivity": 1.0},
    "control": {"variant": "box", "omega": [0.3, 0.7], "age": [0.1, 0.9], "size": [0.2, 0.8]}
  })");
}

inline popctrl::ModelSpec spec_from(const nlohmann::json& j) { return popctrl::ModelSpec::from_json(j); }

inline popctrl::GridConfig cube(int n, double T, double dt = 0.0) {
  popctrl::GridConfig c;
  c.n_x = c.n_a = c.n_s = n;
  c.T = T;
  c.dt = dt;
  return c;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

}  // namespace testing
