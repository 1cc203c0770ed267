#pragma once

// Experiment drivers: threshold sweeps in T, kernel comparison, vanishing
// certification on a grid ladder, and the dense-matrix oracle. Each returns an
// ExperimentReport whose rows serialize to CSV and JSON.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "popctrl/hum.hpp"

namespace popctrl {

struct ExperimentReport {
  std::string kind;
  std::string fingerprint;  // FNV-1a of the spec, grid and driver parameters
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json metadata = nlohmann::json::object();
  nlohmann::json environment = nlohmann::json::object();

  nlohmann::json to_json() const;
  // One line per row; columns are the union of row keys in first-seen order.
  std::string to_csv() const;
  // Writes <prefix>.json and <prefix>.csv.
  void write(const std::string& prefix) const;
};

std::string fingerprint(const ModelSpec& spec, const GridConfig& grid, const nlohmann::json& extra = {});

// Runs fn(0..n-1) on up to `threads` workers pulling indices from a shared
// counter. fn must only write to its own slot.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct InitialData {
  std::uint64_t seed = 42;
  FieldShape shape = FieldShape::Positive;
};

struct SweepOptions {
  HumOptions hum;
  InitialData y0;
  int threads = 1;
  // terminal_norm_ratio may grow with T by at most this relative amount
  // before the monotonicity diagnostic flags it
  double monotone_tol = 1e-3;
};

// One row per (T, eps): T, T_effective, steps, epsilon, terminal_norm_ratio,
// control_cost, cg_iters, converged, status. Rows sorted by T, then by
// decreasing eps. Throws InvalidConfig on an empty T or eps list.
ExperimentReport sweep_time(const ModelSpec& spec, const GridConfig& grid, std::vector<double> T_list,
                            std::vector<double> eps_list, const SweepOptions& options = {});

// Local kernel whose age rate is the probabilistic kernel integrated against a
// size-uniform parent population: beta(a) = b(a) * mean(parent) * int(newborn).
ModelSpec matched_local_kernel(const ModelSpec& probabilistic);

struct KernelCase {
  ModelSpec spec;
  GridConfig grid;
};

struct CompareOptions {
  double epsilon = 1e-5;
  double knee_factor = 5.0;
  SweepOptions sweep;
};

// Cost-vs-T curves for a Probabilistic and a Local case sharing geometry.
// Metadata: both thresholds, analytic_gap, knees (first T with cost at most
// knee_factor times the cost at the largest T; null when absent) and
// local_knee_first. Throws GeometryMismatch when grids or geometry differ and
// KernelMismatch when the kernel variants are not one of each.
ExperimentReport compare_kernels(const KernelCase& probabilistic, const KernelCase& local, std::vector<double> T_list,
                                 const CompareOptions& options = {});

struct VanishingOptions {
  double margin_cells = 2.0;
  double tol = 1e-6;
  double floor = 1e-14;  // values below count as zero in the monotonicity test
  std::uint64_t seed = 5;
};

// vanishing_check on every grid of the ladder with the same smooth random q0.
// metadata.status is PASS when the maxima do not increase along the ladder
// and the last is at most tol, NOT-APPLICABLE when the hypotheses fail.
// Throws MissingCriticalSize when alpha* is absent.
ExperimentReport certify_vanishing(const ModelSpec& spec, const std::vector<GridConfig>& ladder, double T,
                                   const VanishingOptions& options = {});

enum class OracleMode { Full, PureDiffusion, PureTransport };
std::string to_string(OracleMode mode);
OracleMode oracle_mode_from_string(const std::string& name);

struct OracleOptions {
  OracleMode mode = OracleMode::Full;
  std::vector<double> horizons{0.25, 0.5};
  int n_initial = 3;
  // dt = da / divisor for each entry
  std::vector<int> dt_divisors{16, 32, 64};
  std::uint64_t seed = 3;
  std::size_t max_unknowns = 10000;
};

// Dense oracle. Full and PureTransport: the upwind method-of-lines
// generator of the model (renewal and boundary rows algebraic) advanced by
// implicit Euler with a dense LU. PureDiffusion: the spatial operator alone,
// advanced by dense Crank-Nicolson. Rows hold the relative weighted L2
// deviation of the splitting solver from the oracle for every
// (initial datum, horizon, dt); metadata.max_deviation lists the maximum per
// dt and metadata.ratios the successive quotients. OracleTooLarge above
// max_unknowns.
ExperimentReport oracle_check(const ModelSpec& spec, const GridConfig& grid, const OracleOptions& options = {});

}  // namespace popctrl
