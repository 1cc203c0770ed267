#pragma once

// Discrete adjoint of the forward stepper: q_{k+1} = Tr^*(D q_k), the exact
// transpose of y -> D Tr(y) in the grid inner product. Marching k forward
// corresponds to the backward adjoint equation in physical time; the
// renewal trace is the a = 0 slice of each q_k.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "popctrl/forward_solver.hpp"

namespace popctrl {

struct AdjointOptions {
  bool record_trace = true;
  bool keep_states = false;
  // Region over which observed_energy integrates q^2; the spec's control
  // box when unset.
  std::optional<ControlRegion> observe;
};

struct AdjointRun {
  StateField terminal;
  std::vector<Eigen::MatrixXd> renewal_trace;  // n_x by n_s per time level
  // observed_energy[i] = sum_{k < i} dt ||m q_k||^2, i = 0..steps
  std::vector<double> observed_energy;
  std::vector<Eigen::MatrixXd> states;
  double q0_norm = 0.0;
};

enum class VanishingStatus { Pass, Fail, NotApplicable };

struct VanishingReport {
  VanishingStatus status = VanishingStatus::NotApplicable;
  double max_abs = 0.0;  // normalized by ||q0||
  double s_lower = 0.0;  // sizes strictly above are checked
  double t_lower = 0.0;  // times strictly above are checked
  double T = 0.0;
  std::size_t samples = 0;
  std::string reason;
  nlohmann::json to_json() const;
};

std::string to_string(VanishingStatus s);

class AdjointSolver {
 public:
  explicit AdjointSolver(const ForwardSolver& forward);

  Eigen::MatrixXd step(const Eigen::MatrixXd& q) const;
  AdjointRun run(const StateField& q0, const AdjointOptions& options = {}) const;

  // Source field over (x, a, s) generated by the trace q(x, 0, ., t):
  // sum_u w_u beta(a, s, u) trace(u), or beta(a) trace(s) for local kernels.
  Eigen::MatrixXd nonlocal_source(const Eigen::MatrixXd& trace) const;

  const ForwardSolver& forward() const { return fwd_; }

 private:
  const ForwardSolver& fwd_;
};

// Maximum of |q(x, 0, s, t)| / ||q0|| over s > alpha* + margin_cells ds and
// a1 + S2* + margin_cells dt < t <= T. Throws MissingCriticalSize when
// alpha* is absent; NotApplicable when a1 < a_hat or S2* < min(a2 - a1, a_hat - a1) fails.
VanishingReport vanishing_check(const AdjointRun& run, const ForwardSolver& forward, const CriticalSizes& crit,
                                const TransitTimes& times, double margin_cells = 2.0, double tol = 1e-6);

}  // namespace popctrl
