#pragma once

// Penalized HUM. With F the forward stepper, m the control indicator and
// q_k = (F^*)^k phi, the control for step n is u^n = m q_{N-1-n} and the
// Gramian is Lambda phi = sum_k dt F^k m (F^*)^k phi. CG on
// (Lambda + eps I) phi = -y_free(T) in the grid inner product.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "popctrl/adjoint_solver.hpp"
#include "popctrl/forward_solver.hpp"

namespace popctrl {

struct HumOptions {
  double epsilon = 1e-4;
  double cg_tol = 1e-8;
  int cg_max_iter = 2000;
  bool record_history = true;
  bool diagonal_preconditioner = false;

  void validate() const;
};

struct HumResult {
  std::vector<Eigen::MatrixXd> control;  // one field per step, zero off the control box
  StateField phi;
  StateField terminal;
  double initial_norm = 0.0;
  double free_terminal_norm = 0.0;
  double terminal_norm = 0.0;
  double control_cost = 0.0;  // sum_n dt ||u^n||^2
  int cg_iters = 0;
  int gramian_applications = 0;
  double epsilon = 0.0;
  bool converged = true;  // false on a CG stall
  std::vector<double> residual_history;  // relative residual per iteration
  std::vector<double> energy_history;    // CG energy functional per iteration

  double terminal_norm_ratio() const { return initial_norm > 0.0 ? terminal_norm / initial_norm : 0.0; }
  nlohmann::json to_json() const;
};

class HumSolver {
 public:
  explicit HumSolver(const ForwardSolver& forward);

  // Adjoint states q_0..q_{N-1} for data phi.
  std::vector<Eigen::MatrixXd> adjoint_states(const Eigen::MatrixXd& phi) const;
  // Control u^n = m q_{N-1-n}.
  std::vector<Eigen::MatrixXd> control_from(const Eigen::MatrixXd& phi) const;
  // Terminal state of the controlled run from zero initial data.
  Eigen::MatrixXd control_to_terminal(const std::vector<Eigen::MatrixXd>& u,
                                      SplitOrder order = SplitOrder::Standard) const;

  StateField gramian_apply(const StateField& phi) const;
  HumResult solve_control(const StateField& y0, const HumOptions& options) const;

  const ForwardSolver& forward() const { return fwd_; }

 private:
  Eigen::MatrixXd gramian(const Eigen::MatrixXd& phi) const;
  Eigen::MatrixXd occupancy() const;

  const ForwardSolver& fwd_;
  AdjointSolver adj_;
};

// max over trials of |<F u, qT> - <u, F^* qT>| / (||F u|| ||qT||), 0 when the
// scale vanishes. `order` lets a test run a forward map that the adjoint does
// not match.
double adjointness_check(const ForwardSolver& forward, int trials = 20, std::uint64_t seed = 1,
                         SplitOrder order = SplitOrder::Standard);

// max over pairs of |<L phi, psi> - <phi, L psi>| / (||L phi|| ||psi|| + ||phi|| ||L psi||).
double gramian_symmetry_defect(const HumSolver& hum, int pairs = 20, std::uint64_t seed = 7);

struct ObservabilityResult {
  double min_ratio = 0.0;
  std::vector<double> samples;
};

// Over random unit q0: observed_energy(T) / ||q(T)||^2.
ObservabilityResult observability_ratio(const ForwardSolver& forward, int n_samples, std::uint64_t seed = 11);

}  // namespace popctrl
