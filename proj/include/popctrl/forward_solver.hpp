#pragma once

// Splitting solver for the controlled population model:
//   y^{n+1} = D Tr(y^n) + dt m u^n
// with Tr the semi-Lagrangian transport in (a, s) (renewal at a = 0,
// exponential survival, growth Jacobian) and D one Crank-Nicolson step of the
// spatial operator. Both pieces expose their exact transposes in the grid
// inner product; the adjoint solver is built from them.

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "popctrl/characteristics.hpp"
#include "popctrl/discretization.hpp"
#include "popctrl/model.hpp"

namespace popctrl {

// Newborn density y1(x, s) from the current field, by direct summation of the
// cell quadrature over (a, parent size). Independent of TransportOperator.
Eigen::MatrixXd renewal(const StateField& f, const FertilityKernel& kernel);

// Throws KernelMismatch when the kernel variant does not fit the model.
void check_kernel(const ModelSpec& spec);

class TransportOperator {
 public:
  TransportOperator(const ModelSpec& spec, GridPtr grid, const CharacteristicsTable& table);

  // One step of length grid.dt(); the renewal density is read from y.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& y) const;
  // Exact transpose of apply() in the grid inner product. Nodes of zero
  // weight come out as 0.
  Eigen::MatrixXd apply_adjoint(const Eigen::MatrixXd& q) const;
  // Newborn density n_x by n_s from the factorized kernel.
  Eigen::MatrixXd newborn(const Eigen::MatrixXd& y) const;

  // dest x src, dest x newborn-size, newborn-size x rank, rank x src
  const Eigen::SparseMatrix<double>& interior() const { return P_; }
  const Eigen::SparseMatrix<double>& inflow() const { return E_; }
  const Eigen::SparseMatrix<double>& profile() const { return Phi_; }
  const Eigen::SparseMatrix<double>& collect() const { return C_; }

 private:
  GridPtr grid_;
  Eigen::SparseMatrix<double> P_, Pt_, E_, Et_, Phi_, Phit_, C_, Ct_;
  Eigen::VectorXd w_, w_inv_;
};

class DiffusionOperator {
 public:
  DiffusionOperator(const ModelSpec& spec, GridPtr grid);

  // One Crank-Nicolson step of length dt (grid dt by default), applied to
  // every column in place. Dirichlet rows are set to 0.
  void apply(Eigen::MatrixXd& y) const;
  void apply(Eigen::MatrixXd& y, double dt) const;

  // Dense generator (n_x by n_x): Neumann flux form, or the symmetric
  // sigma (gamma u')' form on interior nodes with zero boundary rows.
  const Eigen::MatrixXd& generator() const { return D_; }
  bool dirichlet() const { return dirichlet_; }

 private:
  void factor(double dt) const;

  GridPtr grid_;
  bool dirichlet_;
  Eigen::MatrixXd D_;
  std::vector<double> lower_, diag_, upper_;  // generator bands
  // Thomas factorization of I - dt/2 D for the cached dt
  mutable double cached_dt_ = -1.0;
  mutable std::vector<double> cprime_, denom_;
};

enum class SplitOrder {
  Standard,                // control added after diffusion
  ControlBeforeDiffusion,  // mutation fixture: not the adjoint of the adjoint solver
};

struct ForwardOptions {
  bool record_trace = true;
  bool record_mass = true;
  bool keep_states = false;
  SplitOrder order = SplitOrder::Standard;
};

struct ForwardRun {
  StateField terminal;
  // a = 0 slice (n_x by n_s) at each of the steps + 1 time levels
  std::vector<Eigen::MatrixXd> newborn_trace;
  std::vector<double> mass_history;
  std::vector<Eigen::MatrixXd> states;  // when keep_states
  nlohmann::json config;
};

class ForwardSolver {
 public:
  ForwardSolver(const ModelSpec& spec, const GridConfig& grid);
  ForwardSolver(const ModelSpec& spec, GridPtr grid, std::shared_ptr<const CharacteristicsTable> table);

  const ModelSpec& spec() const { return spec_; }
  const GridPtr& grid() const { return grid_; }
  const CharacteristicsTable& table() const { return *table_; }
  const TransportOperator& transport() const { return transport_; }
  const DiffusionOperator& diffusion() const { return diffusion_; }
  // Throws EmptyRegion when no node lies in the control box.
  const ControlMask& mask() const;

  Eigen::MatrixXd step(const Eigen::MatrixXd& y, const Eigen::MatrixXd* u = nullptr,
                       SplitOrder order = SplitOrder::Standard) const;
  // controls: empty (no control) or one n_x by (n_a n_s) field per step;
  // only their values on the control box act.
  ForwardRun run(const StateField& y0, const std::vector<Eigen::MatrixXd>& controls = {},
                 const ForwardOptions& options = {}) const;

  double mass(const Eigen::MatrixXd& y) const;

 private:
  ModelSpec spec_;
  GridPtr grid_;
  std::shared_ptr<const CharacteristicsTable> table_;
  TransportOperator transport_;
  DiffusionOperator diffusion_;
  std::optional<ControlMask> mask_;
};

}  // namespace popctrl
