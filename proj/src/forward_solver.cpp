#include "popctrl/forward_solver.hpp"

#include <cmath>

#include "popctrl/error.hpp"

namespace popctrl {
namespace {

using Triplet = Eigen::Triplet<double>;

std::pair<int, double> locate(double v, double h, int n) {
  double p = v / h;
  const double r = std::round(p);
  if (std::abs(p - r) < 1e-12 * std::max(1.0, std::abs(r))) p = r;
  int i = std::clamp(static_cast<int>(std::floor(p)), 0, n - 2);
  return {i, p - i};
}

Eigen::SparseMatrix<double> sparse(int rows, int cols, const std::vector<Triplet>& t) {
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

void check_kernel(const ModelSpec& spec) {
  if (spec.degenerate() && spec.fertility.kind == KernelKind::Probabilistic) {
    throw Error(ErrorKind::KernelMismatch, "the degenerate model takes a local birth kernel");
  }
}

Eigen::MatrixXd renewal(const StateField& f, const FertilityKernel& kernel) {
  const Grid& g = *f.grid;
  if (g.weight_kind() == WeightKind::InverseSigma && kernel.kind == KernelKind::Probabilistic) {
    throw Error(ErrorKind::KernelMismatch, "the degenerate model takes a local birth kernel");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.n_x(), g.n_s());
  for (int j = 0; j < g.n_a(); ++j) {
    for (int k = 0; k < g.n_s(); ++k) {
      const double w = g.wa()(j) * g.ws()(k);
      const auto col = f.values.col(g.index(j, k));
      if (kernel.kind == KernelKind::Probabilistic) {
        if (w == 0.0) continue;
        for (int l = 0; l < g.n_s(); ++l) {
          const double beta = kernel.probabilistic(g.a(j), g.s(k), g.s(l));
          if (beta != 0.0) out.col(l) += w * beta * col;
        }
      } else {
        // local kernels integrate over age only
        const double beta = kernel.local(g.a(j), g.s(k));
        if (beta != 0.0 && g.wa()(j) != 0.0) out.col(k) += g.wa()(j) * beta * col;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

TransportOperator::TransportOperator(const ModelSpec& spec, GridPtr grid, const CharacteristicsTable& table)
    : grid_(std::move(grid)) {
  check_kernel(spec);
  const Grid& g = *grid_;
  const int na = g.n_a(), ns = g.n_s(), nas = g.n_as();
  const double dt = g.dt();
  const double tol = 1e-12 * dt;

  std::vector<double> G(ns);
  for (int k = 0; k < ns; ++k) G[k] = table.growth_time(g.s(k));

  std::vector<Triplet> p, e;
  p.reserve(4 * nas);
  for (int k = 1; k + 1 < ns; ++k) {
    const double s = g.s(k);
    const double gs = spec.growth(s);
    if (!(gs > 0.0)) continue;
    // foot of the characteristic one step back, shared by all ages
    const bool interior_foot = G[k] >= dt - tol;
    const double sf = interior_foot ? table.inverse_growth(std::max(0.0, G[k] - dt)) : 0.0;
    for (int j = 0; j + 1 < na; ++j) {
      const double a = g.a(j);
      const int c = g.index(j, k);
      if (a >= dt - tol && interior_foot) {
        const double af = std::max(0.0, a - dt);
        const double factor = table.survival_ratio(a, s, dt) * spec.growth(sf) / gs;
        if (factor == 0.0) continue;
        const auto [ja, u] = locate(af, g.da(), na);
        const auto [ks, v] = locate(sf, g.ds(), ns);
        const double wts[4] = {(1 - u) * (1 - v), (1 - u) * v, u * (1 - v), u * v};
        const int src[4] = {g.index(ja, ks), g.index(ja, ks + 1), g.index(ja + 1, ks), g.index(ja + 1, ks + 1)};
        for (int q = 0; q < 4; ++q) {
          if (wts[q] != 0.0) p.emplace_back(c, src[q], factor * wts[q]);
        }
      } else if (a < dt - tol && G[k] >= a - tol) {
        // born a time units ago at size G^-1(G(s) - a)
        const double sb = a > 0.0 ? table.inverse_growth(std::max(0.0, G[k] - a)) : s;
        const double factor = a > 0.0 ? table.survival_ratio(a, s, a) * spec.growth(sb) / gs : 1.0;
        if (factor == 0.0) continue;
        const auto [kb, v] = locate(sb, g.ds(), ns);
        if (1 - v != 0.0) e.emplace_back(c, kb, factor * (1 - v));
        if (v != 0.0) e.emplace_back(c, kb + 1, factor * v);
      }
    }
  }
  P_ = sparse(nas, nas, p);
  E_ = sparse(nas, ns, e);

  std::vector<Triplet> phi, col;
  const auto& kern = spec.fertility;
  if (kern.kind == KernelKind::Probabilistic) {
    for (int k = 0; k < ns; ++k) {
      const double v = kern.newborn_size(g.s(k));
      if (v != 0.0) phi.emplace_back(k, 0, v);
    }
    for (int j = 0; j < na; ++j) {
      const double b = kern.age_factor(g.a(j));
      if (b == 0.0) continue;
      for (int k = 0; k < ns; ++k) {
        const double w = g.wa()(j) * g.ws()(k) * b * kern.parent_size(g.s(k));
        if (w != 0.0) col.emplace_back(0, g.index(j, k), w);
      }
    }
    Phi_ = sparse(ns, 1, phi);
    C_ = sparse(1, nas, col);
  } else {
    for (int k = 0; k < ns; ++k) phi.emplace_back(k, k, 1.0);
    for (int j = 0; j < na; ++j) {
      for (int k = 0; k < ns; ++k) {
        const double w = g.wa()(j) * kern.local(g.a(j), g.s(k));
        if (w != 0.0) col.emplace_back(k, g.index(j, k), w);
      }
    }
    Phi_ = sparse(ns, ns, phi);
    C_ = sparse(ns, nas, col);
  }
  Pt_ = P_.transpose();
  Et_ = E_.transpose();
  Phit_ = Phi_.transpose();
  Ct_ = C_.transpose();

  w_ = g.was();
  w_inv_ = Eigen::VectorXd::Zero(nas);
  for (int c = 0; c < nas; ++c) {
    if (w_(c) > 0.0) w_inv_(c) = 1.0 / w_(c);
  }
}

Eigen::MatrixXd TransportOperator::newborn(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd r = y * Ct_;
  return r * Phit_;
}

Eigen::MatrixXd TransportOperator::apply(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd out = y * Pt_;
  if (E_.nonZeros() > 0 && C_.nonZeros() > 0) out += newborn(y) * Et_;
  return out;
}

Eigen::MatrixXd TransportOperator::apply_adjoint(const Eigen::MatrixXd& q) const {
  const Eigen::MatrixXd z = q * w_.asDiagonal();
  Eigen::MatrixXd out = z * P_;
  if (E_.nonZeros() > 0 && C_.nonZeros() > 0) {
    const Eigen::MatrixXd inflow = z * E_;
    const Eigen::MatrixXd r = inflow * Phi_;
    out += r * C_;
  }
  return out * w_inv_.asDiagonal();
}

// ---------------------------------------------------------------------------

DiffusionOperator::DiffusionOperator(const ModelSpec& spec, GridPtr grid) : grid_(std::move(grid)) {
  const Grid& g = *grid_;
  const int n = g.n_x();
  const double h = g.dx();
  dirichlet_ = spec.degenerate();
  lower_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  upper_.assign(n, 0.0);
  const auto& d = spec.diffusion;
  if (!dirichlet_) {
    for (int i = 0; i < n; ++i) {
      const double w = g.wx()(i);
      const double cm = i > 0 ? d.conductivity(g.x(i) - 0.5 * h) / h : 0.0;
      const double cp = i + 1 < n ? d.conductivity(g.x(i) + 0.5 * h) / h : 0.0;
      lower_[i] = cm / w;
      upper_[i] = cp / w;
      diag_[i] = -(cm + cp) / w;
    }
  } else {
    for (int i = 1; i + 1 < n; ++i) {
      const double w = g.wx()(i);
      const double cm = d.gamma(g.x(i) - 0.5 * h) / h;
      const double cp = d.gamma(g.x(i) + 0.5 * h) / h;
      lower_[i] = i > 1 ? cm / w : 0.0;
      upper_[i] = i + 2 < n ? cp / w : 0.0;
      diag_[i] = -(cm + cp) / w;
    }
  }
  D_ = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    D_(i, i) = diag_[i];
    if (i > 0) D_(i, i - 1) = lower_[i];
    if (i + 1 < n) D_(i, i + 1) = upper_[i];
  }
  for (const double v : diag_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::SingularSystem, "non-finite diffusion coefficient");
  }
  factor(g.dt());
}

void DiffusionOperator::factor(double dt) const {
  const int n = grid_->n_x();
  cprime_.assign(n, 0.0);
  denom_.assign(n, 0.0);
  const int lo = dirichlet_ ? 1 : 0, hi = dirichlet_ ? n - 2 : n - 1;
  double prev_c = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double a = i > lo ? -0.5 * dt * lower_[i] : 0.0;
    const double b = 1.0 - 0.5 * dt * diag_[i];
    const double c = i < hi ? -0.5 * dt * upper_[i] : 0.0;
    const double den = b - a * prev_c;
    if (!std::isfinite(den) || std::abs(den) < 1e-300) {
      throw Error(ErrorKind::SingularSystem, "tridiagonal solve broke down at row " + std::to_string(i));
    }
    denom_[i] = den;
    cprime_[i] = c / den;
    prev_c = cprime_[i];
  }
  cached_dt_ = dt;
}

void DiffusionOperator::apply(Eigen::MatrixXd& y) const { apply(y, grid_->dt()); }

void DiffusionOperator::apply(Eigen::MatrixXd& y, double dt) const {
  if (dt != cached_dt_) {
    DiffusionOperator copy(*this);
    copy.factor(dt);
    copy.apply(y, dt);
    return;
  }
  const int n = grid_->n_x();
  const int lo = dirichlet_ ? 1 : 0, hi = dirichlet_ ? n - 2 : n - 1;
  std::vector<double> rhs(n);
  const double half = 0.5 * dt;
  for (Eigen::Index col = 0; col < y.cols(); ++col) {
    double* u = y.col(col).data();
    for (int i = lo; i <= hi; ++i) {
      double du = diag_[i] * u[i];
      if (i > lo) du += lower_[i] * u[i - 1];
      if (i < hi) du += upper_[i] * u[i + 1];
      rhs[i] = u[i] + half * du;
    }
    // forward sweep
    double prev = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double a = i > lo ? -half * lower_[i] : 0.0;
      prev = (rhs[i] - a * prev) / denom_[i];
      rhs[i] = prev;
    }
    u[hi] = rhs[hi];
    for (int i = hi - 1; i >= lo; --i) u[i] = rhs[i] - cprime_[i] * u[i + 1];
    if (dirichlet_) {
      u[0] = 0.0;
      u[n - 1] = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------

ForwardSolver::ForwardSolver(const ModelSpec& spec, const GridConfig& grid)
    : ForwardSolver(spec, std::make_shared<const Grid>(spec, grid), std::make_shared<const CharacteristicsTable>(spec)) {}

ForwardSolver::ForwardSolver(const ModelSpec& spec, GridPtr grid, std::shared_ptr<const CharacteristicsTable> table)
    : spec_(spec),
      grid_(std::move(grid)),
      table_(std::move(table)),
      transport_(spec_, grid_, *table_),
      diffusion_(spec_, grid_) {
  try {
    mask_ = control_mask(*grid_, spec_.control);
  } catch (const Error&) {
    mask_.reset();
  }
}

const ControlMask& ForwardSolver::mask() const {
  if (!mask_) throw Error(ErrorKind::EmptyRegion, "no grid node inside the control region");
  return *mask_;
}

double ForwardSolver::mass(const Eigen::MatrixXd& y) const {
  return grid_->wx().dot(y * grid_->was());
}

Eigen::MatrixXd ForwardSolver::step(const Eigen::MatrixXd& y, const Eigen::MatrixXd* u, SplitOrder order) const {
  Eigen::MatrixXd next = transport_.apply(y);
  const double dt = grid_->dt();
  auto add_control = [&] {
    const auto& m = mask();
    next += dt * (m.x.asDiagonal() * (*u) * m.as.asDiagonal());
  };
  if (u && order == SplitOrder::ControlBeforeDiffusion) add_control();
  diffusion_.apply(next);
  if (u && order == SplitOrder::Standard) add_control();
  return next;
}

ForwardRun ForwardSolver::run(const StateField& y0, const std::vector<Eigen::MatrixXd>& controls,
                              const ForwardOptions& options) const {
  const Grid& g = *grid_;
  if (!y0.grid || !(y0.grid == grid_ || y0.grid->same_geometry(g))) {
    throw Error(ErrorKind::GridMismatch, "initial field is not on the solver grid");
  }
  const int N = g.steps();
  if (!controls.empty() && static_cast<int>(controls.size()) != N) {
    throw Error(ErrorKind::GridMismatch, "control needs one field per time step");
  }
  ForwardRun out;
  out.config = {{"spec", spec_.to_json()}, {"grid", g.config().to_json()}, {"steps", N}, {"T", g.T()}};
  Eigen::MatrixXd y = y0.values;
  auto record = [&] {
    if (options.record_trace) out.newborn_trace.push_back(y.leftCols(g.n_s()));
    if (options.record_mass) out.mass_history.push_back(mass(y));
    if (options.keep_states) out.states.push_back(y);
  };
  record();
  for (int n = 0; n < N; ++n) {
    y = step(y, controls.empty() ? nullptr : &controls[n], options.order);
    record();
  }
  out.terminal = StateField(grid_, std::move(y), g.T());
  return out;
}

}  // namespace popctrl
