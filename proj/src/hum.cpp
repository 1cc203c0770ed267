#include "popctrl/hum.hpp"

#include <cmath>
#include <limits>

#include "popctrl/error.hpp"

namespace popctrl {
namespace {

void zero_structure(const Grid& g, Eigen::MatrixXd& q) {
  for (int k = 0; k < g.n_s(); ++k) q.col(g.index(g.n_a() - 1, k)).setZero();
  for (int j = 0; j < g.n_a(); ++j) q.col(g.index(j, g.n_s() - 1)).setZero();
  if (g.weight_kind() == WeightKind::InverseSigma) {
    q.row(0).setZero();
    q.row(g.n_x() - 1).setZero();
  }
}

double control_dot(const Grid& g, const std::vector<Eigen::MatrixXd>& u, const std::vector<Eigen::MatrixXd>& v) {
  double s = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) s += g.dt() * weighted_dot(g, u[n], v[n]);
  return s;
}

}  // namespace

void HumOptions::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidConfig, "HUM penalty epsilon must be > 0");
  if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw Error(ErrorKind::InvalidConfig, "cg_tol must lie in (0, 1)");
  if (cg_max_iter < 1) throw Error(ErrorKind::InvalidConfig, "cg_max_iter must be >= 1");
}

nlohmann::json HumResult::to_json() const {
  nlohmann::json j = {{"epsilon", epsilon},
                      {"initial_norm", initial_norm},
                      {"free_terminal_norm", free_terminal_norm},
                      {"terminal_norm", terminal_norm},
                      {"terminal_norm_ratio", terminal_norm_ratio()},
                      {"control_cost", control_cost},
                      {"cg_iters", cg_iters},
                      {"gramian_applications", gramian_applications},
                      {"converged", converged}};
  j["residual_history"] = residual_history;
  j["energy_history"] = energy_history;
  return j;
}

HumSolver::HumSolver(const ForwardSolver& forward) : fwd_(forward), adj_(forward) {}

std::vector<Eigen::MatrixXd> HumSolver::adjoint_states(const Eigen::MatrixXd& phi) const {
  const Grid& g = *fwd_.grid();
  const int N = g.steps();
  std::vector<Eigen::MatrixXd> qs;
  qs.reserve(N);
  Eigen::MatrixXd q = phi;
  zero_structure(g, q);
  for (int k = 0; k < N; ++k) {
    qs.push_back(q);
    if (k + 1 < N) q = adj_.step(q);
  }
  return qs;
}

std::vector<Eigen::MatrixXd> HumSolver::control_from(const Eigen::MatrixXd& phi) const {
  const auto& m = fwd_.mask();
  auto qs = adjoint_states(phi);
  const int N = static_cast<int>(qs.size());
  std::vector<Eigen::MatrixXd> u(N);
  for (int n = 0; n < N; ++n) u[n] = m.x.asDiagonal() * qs[N - 1 - n] * m.as.asDiagonal();
  return u;
}

Eigen::MatrixXd HumSolver::control_to_terminal(const std::vector<Eigen::MatrixXd>& u, SplitOrder order) const {
  const Grid& g = *fwd_.grid();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(g.n_x(), g.n_as());
  for (std::size_t n = 0; n < u.size(); ++n) y = fwd_.step(y, &u[n], order);
  return y;
}

Eigen::MatrixXd HumSolver::gramian(const Eigen::MatrixXd& phi) const { return control_to_terminal(control_from(phi)); }

StateField HumSolver::gramian_apply(const StateField& phi) const {
  if (!phi.grid || !(phi.grid == fwd_.grid() || phi.grid->same_geometry(*fwd_.grid()))) {
    throw Error(ErrorKind::GridMismatch, "Gramian data is not on the solver grid");
  }
  return StateField(fwd_.grid(), gramian(phi.values), phi.time);
}

Eigen::MatrixXd HumSolver::occupancy() const {
  // time the backward characteristic through each node spends in the control box
  const Grid& g = *fwd_.grid();
  const auto& tab = fwd_.table();
  const auto& c = fwd_.spec().control;
  Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(g.n_x(), g.n_as());
  for (int k = 0; k < g.n_s(); ++k) {
    const double G = tab.growth_time(g.s(k));
    for (int j = 0; j < g.n_a(); ++j) {
      double time = 0.0;
      for (int l = 0; l < g.steps(); ++l) {
        const double a = g.a(j) - l * g.dt();
        const double tau = G - l * g.dt();
        if (a < 0.0 || tau < 0.0) break;
        const double s = tab.inverse_growth(tau);
        if (a >= c.a_lo && a <= c.a_hi && s >= c.s_lo && s <= c.s_hi) time += g.dt();
      }
      occ.col(g.index(j, k)).setConstant(time);
    }
  }
  return occ;
}

HumResult HumSolver::solve_control(const StateField& y0, const HumOptions& opts) const {
  opts.validate();
  const Grid& g = *fwd_.grid();
  auto dot = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return weighted_dot(g, a, b); };

  HumResult res;
  res.epsilon = opts.epsilon;
  ForwardOptions quiet;
  quiet.record_trace = false;
  quiet.record_mass = false;
  const Eigen::MatrixXd y_free = fwd_.run(y0, {}, quiet).terminal.values;
  res.initial_norm = std::sqrt(std::max(0.0, dot(y0.values, y0.values)));
  res.free_terminal_norm = std::sqrt(std::max(0.0, dot(y_free, y_free)));

  const Eigen::MatrixXd b = -y_free;
  const double b_norm = res.free_terminal_norm;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(g.n_x(), g.n_as());

  if (b_norm > 0.0) {
    Eigen::MatrixXd precond;
    if (opts.diagonal_preconditioner) precond = (occupancy().array() + opts.epsilon).inverse().matrix();
    auto apply_precond = [&](const Eigen::MatrixXd& r) -> Eigen::MatrixXd {
      return opts.diagonal_preconditioner ? Eigen::MatrixXd(r.cwiseProduct(precond)) : r;
    };
    Eigen::MatrixXd r = b;
    Eigen::MatrixXd z = apply_precond(r);
    Eigen::MatrixXd p = z;
    double rz = dot(r, z);
    res.converged = false;
    for (int it = 1; it <= opts.cg_max_iter; ++it) {
      Eigen::MatrixXd Ap = gramian(p) + opts.epsilon * p;
      ++res.gramian_applications;
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0) || !std::isfinite(pAp)) break;
      const double alpha = rz / pAp;
      phi += alpha * p;
      r -= alpha * Ap;
      res.cg_iters = it;
      const double rel = std::sqrt(std::max(0.0, dot(r, r))) / b_norm;
      if (opts.record_history) {
        res.residual_history.push_back(rel);
        res.energy_history.push_back(-0.5 * dot(r + b, phi));
      }
      if (rel <= opts.cg_tol) {
        res.converged = true;
        break;
      }
      z = apply_precond(r);
      const double rz_new = dot(r, z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
  }

  res.phi = StateField(fwd_.grid(), phi, 0.0);
  if (b_norm > 0.0) {
    res.control = control_from(phi);
  } else {
    res.control.assign(g.steps(), Eigen::MatrixXd::Zero(g.n_x(), g.n_as()));
  }
  res.control_cost = control_dot(g, res.control, res.control);
  Eigen::MatrixXd y_T = fwd_.run(y0, res.control, quiet).terminal.values;
  res.terminal_norm = std::sqrt(std::max(0.0, dot(y_T, y_T)));
  res.terminal = StateField(fwd_.grid(), std::move(y_T), g.T());
  return res;
}

double adjointness_check(const ForwardSolver& forward, int trials, std::uint64_t seed, SplitOrder order) {
  const GridPtr& grid = forward.grid();
  const Grid& g = *grid;
  HumSolver hum(forward);
  const auto& m = forward.mask();
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t base = seed * 1000003ULL + static_cast<std::uint64_t>(t) * 7919ULL;
    std::vector<Eigen::MatrixXd> u(g.steps());
    for (int n = 0; n < g.steps(); ++n) {
      u[n] = m.x.asDiagonal() * random_smooth_field(grid, base + 1 + n).values * m.as.asDiagonal();
    }
    const Eigen::MatrixXd qT = random_smooth_field(grid, base).values;
    const Eigen::MatrixXd Fu = hum.control_to_terminal(u, order);
    const auto Fstar = hum.control_from(qT);
    const double lhs = weighted_dot(g, Fu, qT);
    const double rhs = control_dot(g, u, Fstar);
    const double scale = std::sqrt(weighted_dot(g, Fu, Fu) * weighted_dot(g, qT, qT));
    const double defect = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
    worst = std::max(worst, defect);
  }
  return worst;
}

double gramian_symmetry_defect(const HumSolver& hum, int pairs, std::uint64_t seed) {
  const GridPtr& grid = hum.forward().grid();
  const Grid& g = *grid;
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const auto phi = random_smooth_field(grid, seed + 2 * p);
    const auto psi = random_smooth_field(grid, seed + 2 * p + 1);
    const auto Lphi = hum.gramian_apply(phi);
    const auto Lpsi = hum.gramian_apply(psi);
    const double a = weighted_dot(g, Lphi.values, psi.values);
    const double b = weighted_dot(g, phi.values, Lpsi.values);
    const double scale = norm(Lphi) * norm(psi) + norm(phi) * norm(Lpsi);
    if (scale > 0.0) worst = std::max(worst, std::abs(a - b) / scale);
  }
  return worst;
}

ObservabilityResult observability_ratio(const ForwardSolver& forward, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorKind::InvalidConfig, "n_samples must be >= 1");
  AdjointSolver adj(forward);
  AdjointOptions opts;
  opts.record_trace = false;
  ObservabilityResult out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    auto q0 = random_smooth_field(forward.grid(), seed + static_cast<std::uint64_t>(i));
    const double nq = norm(q0);
    if (nq > 0.0) q0.values /= nq;
    const auto run = adj.run(q0, opts);
    const double final_sq = inner_product(run.terminal, run.terminal);
    const double ratio = final_sq > 0.0 ? run.observed_energy.back() / final_sq
                                        : std::numeric_limits<double>::infinity();
    out.samples.push_back(ratio);
    out.min_ratio = std::min(out.min_ratio, ratio);
  }
  return out;
}

}  // namespace popctrl
