#include "popctrl/adjoint_solver.hpp"

#include <cmath>

#include "popctrl/error.hpp"

namespace popctrl {

std::string to_string(VanishingStatus s) {
  switch (s) {
    case VanishingStatus::Pass: return "PASS";
    case VanishingStatus::Fail: return "FAIL";
    case VanishingStatus::NotApplicable: return "NOT-APPLICABLE";
  }
  return "?";
}

nlohmann::json VanishingReport::to_json() const {
  return {{"status", to_string(status)},
          {"pass", status == VanishingStatus::Pass},
          {"max_abs", max_abs},
          {"region", {{"s_above", s_lower}, {"t_above", t_lower}, {"t_max", T}}},
          {"samples", samples},
          {"reason", reason}};
}

AdjointSolver::AdjointSolver(const ForwardSolver& forward) : fwd_(forward) {}

Eigen::MatrixXd AdjointSolver::step(const Eigen::MatrixXd& q) const {
  Eigen::MatrixXd d = q;
  fwd_.diffusion().apply(d);
  return fwd_.transport().apply_adjoint(d);
}

AdjointRun AdjointSolver::run(const StateField& q0, const AdjointOptions& options) const {
  const Grid& g = *fwd_.grid();
  if (!q0.grid || !(q0.grid == fwd_.grid() || q0.grid->same_geometry(g))) {
    throw Error(ErrorKind::GridMismatch, "adjoint data is not on the solver grid");
  }
  const ControlMask m = options.observe ? control_mask(g, *options.observe) : fwd_.mask();
  const int N = g.steps();
  const double dt = g.dt();

  AdjointRun out;
  Eigen::MatrixXd q = q0.values;
  // structural zeros: a = A, s = S and the Dirichlet rows
  for (int k = 0; k < g.n_s(); ++k) q.col(g.index(g.n_a() - 1, k)).setZero();
  for (int j = 0; j < g.n_a(); ++j) q.col(g.index(j, g.n_s() - 1)).setZero();
  if (g.weight_kind() == WeightKind::InverseSigma) {
    q.row(0).setZero();
    q.row(g.n_x() - 1).setZero();
  }
  out.q0_norm = std::sqrt(std::max(0.0, weighted_dot(g, q, q)));

  auto observed = [&](const Eigen::MatrixXd& f) {
    const Eigen::MatrixXd mf = m.x.asDiagonal() * f * m.as.asDiagonal();
    return dt * weighted_dot(g, mf, mf);
  };
  double energy = 0.0;
  out.observed_energy.push_back(0.0);
  auto record = [&] {
    if (options.record_trace) out.renewal_trace.push_back(q.leftCols(g.n_s()));
    if (options.keep_states) out.states.push_back(q);
  };
  record();
  for (int n = 0; n < N; ++n) {
    energy += observed(q);
    out.observed_energy.push_back(energy);
    q = step(q);
    record();
  }
  out.terminal = StateField(fwd_.grid(), std::move(q), g.T());
  return out;
}

Eigen::MatrixXd AdjointSolver::nonlocal_source(const Eigen::MatrixXd& trace) const {
  const Grid& g = *fwd_.grid();
  const auto& kern = fwd_.spec().fertility;
  if (g.weight_kind() == WeightKind::InverseSigma && kern.kind == KernelKind::Probabilistic) {
    throw Error(ErrorKind::KernelMismatch, "the degenerate model takes a local birth kernel");
  }
  if (trace.rows() != g.n_x() || trace.cols() != g.n_s()) {
    throw Error(ErrorKind::GridMismatch, "trace must be n_x by n_s");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.n_x(), g.n_as());
  if (kern.kind == KernelKind::Probabilistic) {
    Eigen::VectorXd profile(g.n_s());
    for (int u = 0; u < g.n_s(); ++u) profile(u) = g.ws()(u) * kern.newborn_size(g.s(u));
    const Eigen::VectorXd pooled = trace * profile;
    for (int j = 0; j < g.n_a(); ++j) {
      const double b = kern.age_factor(g.a(j));
      if (b == 0.0) continue;
      for (int k = 0; k < g.n_s(); ++k) out.col(g.index(j, k)) = b * kern.parent_size(g.s(k)) * pooled;
    }
  } else {
    for (int j = 0; j < g.n_a(); ++j) {
      for (int k = 0; k < g.n_s(); ++k) {
        const double beta = kern.local(g.a(j), g.s(k));
        if (beta != 0.0) out.col(g.index(j, k)) = beta * trace.col(k);
      }
    }
  }
  return out;
}

VanishingReport vanishing_check(const AdjointRun& run, const ForwardSolver& forward, const CriticalSizes& crit,
                                const TransitTimes& times, double margin_cells, double tol) {
  if (!crit.alpha) {
    throw Error(ErrorKind::MissingCriticalSize, "alpha* does not exist (a1 >= G(s2))");
  }
  const Grid& g = *forward.grid();
  const auto& spec = forward.spec();
  const double a1 = spec.control.a_lo, a2 = spec.control.a_hi;
  const double a_hat = spec.fertility.min_fertile_age;

  VanishingReport rep;
  rep.s_lower = *crit.alpha + margin_cells * g.ds();
  rep.t_lower = a1 + times.s2_star + margin_cells * g.dt();
  rep.T = g.T();
  if (!(a1 < a_hat)) {
    rep.reason = "hypothesis a1 < a_hat fails";
    return rep;
  }
  if (!(times.s2_star < std::min(a2 - a1, a_hat - a1))) {
    rep.reason = "hypothesis S2* < min(a2 - a1, a_hat - a1) fails";
    return rep;
  }
  const double scale = run.q0_norm > 0.0 ? run.q0_norm : 1.0;
  const double eps_t = 1e-12 * std::max(1.0, rep.T);
  for (std::size_t n = 0; n < run.renewal_trace.size(); ++n) {
    const double t = g.dt() * static_cast<double>(n);
    if (t <= rep.t_lower + eps_t || t > rep.T + eps_t) continue;
    const auto& tr = run.renewal_trace[n];
    for (int k = 0; k < g.n_s(); ++k) {
      const double s = g.s(k);
      if (s <= rep.s_lower + 1e-12 || s >= g.max_size()) continue;
      rep.max_abs = std::max(rep.max_abs, tr.col(k).cwiseAbs().maxCoeff() / scale);
      rep.samples += static_cast<std::size_t>(g.n_x());
    }
  }
  if (rep.samples == 0) {
    rep.reason = "empty check region";
    return rep;
  }
  rep.status = rep.max_abs <= tol ? VanishingStatus::Pass : VanishingStatus::Fail;
  return rep;
}

}  // namespace popctrl
