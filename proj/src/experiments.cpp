#include "popctrl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <Eigen/LU>

#include "popctrl/error.hpp"
#include "popctrl/quadrature.hpp"

namespace popctrl {
namespace {

constexpr const char* kVersion = "popctrl 0.1";

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::shared_ptr<const Grid> make_grid(const ModelSpec& spec, GridConfig cfg, double T) {
  cfg.T = T;
  return std::make_shared<const Grid>(spec, cfg);
}

nlohmann::json hum_options_json(const HumOptions& o) {
  return {{"cg_tol", o.cg_tol}, {"cg_max_iter", o.cg_max_iter}, {"diagonal_preconditioner", o.diagonal_preconditioner}};
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json ExperimentReport::to_json() const {
  return {{"kind", kind}, {"fingerprint", fingerprint}, {"rows", rows}, {"metadata", metadata}, {"environment", environment}};
}

std::string ExperimentReport::to_csv() const {
  std::vector<std::string> cols;
  for (const auto& row : rows) {
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
    }
  }
  std::ostringstream os;
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ",";
      if (row.contains(cols[c])) os << csv_cell(row.at(cols[c]));
    }
    os << "\n";
  }
  return os.str();
}

void ExperimentReport::write(const std::string& prefix) const {
  std::ofstream j(prefix + ".json");
  std::ofstream c(prefix + ".csv");
  if (!j || !c) throw Error(ErrorKind::InvalidConfig, "cannot write report to " + prefix);
  j << to_json().dump(2) << "\n";
  c << to_csv();
}

std::string fingerprint(const ModelSpec& spec, const GridConfig& grid, const nlohmann::json& extra) {
  const std::string text = spec.to_json().dump() + "|" + grid.to_json().dump() + "|" + extra.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------

ExperimentReport sweep_time(const ModelSpec& spec, const GridConfig& grid, std::vector<double> T_list,
                            std::vector<double> eps_list, const SweepOptions& options) {
  if (T_list.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one horizon T");
  if (eps_list.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one penalty eps");
  for (double T : T_list) {
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidConfig, "horizons must be > 0");
  }
  std::sort(T_list.begin(), T_list.end());
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  options.hum.validate();

  struct Task {
    double T, eps;
  };
  std::vector<Task> tasks;
  for (double T : T_list) {
    for (double e : eps_list) tasks.push_back({T, e});
  }
  std::vector<nlohmann::json> rows(tasks.size());
  auto table = std::make_shared<const CharacteristicsTable>(spec);

  parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
    const auto [T, eps] = tasks[i];
    nlohmann::json row = {{"T", T}, {"epsilon", eps}};
    try {
      ForwardSolver fwd(spec, make_grid(spec, grid, T), table);
      row["steps"] = fwd.grid()->steps();
      row["T_effective"] = fwd.grid()->T();
      const auto y0 = random_smooth_field(fwd.grid(), options.y0.seed, options.y0.shape);
      HumOptions ho = options.hum;
      ho.epsilon = eps;
      ho.record_history = false;
      const auto res = HumSolver(fwd).solve_control(y0, ho);
      row["terminal_norm_ratio"] = res.terminal_norm_ratio();
      row["control_cost"] = res.control_cost;
      row["cg_iters"] = res.cg_iters;
      row["converged"] = res.converged;
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "failed";
      row["error"] = e.what();
    }
    rows[i] = std::move(row);
  });

  ExperimentReport rep;
  rep.kind = "sweep_time";
  rep.rows = rows;
  rep.metadata["threshold"] = minimal_time(spec);
  rep.metadata["kernel"] = to_string(spec.fertility.kind);
  rep.metadata["failed_rows"] = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r["status"] != "ok"; });

  // soft check: for fixed eps the terminal ratio should not grow with T
  nlohmann::json flags = nlohmann::json::array();
  for (double e : eps_list) {
    double prev = std::numeric_limits<double>::quiet_NaN();
    double prev_T = 0.0;
    for (const auto& r : rows) {
      if (r["epsilon"].get<double>() != e || r["status"] != "ok") continue;
      const double cur = r["terminal_norm_ratio"].get<double>();
      const double T = r["T"].get<double>();
      if (std::isfinite(prev) && cur > prev * (1.0 + options.monotone_tol) + options.hum.cg_tol) {
        flags.push_back({{"epsilon", e}, {"T_from", prev_T}, {"T_to", T}, {"from", prev}, {"to", cur}});
      }
      prev = cur;
      prev_T = T;
    }
  }
  rep.metadata["monotone_in_T"] = flags.empty();
  rep.metadata["monotonicity_flags"] = flags;
  rep.metadata["monotone_tol"] = options.monotone_tol;

  const nlohmann::json params = {{"T_list", T_list}, {"eps_list", eps_list}, {"seed", options.y0.seed},
                                 {"hum", hum_options_json(options.hum)}};
  rep.fingerprint = fingerprint(spec, grid, params);
  rep.environment = {{"version", kVersion}, {"grid", grid.to_json()}, {"seed", options.y0.seed},
                     {"hum", hum_options_json(options.hum)}, {"threads", options.threads}};
  return rep;
}

// ---------------------------------------------------------------------------

ModelSpec matched_local_kernel(const ModelSpec& prob) {
  if (prob.fertility.kind != KernelKind::Probabilistic) {
    throw Error(ErrorKind::KernelMismatch, "matching starts from a probabilistic kernel");
  }
  const double S = prob.max_size();
  const auto& k = prob.fertility;
  const double mean_parent = integrate([&](double s) { return k.parent_size(s); }, 0.0, S, k.parent_size.breakpoints()) / S;
  const double newborn_total = integrate([&](double s) { return k.newborn_size(s); }, 0.0, S, k.newborn_size.breakpoints());
  ModelSpec out = prob;
  out.fertility.kind = KernelKind::Local;
  out.fertility.age = k.age.scaled(mean_parent * newborn_total);
  out.fertility.parent_size = RateFunction::constant(1.0);
  out.fertility.newborn_size = RateFunction::constant(1.0);
  return out;
}

ExperimentReport compare_kernels(const KernelCase& prob, const KernelCase& local, std::vector<double> T_list,
                                 const CompareOptions& options) {
  const auto gp = prob.grid, gl = local.grid;
  if (gp.n_x != gl.n_x || gp.n_a != gl.n_a || gp.n_s != gl.n_s || gp.dt != gl.dt) {
    throw Error(ErrorKind::GeometryMismatch, "kernel comparison needs identical grids");
  }
  const auto& a = prob.spec;
  const auto& b = local.spec;
  if (a.growth.rate.to_json() != b.growth.rate.to_json() || a.max_size() != b.max_size() ||
      a.max_age() != b.max_age() || !(a.control == b.control) || a.diffusion.kind != b.diffusion.kind ||
      a.diffusion.length != b.diffusion.length || a.mortality.age_rate.to_json() != b.mortality.age_rate.to_json() ||
      a.mortality.size_rate.to_json() != b.mortality.size_rate.to_json()) {
    throw Error(ErrorKind::GeometryMismatch, "kernel comparison needs shared growth, mortality and geometry");
  }
  if (a.fertility.kind != KernelKind::Probabilistic || b.fertility.kind == KernelKind::Probabilistic) {
    throw Error(ErrorKind::KernelMismatch, "compare one probabilistic and one local kernel");
  }
  if (T_list.empty()) throw Error(ErrorKind::InvalidConfig, "comparison needs at least one horizon T");
  std::sort(T_list.begin(), T_list.end());

  SweepOptions so = options.sweep;
  const auto rp = sweep_time(a, gp, T_list, {options.epsilon}, so);
  const auto rl = sweep_time(b, gl, T_list, {options.epsilon}, so);

  auto knee = [&](const nlohmann::json& rows) -> nlohmann::json {
    const auto& last = rows.back();
    if (last["status"] != "ok") return nullptr;
    const double plateau = last["control_cost"].get<double>();
    for (const auto& r : rows) {
      if (r["status"] == "ok" && r["control_cost"].get<double>() <= options.knee_factor * plateau) return r["T"];
    }
    return nullptr;
  };

  ExperimentReport rep;
  rep.kind = "compare_kernels";
  for (std::size_t i = 0; i < T_list.size(); ++i) {
    nlohmann::json row = {{"T", T_list[i]}};
    for (const auto& [tag, r] : {std::pair{"probabilistic", &rp}, std::pair{"local", &rl}}) {
      const auto& src = r->rows[i];
      row[std::string(tag) + "_cost"] = src.value("control_cost", nlohmann::json(nullptr));
      row[std::string(tag) + "_terminal_ratio"] = src.value("terminal_norm_ratio", nlohmann::json(nullptr));
      row[std::string(tag) + "_status"] = src["status"];
    }
    rep.rows.push_back(row);
  }
  const auto tt = transit_times(a);
  const double a1 = a.control.a_lo;
  const double gap = std::max(a1 + tt.s2_star, tt.s1_star) + std::max(tt.s1_star, tt.s2_star) -
                     (a1 + tt.s1_star + tt.s2_star);
  rep.metadata["threshold_probabilistic"] = minimal_time(a, KernelKind::Probabilistic);
  rep.metadata["threshold_local"] = minimal_time(b, KernelKind::Local);
  rep.metadata["analytic_gap"] = gap;
  rep.metadata["epsilon"] = options.epsilon;
  rep.metadata["knee_factor"] = options.knee_factor;
  const auto kp = knee(rp.rows), kl = knee(rl.rows);
  rep.metadata["knee_probabilistic"] = kp;
  rep.metadata["knee_local"] = kl;
  rep.metadata["local_knee_first"] = !kp.is_null() && !kl.is_null() && kl.get<double>() < kp.get<double>();

  const nlohmann::json params = {{"T_list", T_list}, {"epsilon", options.epsilon}, {"local", b.to_json()},
                                 {"seed", so.y0.seed}, {"hum", hum_options_json(so.hum)}};
  rep.fingerprint = fingerprint(a, gp, params);
  rep.environment = {{"version", kVersion}, {"grid", gp.to_json()}, {"seed", so.y0.seed},
                     {"hum", hum_options_json(so.hum)}, {"threads", so.threads}};
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport certify_vanishing(const ModelSpec& spec, const std::vector<GridConfig>& ladder, double T,
                                   const VanishingOptions& options) {
  if (ladder.empty()) throw Error(ErrorKind::InvalidConfig, "grid ladder is empty");
  const auto crit = critical_sizes(spec);
  if (!crit.alpha) throw Error(ErrorKind::MissingCriticalSize, "alpha* does not exist (a1 >= G(s2))");
  const auto times = transit_times(spec);
  auto table = std::make_shared<const CharacteristicsTable>(spec);

  ExperimentReport rep;
  rep.kind = "certify_vanishing";
  std::vector<double> maxima;
  std::string status = "PASS";
  std::string reason;
  for (const auto& cfg : ladder) {
    ForwardSolver fwd(spec, make_grid(spec, cfg, T), table);
    AdjointSolver adj(fwd);
    AdjointOptions ao;
    ao.record_trace = true;
    const auto run = adj.run(random_smooth_field(fwd.grid(), options.seed), ao);
    const auto v = vanishing_check(run, fwd, crit, times, options.margin_cells, options.tol);
    const Grid& g = *fwd.grid();
    rep.rows.push_back({{"n_x", g.n_x()}, {"n_a", g.n_a()}, {"n_s", g.n_s()}, {"dt", g.dt()}, {"T_effective", g.T()},
                        {"max_abs", v.max_abs}, {"samples", v.samples}, {"s_above", v.s_lower},
                        {"t_above", v.t_lower}, {"status", to_string(v.status)}});
    if (v.status == VanishingStatus::NotApplicable) {
      status = "NOT-APPLICABLE";
      reason = v.reason;
    }
    maxima.push_back(v.max_abs);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < maxima.size(); ++i) {
    if (maxima[i] > maxima[i - 1] && maxima[i] > options.floor) monotone = false;
  }
  if (status != "NOT-APPLICABLE") {
    if (!monotone) {
      status = "FAIL";
      reason = "maxima increase along the ladder";
    } else if (maxima.back() > options.tol) {
      status = "FAIL";
      reason = "final maximum above tolerance";
    }
  }
  rep.metadata = {{"status", status}, {"reason", reason}, {"monotone", monotone}, {"final_max", maxima.back()},
                  {"tol", options.tol}, {"alpha_star", *crit.alpha}, {"T", T}, {"margin_cells", options.margin_cells}};
  nlohmann::json grids = nlohmann::json::array();
  for (const auto& c : ladder) grids.push_back(c.to_json());
  rep.fingerprint = fingerprint(spec, ladder.back(), {{"ladder", grids}, {"T", T}, {"seed", options.seed}});
  rep.environment = {{"version", kVersion}, {"ladder", grids}, {"seed", options.seed}, {"tol", options.tol}};
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::Full: return "full";
    case OracleMode::PureDiffusion: return "pure-diffusion";
    case OracleMode::PureTransport: return "pure-transport";
  }
  return "?";
}

OracleMode oracle_mode_from_string(const std::string& name) {
  if (name == "full") return OracleMode::Full;
  if (name == "pure-diffusion") return OracleMode::PureDiffusion;
  if (name == "pure-transport") return OracleMode::PureTransport;
  throw Error(ErrorKind::InvalidConfig, "unknown oracle mode '" + name + "'");
}

namespace {

// Spatial operator assembled from the spec, independently of DiffusionOperator.
Eigen::MatrixXd dense_spatial(const ModelSpec& spec, const Grid& g) {
  const int n = g.n_x();
  const double h = g.dx();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const auto& d = spec.diffusion;
  if (!spec.degenerate()) {
    for (int i = 0; i < n; ++i) {
      const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
      if (i > 0) {
        const double c = d.conductivity(g.x(i) - 0.5 * h) / (h * w);
        L(i, i - 1) += c;
        L(i, i) -= c;
      }
      if (i + 1 < n) {
        const double c = d.conductivity(g.x(i) + 0.5 * h) / (h * w);
        L(i, i + 1) += c;
        L(i, i) -= c;
      }
    }
  } else {
    // sigma (gamma u')' with u = 0 at both ends
    for (int i = 1; i + 1 < n; ++i) {
      const double sig = d.sigma(g.x(i));
      const double cm = sig * d.gamma(g.x(i) - 0.5 * h) / (h * h);
      const double cp = sig * d.gamma(g.x(i) + 0.5 * h) / (h * h);
      L(i, i) = -(cm + cp);
      if (i > 1) L(i, i - 1) = cm;
      if (i + 2 < n) L(i, i + 1) = cp;
    }
  }
  return L;
}

struct DenseSystem {
  Eigen::MatrixXd L;           // generator on differential rows
  Eigen::MatrixXd R;           // algebraic rows: y_r = (R y)_r
  std::vector<bool> algebraic;
};

DenseSystem assemble(const ModelSpec& spec, const Grid& g) {
  const int nx = g.n_x(), na = g.n_a(), ns = g.n_s();
  const int n = nx * na * ns;
  auto id = [&](int i, int j, int k) { return i + nx * g.index(j, k); };
  DenseSystem sys;
  sys.L = Eigen::MatrixXd::Zero(n, n);
  sys.R = Eigen::MatrixXd::Zero(n, n);
  sys.algebraic.assign(n, true);
  const Eigen::MatrixXd Lx = dense_spatial(spec, g);
  const bool dirichlet = spec.degenerate();
  const auto& kern = spec.fertility;
  const auto& mort = spec.mortality;

  for (int i = 0; i < nx; ++i) {
    if (dirichlet && (i == 0 || i == nx - 1)) continue;  // y = 0
    for (int k = 1; k + 1 < ns; ++k) {
      const double gk = spec.growth(g.s(k));
      if (!(gk > 0.0)) continue;
      // newborn row
      const int r0 = id(i, 0, k);
      for (int j = 0; j < na; ++j) {
        if (kern.kind == KernelKind::Probabilistic) {
          for (int kk = 0; kk < ns; ++kk) {
            const double beta = kern.probabilistic(g.a(j), g.s(kk), g.s(k));
            if (beta != 0.0) sys.R(r0, id(i, j, kk)) += g.wa()(j) * g.ws()(kk) * beta;
          }
        } else {
          const double beta = kern.local(g.a(j), g.s(k));
          if (beta != 0.0) sys.R(r0, id(i, j, k)) += g.wa()(j) * beta;
        }
      }
      // upwind transport, mortality and the growth Jacobian
      const double decay = spec.growth.rate.derivative(g.s(k));
      for (int j = 1; j + 1 < na; ++j) {
        const int r = id(i, j, k);
        sys.algebraic[r] = false;
        sys.L(r, r) -= 1.0 / g.da() + gk / g.ds() + decay + mort.mu1(g.a(j)) + mort.mu2(g.s(k));
        sys.L(r, id(i, j - 1, k)) += 1.0 / g.da();
        sys.L(r, id(i, j, k - 1)) += gk / g.ds();
        for (int ii = 0; ii < nx; ++ii) {
          if (Lx(i, ii) != 0.0) sys.L(r, id(ii, j, k)) += Lx(i, ii);
        }
      }
    }
  }
  return sys;
}

ModelSpec oracle_spec(const ModelSpec& spec, OracleMode mode) {
  ModelSpec s = spec;
  if (mode == OracleMode::PureTransport) {
    if (spec.degenerate()) throw Error(ErrorKind::InvalidConfig, "pure-transport oracle needs the Neumann model");
    s.diffusion.conductivity = RateFunction::constant(0.0);
    s.fertility.age = RateFunction::constant(0.0);
  }
  return s;
}

}  // namespace

ExperimentReport oracle_check(const ModelSpec& spec_in, const GridConfig& grid, const OracleOptions& options) {
  if (options.horizons.empty() || options.dt_divisors.empty() || options.n_initial < 1) {
    throw Error(ErrorKind::InvalidConfig, "oracle battery is empty");
  }
  const ModelSpec spec = oracle_spec(spec_in, options.mode);
  auto table = std::make_shared<const CharacteristicsTable>(spec);
  const auto base = make_grid(spec, grid, options.horizons.front());
  if (base->unknowns() > options.max_unknowns) {
    throw Error(ErrorKind::OracleTooLarge, "oracle grid has " + std::to_string(base->unknowns()) +
                                               " unknowns (limit " + std::to_string(options.max_unknowns) + ")");
  }

  ExperimentReport rep;
  rep.kind = "oracle_check";
  nlohmann::json max_dev = nlohmann::json::array();
  std::vector<double> maxima;
  for (int div : options.dt_divisors) {
    if (div < 1) throw Error(ErrorKind::InvalidConfig, "dt divisors must be >= 1");
    GridConfig cfg = grid;
    cfg.dt = base->da() / div;
    const auto g0 = make_grid(spec, cfg, options.horizons.front());
    const double dt = g0->dt();
    double worst = 0.0;

    // one factorization per dt
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::MatrixXd cn_step;
    DenseSystem sys;
    if (options.mode == OracleMode::PureDiffusion) {
      const Eigen::MatrixXd Lx = dense_spatial(spec, *g0);
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(g0->n_x(), g0->n_x());
      cn_step = (I - 0.5 * dt * Lx).partialPivLu().solve(I + 0.5 * dt * Lx);
    } else {
      sys = assemble(spec, *g0);
      const int n = static_cast<int>(sys.algebraic.size());
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
      for (int r = 0; r < n; ++r) {
        if (sys.algebraic[r]) M.row(r) -= sys.R.row(r);
        else M.row(r) -= dt * sys.L.row(r);
      }
      lu.compute(M);
    }

    for (double T : options.horizons) {
      const auto g = make_grid(spec, cfg, T);
      ForwardSolver fwd(spec, g, table);
      for (int m = 0; m < options.n_initial; ++m) {
        const auto shape = m % 2 == 0 ? FieldShape::Positive : FieldShape::Signed;
        const auto y0 = random_smooth_field(g, options.seed + static_cast<std::uint64_t>(m), shape);
        Eigen::MatrixXd ys = y0.values;
        Eigen::MatrixXd yo = y0.values;
        for (int step = 0; step < g->steps(); ++step) {
          if (options.mode == OracleMode::PureDiffusion) {
            fwd.diffusion().apply(ys);
            yo = cn_step * yo;
          } else {
            ys = fwd.step(ys);
            Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(yo.data(), yo.size());
            for (Eigen::Index r = 0; r < rhs.size(); ++r) {
              if (sys.algebraic[r]) rhs(r) = 0.0;
            }
            const Eigen::VectorXd next = lu.solve(rhs);
            yo = Eigen::Map<const Eigen::MatrixXd>(next.data(), yo.rows(), yo.cols());
          }
        }
        const double ref = std::sqrt(std::max(0.0, weighted_dot(*g, yo, yo)));
        const Eigen::MatrixXd diff = ys - yo;
        const double dev = ref > 0.0 ? std::sqrt(std::max(0.0, weighted_dot(*g, diff, diff))) / ref : 0.0;
        rep.rows.push_back({{"dt", dt}, {"dt_divisor", div}, {"T", T}, {"T_effective", g->T()}, {"initial", m},
                            {"deviation", dev}, {"oracle_norm", ref}});
        worst = std::max(worst, dev);
      }
    }
    max_dev.push_back({{"dt", dt}, {"max_deviation", worst}});
    maxima.push_back(worst);
  }
  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t i = 1; i < maxima.size(); ++i) ratios.push_back(number_or_null(maxima[i] / maxima[i - 1]));
  rep.metadata = {{"mode", to_string(options.mode)}, {"max_deviation", max_dev}, {"ratios", ratios},
                  {"final_deviation", maxima.back()}, {"unknowns", base->unknowns()}};
  rep.fingerprint = fingerprint(spec, grid, {{"mode", to_string(options.mode)}, {"horizons", options.horizons},
                                             {"divisors", options.dt_divisors}, {"seed", options.seed}});
  rep.environment = {{"version", kVersion}, {"grid", grid.to_json()}, {"seed", options.seed}};
  return rep;
}

}  // namespace popctrl
