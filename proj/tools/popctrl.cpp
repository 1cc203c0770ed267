// popctrl command line: forward/adjoint runs, HUM controls and the experiment
// drivers. Exit status 0 on success, 2 on validation failure, 3 on numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "popctrl/error.hpp"
#include "popctrl/experiments.hpp"

namespace fs = std::filesystem;
using namespace popctrl;
using nlohmann::json;

namespace {

constexpr int kValidationExit = 2;
constexpr int kNumericalExit = 3;

struct Globals {
  std::string spec_path;
  std::string grid_path;
  std::string out;
  std::uint64_t seed = 42;
  int threads = 1;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path + ": " + e.what());
  }
}

ModelSpec load_spec(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::InvalidConfig, "--spec is required");
  return ModelSpec::from_json(read_json(path));
}

GridConfig load_grid(const Globals& g, std::optional<double> T) {
  GridConfig cfg = g.grid_path.empty() ? GridConfig{} : GridConfig::from_json(read_json(g.grid_path));
  if (T) cfg.T = *T;
  return cfg;
}

// --out names a directory for multi-file outputs
fs::path out_dir(const Globals& g, const std::string& fallback) {
  fs::path dir = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
  f << j.dump(2) << "\n";
}

void write_trace(const fs::path& path, const Grid& g, const std::vector<Eigen::MatrixXd>& trace) {
  std::ofstream f(path);
  f.precision(17);
  f << "t,x,s,value\n";
  for (std::size_t n = 0; n < trace.size(); ++n) {
    for (int k = 0; k < g.n_s(); ++k) {
      for (int i = 0; i < g.n_x(); ++i) f << n * g.dt() << "," << g.x(i) << "," << g.s(k) << "," << trace[n](i, k) << "\n";
    }
  }
}

void write_series(const fs::path& path, const std::string& name, double dt, const std::vector<double>& v) {
  std::ofstream f(path);
  f.precision(17);
  f << "step,t," << name << "\n";
  for (std::size_t n = 0; n < v.size(); ++n) f << n << "," << n * dt << "," << v[n] << "\n";
}

void write_field(const fs::path& dir, const std::string& stem, const StateField& field, bool binary) {
  if (binary) {
    write_field_binary(field, (dir / (stem + ".bin")).string());
  } else {
    write_field_csv(field, (dir / (stem + ".csv")).string());
  }
}

StateField initial_field(const ForwardSolver& fwd, const std::string& path, std::uint64_t seed, FieldShape shape) {
  if (path.empty()) return random_smooth_field(fwd.grid(), seed, shape);
  return StateField(fwd.grid(), read_field(*fwd.grid(), path), 0.0);
}

std::vector<int> cube_sizes(const std::vector<int>& sizes) {
  for (int n : sizes) {
    if (n < 4) throw Error(ErrorKind::InvalidConfig, "ladder sizes must be >= 4");
  }
  return sizes;
}

void print_report_summary(const ExperimentReport& rep, const fs::path& prefix) {
  json head = {{"kind", rep.kind}, {"fingerprint", rep.fingerprint}, {"rows", rep.rows.size()},
               {"metadata", rep.metadata}, {"written", prefix.string() + ".{json,csv}"}};
  std::cout << head.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Null-controllability laboratory for age-size-space population models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--spec", g.spec_path, "model specification (JSON)");
  app.add_option("--grid", g.grid_path, "grid configuration (JSON)");
  app.add_option("--out", g.out, "output directory (or result file for hum)");
  app.add_option("--seed", g.seed, "seed for random initial and adjoint data");
  app.add_option("--threads", g.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);

  // derive
  auto* derive = app.add_subcommand("derive", "transit times, critical sizes, thresholds and validation");
  bool derive_validate = false;
  derive->add_flag("--validate", derive_validate, "include the full validation report");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "forward run without control");
  std::optional<double> sim_T;
  std::string sim_y0;
  bool sim_binary = false;
  simulate->add_option("--T", sim_T, "horizon (overrides the grid file)");
  simulate->add_option("--y0", sim_y0, "initial field (.csv or binary); smooth random when absent");
  simulate->add_flag("--binary", sim_binary, "write the terminal field in the binary layout");

  // adjoint
  auto* adjoint = app.add_subcommand("adjoint", "adjoint run, renewal trace and vanishing report");
  std::optional<double> adj_T;
  std::string adj_q0;
  double adj_margin = 2.0, adj_tol = 1e-6;
  bool adj_binary = false;
  adjoint->add_option("--T", adj_T, "horizon (overrides the grid file)");
  adjoint->add_option("--q0", adj_q0, "adjoint data (.csv or binary); smooth random when absent");
  adjoint->add_option("--margin", adj_margin, "vanishing margin in grid cells");
  adjoint->add_option("--tol", adj_tol, "vanishing tolerance");
  adjoint->add_flag("--binary", adj_binary, "write the terminal field in the binary layout");

  // hum
  auto* hum = app.add_subcommand("hum", "penalized HUM control for one (T, eps)");
  std::optional<double> hum_T;
  HumOptions hum_opts;
  std::string hum_y0;
  hum->add_option("--T", hum_T, "horizon (overrides the grid file)");
  hum->add_option("--eps", hum_opts.epsilon, "penalty eps > 0");
  hum->add_option("--cg-tol", hum_opts.cg_tol, "relative CG residual");
  hum->add_option("--max-iter", hum_opts.cg_max_iter, "CG iteration cap");
  hum->add_flag("--precondition", hum_opts.diagonal_preconditioner, "diagonal occupancy preconditioner");
  hum->add_option("--y0", hum_y0, "initial field; smooth positive random when absent");

  // sweep-time
  auto* sweep = app.add_subcommand("sweep-time", "HUM metrics over a T x eps grid");
  std::vector<double> sweep_T, sweep_eps{1e-2, 1e-3, 1e-4, 1e-5};
  double sweep_cg = 1e-8;
  sweep->add_option("--T", sweep_T, "horizons")->required()->delimiter(',');
  sweep->add_option("--eps", sweep_eps, "penalties")->delimiter(',');
  sweep->add_option("--cg-tol", sweep_cg, "relative CG residual");

  // compare-kernels
  auto* compare = app.add_subcommand("compare-kernels", "cost curves for probabilistic vs local birth");
  std::string cmp_local;
  std::vector<double> cmp_T;
  CompareOptions cmp_opts;
  compare->add_option("--local-spec", cmp_local, "local-kernel spec; the marginal-matched kernel when absent");
  compare->add_option("--T", cmp_T, "horizons")->required()->delimiter(',');
  compare->add_option("--eps", cmp_opts.epsilon, "penalty");
  compare->add_option("--knee-factor", cmp_opts.knee_factor, "knee: cost <= factor * large-T cost");
  compare->add_option("--cg-tol", cmp_opts.sweep.hum.cg_tol, "relative CG residual");

  // certify-vanishing
  auto* certify = app.add_subcommand("certify-vanishing", "adjoint trace vanishing on a grid ladder");
  std::vector<int> cert_ladder{17, 33, 65};
  double cert_T = 0.8;
  VanishingOptions cert_opts;
  certify->add_option("--ladder", cert_ladder, "cube sizes n (n_x = n_a = n_s = n)")->delimiter(',');
  certify->add_option("--T", cert_T, "horizon");
  certify->add_option("--margin", cert_opts.margin_cells, "margin in grid cells");
  certify->add_option("--tol", cert_opts.tol, "tolerance on the final maximum");

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check", "splitting solver vs dense oracle");
  std::string oracle_mode = "full";
  OracleOptions oracle_opts;
  oracle->add_option("--mode", oracle_mode, "full | pure-diffusion | pure-transport");
  oracle->add_option("--horizons", oracle_opts.horizons, "horizons")->delimiter(',');
  oracle->add_option("--divisors", oracle_opts.dt_divisors, "dt = da / divisor ladder")->delimiter(',');
  oracle->add_option("--initial", oracle_opts.n_initial, "number of initial fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*derive) {
      const auto spec = load_spec(g.spec_path);
      const auto rep = validate(spec);
      const auto tt = transit_times(spec);
      const auto cs = critical_sizes(spec);
      json out = {{"S1_star", tt.s1_star}, {"S2_star", tt.s2_star}, {"T0", tt.t0}, {"T1", tt.t1},
                  {"alpha_star", cs.alpha ? json(*cs.alpha) : json(nullptr)},
                  {"beta_star", cs.beta ? json(*cs.beta) : json(nullptr)},
                  {"threshold_probabilistic", minimal_time(spec, KernelKind::Probabilistic)},
                  {"threshold_local", minimal_time(spec, KernelKind::Local)},
                  {"kernel", to_string(spec.fertility.kind)},
                  {"hypotheses", rep.to_json()["hypotheses"]},
                  {"valid", rep.ok()}};
      if (derive_validate) out["validation"] = rep.to_json();
      std::cout.precision(17);
      std::cout << out.dump(2) << "\n";
      if (!g.out.empty()) write_json(g.out, out);
      return rep.ok() ? 0 : kValidationExit;
    }

    const auto spec = load_spec(g.spec_path);
    const auto report = validate(spec);
    if (!report.ok()) {
      std::cerr << report.to_json().dump(2) << "\n";
      return kValidationExit;
    }

    if (*simulate) {
      ForwardSolver fwd(spec, load_grid(g, sim_T));
      const auto y0 = initial_field(fwd, sim_y0, g.seed, FieldShape::Positive);
      const auto run = fwd.run(y0);
      const auto dir = out_dir(g, "run");
      write_field(dir, "terminal", run.terminal, sim_binary);
      write_trace(dir / "newborn_trace.csv", *fwd.grid(), run.newborn_trace);
      write_series(dir / "mass_history.csv", "mass", fwd.grid()->dt(), run.mass_history);
      json summary = {{"T", fwd.grid()->T()}, {"steps", fwd.grid()->steps()}, {"initial_norm", norm(y0)},
                      {"terminal_norm", norm(run.terminal)}, {"final_mass", run.mass_history.back()},
                      {"config", run.config}};
      write_json(dir / "summary.json", summary);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }

    if (*adjoint) {
      ForwardSolver fwd(spec, load_grid(g, adj_T));
      AdjointSolver solver(fwd);
      const auto q0 = initial_field(fwd, adj_q0, g.seed, FieldShape::Signed);
      const auto run = solver.run(q0);
      const auto dir = out_dir(g, "adjoint");
      write_field(dir, "terminal", run.terminal, adj_binary);
      write_trace(dir / "renewal_trace.csv", *fwd.grid(), run.renewal_trace);
      write_series(dir / "observed_energy.csv", "energy", fwd.grid()->dt(), run.observed_energy);
      json summary = {{"T", fwd.grid()->T()}, {"q0_norm", run.q0_norm}, {"terminal_norm", norm(run.terminal)},
                      {"observed_energy", run.observed_energy.back()}};
      const auto cs = critical_sizes(spec);
      if (cs.alpha) {
        const auto v = vanishing_check(run, fwd, cs, transit_times(spec), adj_margin, adj_tol);
        summary["vanishing"] = v.to_json();
        write_json(dir / "vanishing.json", v.to_json());
      } else {
        summary["vanishing"] = "alpha* absent; check skipped";
      }
      write_json(dir / "summary.json", summary);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }

    if (*hum) {
      ForwardSolver fwd(spec, load_grid(g, hum_T));
      const auto y0 = initial_field(fwd, hum_y0, g.seed, FieldShape::Positive);
      const auto res = HumSolver(fwd).solve_control(y0, hum_opts);
      json out = res.to_json();
      out["T"] = fwd.grid()->T();
      out["threshold"] = minimal_time(spec);
      fs::path path = g.out.empty() ? fs::path("result.json") : fs::path(g.out);
      if (path.extension() != ".json") {
        fs::create_directories(path);
        path /= "result.json";
      } else if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
      }
      write_json(path, out);
      json brief = out;
      brief.erase("residual_history");
      brief.erase("energy_history");
      std::cout << brief.dump(2) << "\n";
      if (!res.converged) {
        std::cerr << "CG stalled above cg_tol after " << res.cg_iters << " iterations\n";
        return kNumericalExit;
      }
      return 0;
    }

    if (*sweep) {
      SweepOptions so;
      so.hum.cg_tol = sweep_cg;
      so.y0.seed = g.seed;
      so.threads = g.threads;
      const auto rep = sweep_time(spec, load_grid(g, std::nullopt), sweep_T, sweep_eps, so);
      const auto prefix = out_dir(g, "sweep") / "sweep_time";
      rep.write(prefix.string());
      print_report_summary(rep, prefix);
      return 0;
    }

    if (*compare) {
      const auto grid = load_grid(g, std::nullopt);
      const ModelSpec local = cmp_local.empty() ? matched_local_kernel(spec) : load_spec(cmp_local);
      cmp_opts.sweep.y0.seed = g.seed;
      cmp_opts.sweep.threads = g.threads;
      const auto rep = compare_kernels({spec, grid}, {local, grid}, cmp_T, cmp_opts);
      const auto prefix = out_dir(g, "compare") / "compare_kernels";
      rep.write(prefix.string());
      print_report_summary(rep, prefix);
      return 0;
    }

    if (*certify) {
      const auto base = load_grid(g, cert_T);
      std::vector<GridConfig> ladder;
      for (int n : cube_sizes(cert_ladder)) {
        GridConfig c = base;
        c.n_x = c.n_a = c.n_s = n;
        c.dt = 0.0;
        ladder.push_back(c);
      }
      cert_opts.seed = g.seed;
      const auto rep = certify_vanishing(spec, ladder, cert_T, cert_opts);
      const auto prefix = out_dir(g, "certify") / "certify_vanishing";
      rep.write(prefix.string());
      print_report_summary(rep, prefix);
      return 0;
    }

    if (*oracle) {
      oracle_opts.mode = oracle_mode_from_string(oracle_mode);
      oracle_opts.seed = g.seed;
      const auto rep = oracle_check(spec, load_grid(g, std::nullopt), oracle_opts);
      const auto prefix = out_dir(g, "oracle") / "oracle_check";
      rep.write(prefix.string());
      print_report_summary(rep, prefix);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.kind()) ? kValidationExit : kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalExit;
  }
  return 0;
}
