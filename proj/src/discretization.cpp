#include "popctrl/discretization.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "popctrl/error.hpp"

namespace popctrl {

nlohmann::json GridConfig::to_json() const {
  return {{"n_x", n_x}, {"n_a", n_a}, {"n_s", n_s}, {"dt", dt}, {"T", T}};
}

GridConfig GridConfig::from_json(const nlohmann::json& j) {
  GridConfig c;
  try {
    c.n_x = j.value("n_x", c.n_x);
    c.n_a = j.value("n_a", c.n_a);
    c.n_s = j.value("n_s", c.n_s);
    c.dt = j.value("dt", c.dt);
    c.T = j.value("T", c.T);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  return c;
}

Grid::Grid(const ModelSpec& spec, const GridConfig& config)
    : config_(config),
      n_x_(config.n_x),
      n_a_(config.n_a),
      n_s_(config.n_s),
      length_(spec.diffusion.length),
      max_age_(spec.max_age()),
      max_size_(spec.max_size()) {
  if (n_x_ < 3 || n_a_ < 4 || n_s_ < 4) {
    throw Error(ErrorKind::InvalidConfig, "grid needs n_x >= 3 and n_a, n_s >= 4");
  }
  if (!(config.T > 0.0) || config.dt < 0.0) throw Error(ErrorKind::InvalidConfig, "grid needs T > 0 and dt >= 0");
  dx_ = length_ / (n_x_ - 1);
  da_ = max_age_ / (n_a_ - 1);
  ds_ = max_size_ / (n_s_ - 1);
  dt_ = config.dt > 0.0 ? config.dt : da_;
  steps_ = std::max(1, static_cast<int>(std::lround(config.T / dt_)));
  config_.dt = dt_;

  weight_kind_ = spec.degenerate() ? WeightKind::InverseSigma : WeightKind::Uniform;
  wx_ = Eigen::VectorXd::Constant(n_x_, dx_);
  sigma_ = Eigen::VectorXd::Ones(n_x_);
  if (weight_kind_ == WeightKind::Uniform) {
    wx_(0) = wx_(n_x_ - 1) = 0.5 * dx_;
  } else {
    wx_(0) = wx_(n_x_ - 1) = 0.0;
    sigma_(0) = sigma_(n_x_ - 1) = 0.0;
    for (int i = 1; i + 1 < n_x_; ++i) {
      const double sg = spec.diffusion.sigma(x(i));
      if (!std::isfinite(sg) || sg <= 0.0) {
        throw Error(ErrorKind::InvalidConfig, "sigma not finite and positive at x = " + std::to_string(x(i)));
      }
      sigma_(i) = sg;
      wx_(i) = dx_ / sg;
    }
  }
  wa_ = Eigen::VectorXd::Constant(n_a_, da_);
  wa_(n_a_ - 1) = 0.0;
  ws_ = Eigen::VectorXd::Constant(n_s_, ds_);
  ws_(n_s_ - 1) = 0.0;
  was_.resize(n_as());
  for (int j = 0; j < n_a_; ++j) {
    for (int k = 0; k < n_s_; ++k) was_(index(j, k)) = wa_(j) * ws_(k);
  }
}

bool Grid::same_geometry(const Grid& o) const {
  return n_x_ == o.n_x_ && n_a_ == o.n_a_ && n_s_ == o.n_s_ && length_ == o.length_ && max_age_ == o.max_age_ &&
         max_size_ == o.max_size_ && dt_ == o.dt_ && weight_kind_ == o.weight_kind_;
}

StateField::StateField(GridPtr g, double t)
    : grid(std::move(g)), values(Eigen::MatrixXd::Zero(grid->n_x(), grid->n_as())), time(t) {}

StateField::StateField(GridPtr g, Eigen::MatrixXd v, double t) : grid(std::move(g)), values(std::move(v)), time(t) {
  if (values.rows() != grid->n_x() || values.cols() != grid->n_as()) {
    throw Error(ErrorKind::GridMismatch, "field dimensions do not match the grid");
  }
}

double weighted_dot(const Grid& grid, const Eigen::MatrixXd& f, const Eigen::MatrixXd& h) {
  // sum_i sum_c wx_i was_c f_ic h_ic, reduced in a fixed order
  return (grid.wx().asDiagonal() * f.cwiseProduct(h) * grid.was()).sum();
}

double inner_product(const StateField& f, const StateField& h) {
  if (!f.grid || !h.grid || !(f.grid == h.grid || f.grid->same_geometry(*h.grid))) {
    throw Error(ErrorKind::GridMismatch, "inner product of fields on different grids");
  }
  return weighted_dot(*f.grid, f.values, h.values);
}

double norm(const StateField& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

namespace {
// Cell index and fraction for coordinate v on a uniform axis with n nodes;
// coordinates within 1e-12 cells of a node snap to it.
std::pair<int, double> locate(double v, double h, int n) {
  double p = v / h;
  const double r = std::round(p);
  if (std::abs(p - r) < 1e-12) p = r;
  int i = static_cast<int>(std::floor(p));
  i = std::clamp(i, 0, n - 2);
  return {i, p - i};
}
}  // namespace

double interpolate(const StateField& f, int x_index, double a, double s) {
  const Grid& g = *f.grid;
  const double ta = 1e-12 * g.max_age(), ts = 1e-12 * g.max_size();
  if (a < -ta || a > g.max_age() + ta || s < -ts || s > g.max_size() + ts) return 0.0;
  const auto [j, u] = locate(std::clamp(a, 0.0, g.max_age()), g.da(), g.n_a());
  const auto [k, v] = locate(std::clamp(s, 0.0, g.max_size()), g.ds(), g.n_s());
  const auto& M = f.values;
  const double f00 = M(x_index, g.index(j, k)), f01 = M(x_index, g.index(j, k + 1));
  const double f10 = M(x_index, g.index(j + 1, k)), f11 = M(x_index, g.index(j + 1, k + 1));
  if (u == 0.0 && v == 0.0) return f00;
  return (1 - u) * ((1 - v) * f00 + v * f01) + u * ((1 - v) * f10 + v * f11);
}

std::size_t ControlMask::count() const {
  return static_cast<std::size_t>(x.sum() + 0.5) * static_cast<std::size_t>(as.sum() + 0.5);
}

ControlMask control_mask(const Grid& grid, const ControlRegion& r) {
  auto inside = [](double v, double lo, double hi, double scale) {
    const double tol = 1e-12 * scale;
    return v >= lo - tol && v <= hi + tol;
  };
  ControlMask m;
  m.x = Eigen::VectorXd::Zero(grid.n_x());
  m.as = Eigen::VectorXd::Zero(grid.n_as());
  for (int i = 0; i < grid.n_x(); ++i) {
    if (inside(grid.x(i), r.x_lo, r.x_hi, grid.length())) m.x(i) = 1.0;
  }
  for (int j = 0; j < grid.n_a(); ++j) {
    if (!inside(grid.a(j), r.a_lo, r.a_hi, grid.max_age())) continue;
    for (int k = 0; k < grid.n_s(); ++k) {
      if (inside(grid.s(k), r.s_lo, r.s_hi, grid.max_size())) m.as(grid.index(j, k)) = 1.0;
    }
  }
  if (m.count() == 0) throw Error(ErrorKind::EmptyRegion, "no grid node inside the control region");
  return m;
}

void apply_mask(const ControlMask& m, Eigen::MatrixXd& values) {
  values = m.x.asDiagonal() * values * m.as.asDiagonal();
}

StateField restrict_to_control(const StateField& f, const ControlRegion& region) {
  StateField out(f.grid, f.values, f.time);
  apply_mask(control_mask(*f.grid, region), out.values);
  return out;
}

StateField random_smooth_field(GridPtr grid, std::uint64_t seed, FieldShape shape) {
  using std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
  constexpr int M = 3;
  double c[M][M][M], pa[M], ps[M];
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < M; ++n) {
      for (int l = 0; l < M; ++l) c[m][n][l] = normal(rng) / (1.0 + m + n + l);
    }
  }
  for (int n = 0; n < M; ++n) {
    pa[n] = phase(rng);
    ps[n] = phase(rng);
  }
  const Grid& g = *grid;
  const bool dirichlet = g.weight_kind() == WeightKind::InverseSigma;
  StateField f(grid);
  for (int i = 0; i < g.n_x(); ++i) {
    const double xr = g.x(i) / g.length();
    double X[M];
    for (int m = 0; m < M; ++m) X[m] = dirichlet ? std::sin((m + 1) * pi * xr) : std::cos(m * pi * xr);
    for (int j = 0; j < g.n_a(); ++j) {
      const double ar = g.a(j) / g.max_age();
      for (int k = 0; k < g.n_s(); ++k) {
        const double sr = g.s(k) / g.max_size();
        double v = 0.0;
        for (int m = 0; m < M; ++m) {
          for (int n = 0; n < M; ++n) {
            for (int l = 0; l < M; ++l) {
              v += c[m][n][l] * X[m] * std::cos(n * pi * ar + pa[n]) * std::cos(l * pi * sr + ps[l]);
            }
          }
        }
        f(i, j, k) = v;
      }
    }
  }
  const double peak = f.values.cwiseAbs().maxCoeff();
  if (peak > 0.0) f.values /= peak;
  for (int i = 0; i < g.n_x(); ++i) {
    const double ex = dirichlet ? std::sin(pi * g.x(i)) : 1.0;
    for (int j = 0; j < g.n_a(); ++j) {
      const double ea = std::cos(0.5 * pi * g.a(j) / g.max_age());
      for (int k = 0; k < g.n_s(); ++k) {
        const double env = ex * ea * std::cos(0.5 * pi * g.s(k) / g.max_size());
        double& v = f(i, j, k);
        v = env * (shape == FieldShape::Positive ? 1.5 + v : v);
      }
    }
  }
  // exact zeros where the envelope vanishes
  for (int i = 0; i < g.n_x(); ++i) {
    for (int k = 0; k < g.n_s(); ++k) f(i, g.n_a() - 1, k) = 0.0;
    for (int j = 0; j < g.n_a(); ++j) f(i, j, g.n_s() - 1) = 0.0;
  }
  if (dirichlet) {
    f.values.row(0).setZero();
    f.values.row(g.n_x() - 1).setZero();
  }
  return f;
}

void write_field_csv(const StateField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path);
  out.precision(17);
  out << "x,a,s,value\n";
  const Grid& g = *f.grid;
  for (int i = 0; i < g.n_x(); ++i) {
    for (int j = 0; j < g.n_a(); ++j) {
      for (int k = 0; k < g.n_s(); ++k) out << g.x(i) << ',' << g.a(j) << ',' << g.s(k) << ',' << f(i, j, k) << '\n';
    }
  }
}

namespace {
template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "binary field IO assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void write_field_binary(const StateField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path);
  const Grid& g = *f.grid;
  put_le<std::uint64_t>(out, g.n_x());
  put_le<std::uint64_t>(out, g.n_a());
  put_le<std::uint64_t>(out, g.n_s());
  for (int i = 0; i < g.n_x(); ++i) {
    for (int j = 0; j < g.n_a(); ++j) {
      for (int k = 0; k < g.n_s(); ++k) put_le<double>(out, f(i, j, k));
    }
  }
}

Eigen::MatrixXd read_field(const Grid& g, const std::string& path) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(g.n_x(), g.n_as());
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + path);
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      double x, a, s, val;
      char c;
      if (!(ss >> x >> c >> a >> c >> s >> c >> val)) throw Error(ErrorKind::InvalidConfig, "bad CSV row: " + line);
      const int i = static_cast<int>(std::lround(x / g.dx()));
      const int j = static_cast<int>(std::lround(a / g.da()));
      const int k = static_cast<int>(std::lround(s / g.ds()));
      if (i < 0 || i >= g.n_x() || j < 0 || j >= g.n_a() || k < 0 || k >= g.n_s()) {
        throw Error(ErrorKind::GridMismatch, "CSV node outside the grid: " + line);
      }
      v(i, g.index(j, k)) = val;
      ++rows;
    }
    if (rows != g.unknowns()) throw Error(ErrorKind::GridMismatch, "CSV row count does not match the grid");
    return v;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + path);
  const auto nx = get_le<std::uint64_t>(in), na = get_le<std::uint64_t>(in), ns = get_le<std::uint64_t>(in);
  if (!in || nx != static_cast<std::uint64_t>(g.n_x()) || na != static_cast<std::uint64_t>(g.n_a()) ||
      ns != static_cast<std::uint64_t>(g.n_s())) {
    throw Error(ErrorKind::GridMismatch, "binary field header does not match the grid");
  }
  for (int i = 0; i < g.n_x(); ++i) {
    for (int j = 0; j < g.n_a(); ++j) {
      for (int k = 0; k < g.n_s(); ++k) v(i, g.index(j, k)) = get_le<double>(in);
    }
  }
  if (!in) throw Error(ErrorKind::InvalidConfig, "truncated binary field " + path);
  return v;
}

}  // namespace popctrl
