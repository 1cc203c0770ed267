#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "popctrl/discretization.hpp"
#include "popctrl/error.hpp"
#include "support.hpp"

using namespace popctrl;
using testing::base_json;
using testing::cube;
using testing::spec_from;

namespace {

GridPtr make_grid(int n, const ModelSpec& spec = spec_from(base_json())) {
  return std::make_shared<const Grid>(spec, cube(n, 0.5));
}

template <class F>
StateField sample(GridPtr g, F f) {
  StateField out(g);
  for (int i = 0; i < g->n_x(); ++i) {
    for (int j = 0; j < g->n_a(); ++j) {
      for (int k = 0; k < g->n_s(); ++k) out(i, j, k) = f(g->x(i), g->a(j), g->s(k));
    }
  }
  return out;
}

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("grid basics") {
  const auto g = make_grid(9);
  CHECK(g->dx() == doctest::Approx(0.125));
  CHECK(g->dt() == g->da());
  CHECK(g->steps() == 4);
  CHECK(g->T() == doctest::Approx(0.5));
  CHECK(g->weight_kind() == WeightKind::Uniform);
  // T = 0.9 on 33 nodes: 29 steps of 1/32
  const Grid g33(spec_from(base_json()), cube(33, 0.9));
  CHECK(g33.steps() == 29);
  CHECK(g33.T() == doctest::Approx(0.90625).epsilon(1e-15));
  CHECK(g33.requested_T() == 0.9);

  const auto c = GridConfig::from_json(g->config().to_json());
  CHECK(c.n_x == 9);
  CHECK(c.dt == g->dt());
  auto bad = cube(2, 1.0);
  CHECK_THROWS_AS(Grid(spec_from(base_json()), bad), Error);
}

TEST_CASE("inner product examples") {
  const auto g = make_grid(9);
  const auto one = sample(g, [](double, double, double) { return 1.0; });
  // trapezoid in x is exact on constants, the cell rule sums n - 1 cells
  CHECK(inner_product(one, one) == doctest::Approx(1.0).epsilon(1e-15));
  // trapezoid is exact on x; the cell rule in a is the left Riemann sum
  const auto xa = sample(g, [](double x, double a, double) { return x * a; });
  const double left = 0.5 - 0.5 * g->da();
  CHECK(inner_product(xa, one) == doctest::Approx(0.5 * left).epsilon(1e-14));
  CHECK(norm(one) == doctest::Approx(1.0));
}

TEST_CASE("inner product is symmetric and positive (property)") {
  const auto g = make_grid(9);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    StateField f(g), h(g);
    for (Eigen::Index c = 0; c < f.values.size(); ++c) {
      f.values.data()[c] = N(rng);
      h.values.data()[c] = N(rng);
    }
    CHECK(inner_product(f, h) == doctest::Approx(inner_product(h, f)).epsilon(1e-14));
    CHECK(inner_product(f, f) > 0.0);
    // positive on fields supported away from zero-weight nodes
    StateField e(g);
    e(1 + t % 7, t % 8, (3 * t) % 8) = 1.0;
    CHECK(inner_product(e, e) > 0.0);
  }
}

TEST_CASE("degenerate weights") {
  const auto spec = testing::load_spec("degenerate.json");
  const auto g = make_grid(9, spec);
  CHECK(g->weight_kind() == WeightKind::InverseSigma);
  CHECK(g->wx()(0) == 0.0);
  CHECK(g->wx()(8) == 0.0);
  for (int i = 1; i < 8; ++i) CHECK(g->wx()(i) == doctest::Approx(g->dx() / g->sigma()(i)));
  const auto f = random_smooth_field(g, 4);
  CHECK(f.values.row(0).isZero(0.0));
  CHECK(f.values.row(8).isZero(0.0));
}

TEST_CASE("field dimension and grid mismatch") {
  const auto g = make_grid(9), h = make_grid(5);
  CHECK_THROWS_AS(StateField(g, Eigen::MatrixXd::Zero(9, 80)), Error);
  try {
    (void)inner_product(StateField(g), StateField(h));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
  // a separately built grid with the same geometry is accepted
  CHECK(inner_product(StateField(g), StateField(make_grid(9))) == 0.0);
}

TEST_CASE("interpolation is exact on bilinear functions (property)") {
  const auto g = make_grid(9);
  const auto f = sample(g, [](double x, double a, double s) { return 1.0 + x + 2.0 * a - 3.0 * s + 0.5 * a * s; });
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const int i = t % 9;
    const double a = U(rng), s = U(rng);
    CHECK(interpolate(f, i, a, s) == doctest::Approx(1.0 + g->x(i) + 2.0 * a - 3.0 * s + 0.5 * a * s).epsilon(1e-13));
  }
  CHECK(interpolate(f, 0, -0.1, 0.5) == 0.0);
  CHECK(interpolate(f, 0, 0.5, 1.1) == 0.0);
  CHECK(interpolate(f, 3, 0.25, 0.5) == f(3, 2, 4));
}

TEST_CASE("interpolation error is second order") {
  auto fn = [](double, double a, double s) { return std::sin(2.0 * a) * std::exp(s); };
  double err[2];
  int n[2] = {65, 129};
  for (int r = 0; r < 2; ++r) {
    const auto g = make_grid(n[r]);
    const auto f = sample(g, fn);
    double e = 0.0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    for (int t = 0; t < 400; ++t) {
      const double a = U(rng), s = U(rng);
      e = std::max(e, std::abs(interpolate(f, 0, a, s) - fn(0.0, a, s)));
    }
    err[r] = e;
  }
  const double ratio = err[0] / err[1];
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("control restriction") {
  const auto g = make_grid(9);
  const auto spec = spec_from(base_json());
  const auto m = control_mask(*g, spec.control);
  // x: 0.375, 0.5, 0.625; a: 0.125..0.875; s: 0.25..0.75
  CHECK(m.count() == 3u * 7u * 5u);

  const auto f = random_smooth_field(g, 1), h = random_smooth_field(g, 2);
  const auto mf = restrict_to_control(f, spec.control);
  CHECK(restrict_to_control(mf, spec.control).values == mf.values);
  CHECK(inner_product(mf, h) == doctest::Approx(inner_product(f, restrict_to_control(h, spec.control))).epsilon(1e-14));
  CHECK(mf(4, 4, 4) == f(4, 4, 4));
  CHECK(mf(1, 4, 4) == 0.0);

  ControlRegion thin = spec.control;
  thin.x_lo = 0.3;
  thin.x_hi = 0.35;
  try {
    (void)control_mask(*g, thin);
    FAIL("expected EmptyRegion");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyRegion);
  }
  // nodes on the edge count as inside
  ControlRegion edge = spec.control;
  edge.x_lo = edge.x_hi = 0.5;
  CHECK(control_mask(*g, edge).x.sum() == 1.0);
}

TEST_CASE("random fields are deterministic and vanish on the outflow edges") {
  const auto g = make_grid(9);
  const auto f = random_smooth_field(g, 10), f2 = random_smooth_field(g, 10);
  CHECK(f.values == f2.values);
  CHECK(f.values != random_smooth_field(g, 11).values);
  for (int i = 0; i < 9; ++i) {
    for (int k = 0; k < 9; ++k) CHECK(f(i, 8, k) == 0.0);
  }
  const auto p = random_smooth_field(g, 10, FieldShape::Positive);
  CHECK(p.values.minCoeff() >= 0.0);
}

TEST_CASE("field I/O round trip") {
  const auto g = make_grid(5);
  const auto f = random_smooth_field(g, 3);
  write_field_csv(f, tmp("popctrl_field.csv"));
  write_field_binary(f, tmp("popctrl_field.bin"));
  CHECK((read_field(*g, tmp("popctrl_field.csv")) - f.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(read_field(*g, tmp("popctrl_field.bin")) == f.values);
  CHECK(std::filesystem::file_size(tmp("popctrl_field.bin")) == 24 + 8 * 125);

  const auto other = make_grid(9);
  for (const char* name : {"popctrl_field.csv", "popctrl_field.bin"}) {
    try {
      (void)read_field(*other, tmp(name));
      FAIL("expected GridMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::GridMismatch);
    }
  }
  CHECK_THROWS_AS(read_field(*g, tmp("popctrl_missing.bin")), Error);
}
