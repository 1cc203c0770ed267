#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "popctrl/error.hpp"
#include "support.hpp"

using namespace popctrl;
using testing::base_json;
using testing::spec_from;

namespace {

ModelSpec window(double a1, double a2, double s1, double s2) {
  auto j = base_json();
  j["control"]["age"] = {a1, a2};
  j["control"]["size"] = {s1, s2};
  return spec_from(j);
}

}  // namespace

TEST_CASE("validate: zero rates pass, tails reported as truncated") {
  const auto rep = validate(spec_from(base_json()));
  CHECK(rep.ok());
  for (const auto& c : rep.checks) {
    CHECK_MESSAGE(c.status != "fail", c.id);
  }
  REQUIRE(rep.find("H1.tail"));
  CHECK(rep.find("H1.tail")->status == "truncated: not satisfied");
  CHECK(rep.find("H2.tail")->status == "truncated: not satisfied");
}

TEST_CASE("validate: non-integrable tails are satisfied and truncated") {
  const auto spec = testing::load_spec("reference.json");
  const auto rep = validate(spec);
  CHECK(rep.ok());
  CHECK(rep.find("H1.tail")->status == "truncated: satisfied");
  CHECK(rep.find("H2.tail")->status == "truncated: satisfied");
  CHECK(spec.mortality.age_tail_truncated());
  // truncated rate is held constant past the cut
  CHECK(spec.mortality.mu1(0.99) == doctest::Approx(spec.mortality.mu1(0.95)));
  CHECK(std::isfinite(spec.mortality.integral_mu1(0.0, 1.0)));
  // H2 is checked on [0, s*] with s* < S, so a tail at S is locally integrable
  CHECK(rep.find("H2.locally_integrable")->status == "pass");
}

TEST_CASE("validate: degenerate k = x(1-x) satisfies the degeneracy inequalities") {
  const auto spec = testing::load_spec("degenerate.json");
  const auto rep = validate(spec);
  CHECK(rep.ok());
  REQUIRE(rep.find("A2.degeneracy_inequalities"));
  CHECK(rep.find("A2.degeneracy_inequalities")->status == "pass");
  CHECK(rep.find("A2.endpoint_degeneracy")->status == "pass");
  CHECK(rep.find("A2.b_over_k_integrable")->status == "pass");
  // the identity behind it: x k' = x (1 - 2x) <= x (1 - x) on (0, 1)
  for (int i = 1; i < 100; ++i) {
    const double x = i / 100.0;
    CHECK(x * spec.diffusion.k.derivative(x) <= spec.diffusion.m1 * spec.diffusion.k(x) + 1e-15);
  }
}

TEST_CASE("validate: negative table sample fails H3 with its index") {
  auto j = base_json();
  j["growth"]["rate"] = {{"kind", "table"}, {"x", {0.0, 0.25, 0.5, 0.75, 1.0}}, {"y", {1.0, 1.0, -0.5, 1.0, 1.0}}};
  const auto rep = validate(spec_from(j));
  CHECK_FALSE(rep.ok());
  const auto* c = rep.find("H3.growth_nonnegative");
  REQUIRE(c);
  CHECK(c->status == "fail");
  CHECK(c->witness["sample_index"] == 2);
}

TEST_CASE("validate: non-finite samples throw") {
  auto spec = spec_from(base_json());
  spec.mortality.age_rate = RateFunction::table({0.0, 0.5, 1.0}, {1.0, std::numeric_limits<double>::quiet_NaN(), 1.0});
  try {
    (void)validate(spec);
    FAIL("expected NonFiniteSample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteSample);
  }
}

TEST_CASE("validate: kernel below a_hat, control windows, hypotheses") {
  auto j = base_json();
  j["fertility"]["min_fertile_age"] = 0.5;
  j["fertility"]["age"] = {{"kind", "bump"}, {"amplitude", 1.0}, {"lo", 0.2}, {"hi", 0.8}};
  auto rep = validate(spec_from(j));
  CHECK(rep.find("H5.vanishes_below_a_hat")->status == "fail");

  j = base_json();
  j["control"]["omega"] = {0.0, 0.5};
  rep = validate(spec_from(j));
  CHECK(rep.find("control.omega_inside")->status == "fail");

  // hypotheses are reported, never enforced
  const auto ok = validate(testing::load_spec("reference.json"));
  CHECK(ok.hypotheses == std::vector<bool>{true, true, true});
  auto shrink = testing::load_spec("reference.json");
  shrink.control.a_hi = 0.25;
  const auto r2 = validate(shrink);
  CHECK(r2.ok());
  CHECK(r2.hypotheses[1] == false);
  CHECK(ok.non_extinction);
}

TEST_CASE("validate is pure") {
  const auto spec = testing::load_spec("reference.json");
  const auto before = spec.to_json();
  CHECK(validate(spec).to_json() == validate(spec).to_json());
  CHECK(spec.to_json() == before);
}

TEST_CASE("spec json round trip") {
  for (const char* name : {"reference.json", "degenerate.json", "kernel_gap.json"}) {
    const auto spec = testing::load_spec(name);
    CHECK(ModelSpec::from_json(spec.to_json()).to_json() == spec.to_json());
  }
  auto j = base_json();
  j.erase("growth");
  CHECK_THROWS_AS(spec_from(j), Error);
}

TEST_CASE("transit times") {
  SUBCASE("g = 1, s1 = 0.2, s2 = 0.8, a1 = 0.1") {
    const auto t = transit_times(window(0.1, 0.9, 0.2, 0.8));
    CHECK(t.s1_star == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(t.s2_star == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(t.t0 == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(t.t1 == doctest::Approx(0.3).epsilon(1e-14));
  }
  SUBCASE("g = 1, s1 = 0.5, s2 = 0.9, a1 = 0") {
    const auto t = transit_times(window(0.0, 1.0, 0.5, 0.9));
    CHECK(t.t1 == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(t.t1 == doctest::Approx(t.s1_star).epsilon(1e-14));
  }
  SUBCASE("g = 1 + s, S = e - 1, s2 = S") {
    auto j = base_json();
    const double S = std::exp(1.0) - 1.0;
    j["growth"] = {{"variant", "rate"}, {"rate", {{"kind", "affine"}, {"c0", 1.0}, {"c1", 1.0}}}, {"max_size", S}};
    j["control"]["size"] = {0.4, S};
    const auto t = transit_times(spec_from(j));
    CHECK(std::abs(t.s2_star) <= 1e-14);
    CHECK(t.t0 == doctest::Approx(std::log(1.4)).epsilon(1e-13));
    CHECK(t.s1_star == doctest::Approx(std::log(1.4)).epsilon(1e-13));
  }
  SUBCASE("g vanishing at 0 diverges") {
    auto j = base_json();
    j["growth"]["rate"] = {{"kind", "power"}, {"c", 1.0}, {"p", 1.0}};
    try {
      (void)transit_times(spec_from(j));
      FAIL("expected QuadratureFailure");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::QuadratureFailure);
    }
  }
}

TEST_CASE("critical sizes") {
  const auto c = critical_sizes(window(0.1, 0.9, 0.2, 0.8));
  REQUIRE(c.alpha);
  REQUIRE(c.beta);
  CHECK(*c.alpha == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(*c.beta == doctest::Approx(0.1).epsilon(1e-12));
  const auto none = critical_sizes(window(0.3, 0.9, 0.2, 0.8));
  CHECK_FALSE(none.beta);
  CHECK(none.alpha);
}

TEST_CASE("critical sizes round trip through G (property)") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto j = base_json();
  j["growth"]["rate"] = {{"kind", "affine"}, {"c0", 0.5}, {"c1", 2.0}};
  for (int t = 0; t < 200; ++t) {
    const double s1 = 0.05 + 0.4 * U(rng), s2 = s1 + 0.05 + (0.95 - s1) * U(rng) * 0.9;
    const double a1 = 0.6 * U(rng);
    j["control"]["age"] = {a1, 0.95};
    j["control"]["size"] = {s1, s2};
    const auto spec = spec_from(j);
    const auto c = critical_sizes(spec);
    auto G = [&](double s) { return spec.growth.reciprocal_integral(0.0, s); };
    if (c.alpha) {
      CHECK(*c.alpha > 0.0);
      CHECK(*c.alpha < s2);
      CHECK(std::abs(G(s2) - G(*c.alpha) - a1) <= 1e-12);
    } else {
      CHECK(a1 >= G(s2) - 1e-15);
    }
    if (c.beta) CHECK(std::abs(G(s1) - G(*c.beta) - a1) <= 1e-12);
  }
}

TEST_CASE("minimal time") {
  const auto ref = window(0.1, 0.9, 0.2, 0.8);
  CHECK(minimal_time(ref, KernelKind::Probabilistic) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(minimal_time(ref, KernelKind::Local) == doctest::Approx(0.6).epsilon(1e-14));
  const auto gap = window(0.0, 1.0, 0.5, 0.9);
  CHECK(minimal_time(gap, KernelKind::Probabilistic) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(minimal_time(gap, KernelKind::Local) == doctest::Approx(0.6).epsilon(1e-14));
  // s2 = S: S2* = 0 and the formula keeps both T1 = S1* and T0 = S1*
  const auto edge = window(0.0, 0.9, 0.3, 1.0);
  const auto t = transit_times(edge);
  CHECK(std::abs(t.s2_star) < 1e-15);
  CHECK(t.t1 == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(minimal_time(edge, KernelKind::Probabilistic) == doctest::Approx(0.1 + t.t1 + t.t0).epsilon(1e-14));
}

TEST_CASE("probabilistic threshold never below local (property)") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const double s1 = 0.01 + 0.9 * U(rng);
    const double s2 = s1 + (1.0 - s1) * U(rng);
    const double a1 = 0.9 * U(rng);
    const double a2 = a1 + (1.0 - a1) * std::max(0.01, U(rng));
    const auto spec = window(a1, a2, s1, std::max(s2, s1 + 1e-3));
    const auto tt = transit_times(spec);
    const double gap = minimal_time(spec, KernelKind::Probabilistic) - minimal_time(spec, KernelKind::Local);
    CHECK(gap >= -1e-14);
    const double expected =
        std::max(a1 + tt.s2_star, tt.s1_star) + std::max(tt.s1_star, tt.s2_star) - (a1 + tt.s1_star + tt.s2_star);
    CHECK(gap == doctest::Approx(expected).epsilon(1e-12));
    CHECK(tt.t0 >= tt.s1_star);
    CHECK(tt.t1 >= tt.s1_star);
  }
}

TEST_CASE("error taxonomy") {
  CHECK(is_validation_error(ErrorKind::InvalidConfig));
  CHECK(is_validation_error(ErrorKind::GridMismatch));
  CHECK_FALSE(is_validation_error(ErrorKind::SingularSystem));
  CHECK_FALSE(is_validation_error(ErrorKind::QuadratureFailure));
  const Error e(ErrorKind::OutOfRange, "x");
  CHECK(std::string(e.what()).find("OutOfRange") == 0);
}
