#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "popctrl/characteristics.hpp"
#include "popctrl/error.hpp"
#include "support.hpp"

using namespace popctrl;
using testing::base_json;
using testing::spec_from;

namespace {

ModelSpec with_growth(const nlohmann::json& rate, double S = 1.0) {
  auto j = base_json();
  j["growth"] = {{"variant", "rate"}, {"rate", rate}, {"max_size", S}};
  j["control"]["size"] = {0.2 * S, 0.8 * S};
  return spec_from(j);
}

ModelSpec with_mortality(const nlohmann::json& mu1, const nlohmann::json& mu2) {
  auto j = base_json();
  j["mortality"]["age_rate"] = mu1;
  j["mortality"]["size_rate"] = mu2;
  return spec_from(j);
}

}  // namespace

TEST_CASE("growth time examples") {
  const CharacteristicsTable unit(spec_from(base_json()));
  CHECK(unit.growth_time(0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(unit.growth_time(0.0) == 0.0);
  CHECK_THROWS_AS(unit.growth_time(1.5), Error);
  CHECK_THROWS_AS(unit.growth_time(-0.1), Error);

  const CharacteristicsTable root(with_growth({{"kind", "power"}, {"c", 2.0}, {"p", 0.5}}));
  CHECK(root.growth_time(0.25) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tabulated growth against a fine composite oracle") {
  std::vector<double> x, y;
  for (int i = 0; i < 64; ++i) {
    x.push_back(i / 63.0);
    y.push_back(1.0 + x.back());
  }
  const auto spec = with_growth({{"kind", "table"}, {"x", x}, {"y", y}});
  const CharacteristicsTable tab(spec);
  // Simpson on 10^6 panels of 1/g for the same interpolant
  const int n = 1000000;
  const double h = 1.0 / n;
  double s = 1.0 / spec.growth(0.0) + 1.0 / spec.growth(1.0);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) / spec.growth(i * h);
  const double oracle = s * h / 3.0;
  CHECK(tab.growth_time(1.0) == doctest::Approx(oracle).epsilon(1e-11));
  // the interpolant of 1 + s is 1 + s up to the cubic's exactness on lines
  CHECK(tab.growth_time(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("inverse growth") {
  const CharacteristicsTable unit(spec_from(base_json()));
  CHECK(unit.inverse_growth(0.7) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(unit.inverse_growth(unit.total_growth_time()) == 1.0);
  CHECK_THROWS_AS(unit.inverse_growth(1.2), Error);

  const CharacteristicsTable aff(with_growth({{"kind", "affine"}, {"c0", 1.0}, {"c1", 1.0}}, std::exp(1.0) - 1.0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double GS = aff.total_growth_time();
  for (int i = 0; i < 1000; ++i) {
    const double tau = GS * U(rng);
    CHECK(std::abs(aff.growth_time(aff.inverse_growth(tau)) - tau) <= 1e-12 * GS);
  }
  for (double s : aff.nodes()) CHECK(std::abs(aff.inverse_growth(aff.growth_time(s)) - s) <= 1e-12);
}

TEST_CASE("table invariants") {
  const CharacteristicsTable tab(testing::load_spec("reference.json"));
  const auto& G = tab.g_values();
  CHECK(G.front() == 0.0);
  for (std::size_t i = 1; i < G.size(); ++i) CHECK(G[i] > G[i - 1]);
  const auto& l1 = tab.log_pi1_values();
  for (std::size_t i = 1; i < l1.size(); ++i) CHECK(l1[i] <= l1[i - 1]);
  const auto& l2 = tab.log_pi2_values();
  for (std::size_t i = 1; i < l2.size(); ++i) CHECK(l2[i] <= l2[i - 1]);
}

TEST_CASE("survival ratio examples") {
  const CharacteristicsTable c(with_mortality(0.3, 0.0));
  CHECK(c.survival_ratio(0.8, 0.6, 0.5) == doctest::Approx(std::exp(-0.15)).epsilon(1e-14));
  CHECK(c.survival_ratio(0.8, 0.6, 0.0) == 1.0);

  const CharacteristicsTable lin(with_mortality({{"kind", "affine"}, {"c0", 0.0}, {"c1", 1.0}}, 0.0));
  CHECK(lin.survival_ratio(0.8, 0.9, 0.5) == doctest::Approx(std::exp(-(0.64 - 0.09) / 2.0)).epsilon(1e-13));

  CHECK_THROWS_AS(c.survival_ratio(0.3, 0.6, 0.5), Error);
}

TEST_CASE("survival ratio is multiplicative (property)") {
  const auto spec = with_mortality({{"kind", "piecewise_constant"}, {"breaks", {0.4}}, {"values", {0.2, 1.1}}},
                                   {{"kind", "bump"}, {"amplitude", 0.7}, {"lo", 0.1}, {"hi", 0.9}});
  const CharacteristicsTable tab(spec);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double a = 0.2 + 0.8 * U(rng), s = 0.2 + 0.8 * U(rng);
    const double t = std::min(a, s) * U(rng);
    const double t1 = t * U(rng), t2 = t - t1;
    const double whole = tab.survival_ratio(a, s, t);
    // first t2 from the earlier point, then t1 to (a, s)
    const double s_mid = tab.inverse_growth(tab.growth_time(s) - t1);
    const double parts = tab.survival_ratio(a - t1, s_mid, t2) * tab.survival_ratio(a, s, t1);
    CHECK(testing::rel(whole, parts) <= 1e-12);
  }
}

TEST_CASE("classify examples") {
  const CharacteristicsTable tab(spec_from(base_json()));
  CHECK(tab.classify(0.2, 0.2, 0.5).region == Region::A1);
  CHECK(tab.classify(0.7, 0.2, 0.5).region == Region::A1Prime);
  CHECK(tab.classify(0.2, 0.7, 0.5).region == Region::A2Prime);
  const auto tie = tab.classify(0.7, 0.7, 0.5);
  CHECK(tie.tie);
  CHECK(tie.region == Region::A2Prime);
}

TEST_CASE("classify agrees with the argmax form (property)") {
  const CharacteristicsTable tab(with_growth({{"kind", "affine"}, {"c0", 0.5}, {"c1", 1.0}}));
  const double A = 1.0, GS = tab.total_growth_time();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = A * U(rng), s = U(rng), t = 2.0 * U(rng);
    const double v[3] = {0.0, t - A + a, t - GS + tab.growth_time(s)};
    const auto c = tab.classify(a, s, t);
    if (c.tie) continue;
    const int arg = static_cast<int>(std::max_element(v, v + 3) - v);
    const Region expected = arg == 0 ? Region::A1 : arg == 1 ? Region::A1Prime : Region::A2Prime;
    CHECK(c.region == expected);
    ++checked;
  }
  CHECK(checked > 99000);
}

TEST_CASE("backward foot and lower limit") {
  const CharacteristicsTable tab(spec_from(base_json()));
  auto [a0, s0] = tab.backward_foot(0.3, 0.4, 0.5, 0.5);
  CHECK(a0 == doctest::Approx(0.3));
  CHECK(s0 == doctest::Approx(0.4));
  auto [a1, s1] = tab.backward_foot(0.1, 0.1, 0.5, 0.2);
  CHECK(a1 == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(s1 == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(tab.lower_limit(0.7, 0.2, 0.5) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(tab.backward_foot(0.7, 0.2, 0.5, 0.0), Error);
}

TEST_CASE("characteristic invariance (property)") {
  const CharacteristicsTable tab(with_growth({{"kind", "affine"}, {"c0", 1.0}, {"c1", 0.5}}));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = U(rng), s = U(rng), t = U(rng);
    const double lo = tab.lower_limit(a, s, t);
    const double lam = lo + (t - lo) * U(rng);
    const auto [af, sf] = tab.backward_foot(a, s, t, lam);
    CHECK(std::abs((af - (t - lam)) - a) <= 1e-12);
    CHECK(std::abs(tab.growth_time(sf) - (t - lam) - tab.growth_time(s)) <= 1e-11);
  }
}

TEST_CASE("growth time cap emulates the s2 = S regime") {
  auto j = base_json();
  j["growth"] = {{"variant", "rate"}, {"rate", {{"kind", "affine"}, {"c0", 1.0}, {"c1", -1.0}}}, {"max_size", 1.0},
                 {"growth_time_cap", 3.0}};
  const CharacteristicsTable tab(spec_from(j));
  CHECK(tab.total_growth_time() == doctest::Approx(3.0));
  CHECK(tab.growth_time(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(tab.inverse_growth(3.0) == 1.0);
}

TEST_CASE("csv dump") {
  const CharacteristicsTable tab(spec_from(base_json()));
  const auto prefix = (std::filesystem::temp_directory_path() / "popctrl_char").string();
  tab.dump_csv(prefix, 11);
  std::ifstream g(prefix + "_G.csv"), gi(prefix + "_Ginv.csv");
  std::string line;
  int n = 0;
  while (std::getline(g, line)) ++n;
  CHECK(n == 12);
  CHECK(static_cast<bool>(gi));
}
