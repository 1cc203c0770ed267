#include <atomic>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "popctrl/error.hpp"
#include "popctrl/experiments.hpp"
#include "support.hpp"

using namespace popctrl;
using testing::base_json;
using testing::cube;
using testing::spec_from;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidConfig;
}

}  // namespace

TEST_CASE("parallel_for visits every index once") {
  for (int threads : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(57);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("sweep guards and row layout") {
  const auto spec = testing::load_spec("reference.json");
  const auto grid = cube(9, 0.5);
  CHECK(kind_of([&] { sweep_time(spec, grid, {}, {1e-2}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { sweep_time(spec, grid, {0.5}, {}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { sweep_time(spec, grid, {-0.5}, {1e-2}); }) == ErrorKind::InvalidConfig);

  SweepOptions opt;
  opt.threads = 2;
  const auto rep = sweep_time(spec, grid, {0.5, 0.25}, {1e-3, 1e-1}, opt);
  REQUIRE(rep.rows.size() == 4u);
  // sorted by T, then by decreasing eps
  CHECK(rep.rows[0]["T"] == 0.25);
  CHECK(rep.rows[0]["epsilon"] == 1e-1);
  CHECK(rep.rows[1]["epsilon"] == 1e-3);
  CHECK(rep.rows[3]["T"] == 0.5);
  CHECK(rep.rows[0]["steps"] == 2);
  CHECK(rep.metadata["threshold"].get<double>() == doctest::Approx(0.6));
  CHECK(rep.metadata["failed_rows"] == 0);
  for (const auto& r : rep.rows) CHECK(r["status"] == "ok");
  // smaller eps drives the terminal state down
  CHECK(rep.rows[1]["terminal_norm_ratio"].get<double>() < rep.rows[0]["terminal_norm_ratio"].get<double>());

  // determinism across thread counts, and the fingerprint ignores threads
  opt.threads = 1;
  const auto again = sweep_time(spec, grid, {0.25, 0.5}, {1e-1, 1e-3}, opt);
  CHECK(again.rows == rep.rows);
  CHECK(again.fingerprint == rep.fingerprint);
  CHECK(rep.fingerprint.size() == 16u);
  opt.y0.seed = 7;
  CHECK(sweep_time(spec, grid, {0.25}, {1e-1}, opt).fingerprint != rep.fingerprint);
}

TEST_CASE("sweep without births: every row has zero cost") {
  auto j = base_json();
  j["diffusion"]["conductivity"] = 0.2;
  const auto spec = spec_from(j);
  const auto rep = sweep_time(spec, cube(9, 1.0), {1.0}, {1e-2, 1e-4});
  for (const auto& r : rep.rows) {
    CHECK(r["control_cost"].get<double>() <= 1e-12);
    CHECK(r["terminal_norm_ratio"].get<double>() <= 1e-10);
  }
}

TEST_CASE("report CSV and JSON") {
  ExperimentReport rep;
  rep.kind = "demo";
  rep.rows.push_back({{"T", 0.5}, {"status", "ok"}});
  rep.rows.push_back({{"T", 1.0}, {"status", "failed"}, {"error", "x, y"}});
  const auto csv = rep.to_csv();
  std::istringstream in(csv);
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(header == "T,status,error");
  CHECK(l1 == "0.5,ok,");
  CHECK(l2 == "1,failed,\"x, y\"");
  CHECK(rep.to_json()["kind"] == "demo");
}

TEST_CASE("fingerprints track spec and grid") {
  const auto spec = testing::load_spec("reference.json");
  const auto f1 = fingerprint(spec, cube(9, 0.5));
  CHECK(f1 == fingerprint(spec, cube(9, 0.5)));
  CHECK(f1 != fingerprint(spec, cube(9, 0.75)));
  CHECK(f1 != fingerprint(testing::load_spec("kernel_gap.json"), cube(9, 0.5)));
  CHECK(f1 != fingerprint(spec, cube(9, 0.5), {{"extra", 1}}));
}

TEST_CASE("matched local kernel") {
  auto j = base_json();
  j["fertility"]["parent_size"] = {{"kind", "affine"}, {"c0", 1.0}, {"c1", 2.0}};
  j["fertility"]["newborn_size"] = 3.0;
  j["fertility"]["age"] = {{"kind", "bump"}, {"amplitude", 1.0}, {"lo", 0.9}, {"hi", 1.0}};
  const auto prob = spec_from(j);
  const auto loc = matched_local_kernel(prob);
  CHECK(loc.fertility.kind == KernelKind::Local);
  // mean parent 2, newborn total 3
  CHECK(loc.fertility.age(0.95) == doctest::Approx(6.0 * prob.fertility.age(0.95)).epsilon(1e-12));
  CHECK(kind_of([&] { matched_local_kernel(loc); }) == ErrorKind::KernelMismatch);
}

TEST_CASE("compare kernels: guards and a zero-gap window") {
  const auto prob = testing::load_spec("reference.json");
  const auto loc = matched_local_kernel(prob);
  const KernelCase p{prob, cube(9, 0.5)}, l{loc, cube(9, 0.5)};
  CHECK(kind_of([&] { compare_kernels(p, KernelCase{loc, cube(5, 0.5)}, {0.5}); }) == ErrorKind::GeometryMismatch);
  auto moved = loc;
  moved.control.a_lo = 0.2;
  CHECK(kind_of([&] { compare_kernels(p, KernelCase{moved, cube(9, 0.5)}, {0.5}); }) == ErrorKind::GeometryMismatch);
  CHECK(kind_of([&] { compare_kernels(l, p, {0.5}); }) == ErrorKind::KernelMismatch);
  CHECK(kind_of([&] { compare_kernels(p, l, {}); }) == ErrorKind::InvalidConfig);

  // the reference window has S1* = S2* and a1 > 0: thresholds agree
  const auto rep = compare_kernels(p, l, {0.5, 0.25});
  CHECK(rep.metadata["analytic_gap"].get<double>() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(rep.metadata["threshold_probabilistic"].get<double>() == doctest::Approx(0.6));
  CHECK(rep.rows.size() == 2u);
  CHECK(rep.rows[0]["T"] == 0.25);
  CHECK(rep.rows[0].contains("local_cost"));
}

TEST_CASE("analytic gap of the kernel-gap window is 0.4") {
  const auto prob = testing::load_spec("kernel_gap.json");
  const auto loc = matched_local_kernel(prob);
  const auto t = transit_times(prob);
  CHECK(t.s1_star == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.s2_star == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(minimal_time(prob, KernelKind::Probabilistic) - minimal_time(loc, KernelKind::Local) ==
        doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("certify vanishing: small ladder, NOT-APPLICABLE, missing alpha*") {
  const auto spec = testing::load_spec("reference.json");
  const auto rep = certify_vanishing(spec, {cube(17, 0.8), cube(33, 0.8)}, 0.8);
  CHECK(rep.metadata["status"] == "PASS");
  // on 9 nodes the margin leaves no size node above alpha* + 2 ds
  const auto coarse = certify_vanishing(spec, {cube(9, 0.8)}, 0.8);
  CHECK(coarse.metadata["status"] == "NOT-APPLICABLE");
  CHECK(coarse.metadata["reason"] == "empty check region");
  CHECK(rep.metadata["alpha_star"].get<double>() == doctest::Approx(0.7));
  CHECK(rep.rows.size() == 2u);

  // a1 = a_hat = 0: hypothesis a1 < a_hat fails
  auto j = base_json();
  j["fertility"]["min_fertile_age"] = 0.0;
  j["control"]["age"] = {0.0, 0.9};
  const auto na = certify_vanishing(spec_from(j), {cube(9, 0.8)}, 0.8);
  CHECK(na.metadata["status"] == "NOT-APPLICABLE");

  // s2 = S: alpha* = G^-1(G(S) - a1)
  auto edge = spec;
  edge.control.s_hi = 1.0;
  CHECK(critical_sizes(edge).alpha.value() == doctest::Approx(0.9).epsilon(1e-12));

  auto none = spec;
  none.control.a_lo = 0.85;
  CHECK(kind_of([&] { certify_vanishing(none, {cube(9, 0.8)}, 0.8); }) == ErrorKind::MissingCriticalSize);
  CHECK(kind_of([&] { certify_vanishing(spec, {}, 0.8); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("oracle modes, guards and the pure-diffusion agreement") {
  CHECK(oracle_mode_from_string("pure-diffusion") == OracleMode::PureDiffusion);
  CHECK(to_string(OracleMode::PureTransport) == "pure-transport");
  CHECK(kind_of([] { oracle_mode_from_string("nope"); }) == ErrorKind::InvalidConfig);

  const auto spec = testing::load_spec("reference.json");
  OracleOptions small;
  small.max_unknowns = 500;
  CHECK(kind_of([&] { oracle_check(spec, cube(9, 0.5), small); }) == ErrorKind::OracleTooLarge);

  OracleOptions pt;
  pt.mode = OracleMode::PureTransport;
  CHECK(kind_of([&] { oracle_check(testing::load_spec("degenerate.json"), cube(9, 0.5), pt); }) ==
        ErrorKind::InvalidConfig);

  // Crank-Nicolson against a dense Crank-Nicolson: round-off only
  OracleOptions pd;
  pd.mode = OracleMode::PureDiffusion;
  pd.dt_divisors = {1, 2};
  for (const char* name : {"reference.json", "degenerate.json"}) {
    const auto rep = oracle_check(testing::load_spec(name), cube(17, 0.5), pd);
    CHECK(rep.metadata["final_deviation"].get<double>() <= 1e-8);
  }
}

TEST_CASE("full oracle converges at first order in dt") {
  const auto rep = oracle_check(testing::load_spec("coupled_9.json"), cube(9, 0.5));
  REQUIRE(rep.metadata["ratios"].size() == 2u);
  for (const auto& r : rep.metadata["ratios"]) {
    CHECK(r.get<double>() > 0.35);
    CHECK(r.get<double>() < 0.65);
  }
  CHECK(rep.metadata["final_deviation"].get<double>() <= 5e-2);
}
