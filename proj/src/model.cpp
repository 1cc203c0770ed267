#include "popctrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "popctrl/error.hpp"
#include "popctrl/quadrature.hpp"

namespace popctrl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSamples = 257;

double interior_sample(double lo, double hi, int i, int n = kSamples) {
  return lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
}

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::InvalidConfig, std::string("missing key '") + key + "'");
  return j.at(key);
}

double number_or(const nlohmann::json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::pair<double, double> interval(const nlohmann::json& j, const char* key) {
  const auto v = require(j, key).get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorKind::InvalidConfig, std::string("'") + key + "' must be [lo, hi]");
  return {v[0], v[1]};
}

std::string variant_of(const nlohmann::json& j, const char* fallback) {
  return j.contains("variant") ? j.at("variant").get<std::string>() : std::string(fallback);
}

void require_finite(double v, const std::string& what, double at) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::NonFiniteSample, what + " is not finite at " + std::to_string(at));
  }
}

ValidationCheck check(std::string id, bool pass, std::string detail, nlohmann::json witness = nullptr) {
  return {std::move(id), pass ? "pass" : "fail", std::move(detail), std::move(witness)};
}

}  // namespace

// ---------------------------------------------------------------------------
// GrowthModel

double GrowthModel::reciprocal_integral(double lo, double hi) const {
  if (hi == lo) return 0.0;
  if (hi < lo) return -reciprocal_integral(hi, lo);
  const auto& repr = rate.repr();
  if (const auto* c = std::get_if<RateFunction::Constant>(&repr)) {
    return c->value > 0.0 ? (hi - lo) / c->value : kInf;
  }
  if (const auto* p = std::get_if<RateFunction::Polynomial>(&repr); p && p->coeffs.size() <= 2) {
    const double c0 = p->coeffs[0];
    const double c1 = p->coeffs.size() > 1 ? p->coeffs[1] : 0.0;
    const double g_lo = c0 + c1 * lo, g_hi = c0 + c1 * hi;
    if (g_lo <= 0.0 || g_hi <= 0.0) return kInf;
    if (c1 == 0.0) return (hi - lo) / c0;
    return std::log1p(c1 * (hi - lo) / g_lo) / c1;
  }
  if (const auto* pw = std::get_if<RateFunction::Power>(&repr)) {
    if (pw->c <= 0.0) return kInf;
    if (pw->p >= 1.0) {
      if (lo <= 0.0) return kInf;
      if (pw->p == 1.0) return std::log(hi / lo) / pw->c;
    }
    const double e = 1.0 - pw->p;
    return (std::pow(hi, e) - std::pow(std::max(lo, 0.0), e)) / (pw->c * e);
  }
  const auto breaks = rate.breakpoints();
  try {
    return integrate([this](double u) { return 1.0 / rate(u); }, lo, hi, breaks);
  } catch (const Error&) {
    if (rate(lo) <= 0.0 || rate(hi) <= 0.0) return kInf;
    throw;
  }
}

std::optional<double> GrowthModel::closed_form_inverse(double tau) const {
  const auto& repr = rate.repr();
  if (const auto* c = std::get_if<RateFunction::Constant>(&repr)) {
    if (c->value > 0.0) return c->value * tau;
  }
  if (const auto* p = std::get_if<RateFunction::Polynomial>(&repr); p && p->coeffs.size() <= 2) {
    const double c0 = p->coeffs[0];
    const double c1 = p->coeffs.size() > 1 ? p->coeffs[1] : 0.0;
    if (c0 > 0.0) return c1 == 0.0 ? c0 * tau : c0 * std::expm1(c1 * tau) / c1;
  }
  if (const auto* pw = std::get_if<RateFunction::Power>(&repr)) {
    if (pw->c > 0.0 && pw->p < 1.0) {
      const double e = 1.0 - pw->p;
      return std::pow(pw->c * e * tau, 1.0 / e);
    }
  }
  return std::nullopt;
}

double growth_time_direct(const GrowthModel& growth, double s) {
  if (s <= 0.0) return 0.0;
  const double v = growth.reciprocal_integral(0.0, s);
  if (!std::isfinite(v)) {
    if (growth.growth_time_cap) return *growth.growth_time_cap;
    throw Error(ErrorKind::QuadratureFailure,
                "growth time to size " + std::to_string(s) + " diverges and no growth_time_cap is set");
  }
  return growth.growth_time_cap ? std::min(v, *growth.growth_time_cap) : v;
}

double invert_growth_direct(const GrowthModel& growth, double tau, double s_hi) {
  if (tau <= 0.0) return 0.0;
  const double g_hi = growth_time_direct(growth, s_hi);
  if (tau >= g_hi) return s_hi;
  if (auto closed = growth.closed_form_inverse(tau); closed && *closed <= s_hi) return *closed;
  auto f = [&](double s) { return growth_time_direct(growth, s) - tau; };
  std::uintmax_t max_iter = 200;
  try {
    auto [lo, hi] = boost::math::tools::toms748_solve(f, 0.0, s_hi, -tau, g_hi - tau,
                                                      boost::math::tools::eps_tolerance<double>(52), max_iter);
    return 0.5 * (lo + hi);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::InversionFailure, std::string("growth-time inversion failed: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// MortalityModel

bool MortalityModel::age_tail_truncated() const {
  return !std::isfinite(age_rate.integral(0.0, max_age));
}

bool MortalityModel::size_tail_truncated() const {
  return !std::isfinite(size_rate.integral(0.0, max_size));
}

double MortalityModel::mu1(double a) const {
  return age_tail_truncated() ? age_rate(std::min(a, age_cut())) : age_rate(a);
}

double MortalityModel::mu2(double s) const {
  return size_tail_truncated() ? size_rate(std::min(s, size_cut())) : size_rate(s);
}

namespace {
double truncated_integral(const RateFunction& f, bool truncated, double cut, double lo, double hi) {
  if (!truncated || hi <= cut) return f.integral(lo, hi);
  double total = 0.0;
  if (lo < cut) total += f.integral(lo, cut);
  total += f(cut) * (hi - std::max(lo, cut));
  return total;
}
}  // namespace

double MortalityModel::integral_mu1(double lo, double hi) const {
  return truncated_integral(age_rate, age_tail_truncated(), age_cut(), lo, hi);
}

double MortalityModel::integral_mu2(double lo, double hi) const {
  return truncated_integral(size_rate, size_tail_truncated(), size_cut(), lo, hi);
}

// ---------------------------------------------------------------------------
// DiffusionSpec

double DiffusionSpec::gamma(double x) const {
  if (const auto* c = std::get_if<RateFunction::Constant>(&b.repr()); c && c->value == 0.0) return 1.0;
  std::vector<double> breaks = b.breakpoints();
  const auto kb = k.breakpoints();
  breaks.insert(breaks.end(), kb.begin(), kb.end());
  return std::exp(integrate([this](double y) { return b(y) / k(y); }, 0.75, x, breaks));
}

// ---------------------------------------------------------------------------
// JSON

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Probabilistic: return "probabilistic";
    case KernelKind::Local: return "local";
    case KernelKind::LocalAgeSize: return "local_age_size";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "probabilistic") return KernelKind::Probabilistic;
  if (name == "local") return KernelKind::Local;
  if (name == "local_age_size") return KernelKind::LocalAgeSize;
  throw Error(ErrorKind::InvalidConfig, "unknown fertility variant '" + name + "'");
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j;
  j["growth"] = {{"variant", "rate"}, {"rate", growth.rate.to_json()}, {"max_size", growth.max_size}};
  if (growth.growth_time_cap) j["growth"]["growth_time_cap"] = *growth.growth_time_cap;
  j["mortality"] = {{"variant", "additive"},
                    {"age_rate", mortality.age_rate.to_json()},
                    {"size_rate", mortality.size_rate.to_json()},
                    {"max_age", mortality.max_age},
                    {"integrable_cutoff", mortality.integrable_cutoff}};
  j["fertility"] = {{"variant", to_string(fertility.kind)},
                    {"min_fertile_age", fertility.min_fertile_age},
                    {"age", fertility.age.to_json()}};
  if (fertility.kind != KernelKind::Local) j["fertility"]["parent_size"] = fertility.parent_size.to_json();
  if (fertility.kind == KernelKind::Probabilistic) j["fertility"]["newborn_size"] = fertility.newborn_size.to_json();
  if (diffusion.kind == DiffusionKind::NondegenerateNeumann) {
    j["diffusion"] = {{"variant", "neumann"},
                      {"length", diffusion.length},
                      {"conductivity", diffusion.conductivity.to_json()}};
  } else {
    j["diffusion"] = {{"variant", "degenerate_dirichlet"},
                      {"k", diffusion.k.to_json()},
                      {"b", diffusion.b.to_json()},
                      {"m1", diffusion.m1},
                      {"m2", diffusion.m2}};
  }
  j["control"] = {{"variant", "box"},
                  {"omega", {control.x_lo, control.x_hi}},
                  {"age", {control.a_lo, control.a_hi}},
                  {"size", {control.s_lo, control.s_hi}}};
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    const auto& g = require(j, "growth");
    if (const auto v = variant_of(g, "rate"); v != "rate") {
      throw Error(ErrorKind::InvalidConfig, "unknown growth variant '" + v + "'");
    }
    spec.growth.rate = RateFunction::from_json(require(g, "rate"));
    spec.growth.max_size = number_or(g, "max_size", 1.0);
    if (g.contains("growth_time_cap")) spec.growth.growth_time_cap = g.at("growth_time_cap").get<double>();

    const auto& m = require(j, "mortality");
    if (const auto v = variant_of(m, "additive"); v != "additive") {
      throw Error(ErrorKind::InvalidConfig, "unknown mortality variant '" + v + "'");
    }
    spec.mortality.age_rate = RateFunction::from_json(m.value("age_rate", nlohmann::json(0.0)));
    spec.mortality.size_rate = RateFunction::from_json(m.value("size_rate", nlohmann::json(0.0)));
    spec.mortality.max_age = number_or(m, "max_age", 1.0);
    spec.mortality.integrable_cutoff = number_or(m, "integrable_cutoff", 0.95);
    spec.mortality.max_size = spec.growth.max_size;

    const auto& f = require(j, "fertility");
    spec.fertility.kind = kernel_kind_from_string(variant_of(f, "probabilistic"));
    spec.fertility.min_fertile_age = number_or(f, "min_fertile_age", 0.0);
    spec.fertility.age = RateFunction::from_json(f.value("age", nlohmann::json(0.0)));
    spec.fertility.parent_size = RateFunction::from_json(f.value("parent_size", nlohmann::json(1.0)));
    spec.fertility.newborn_size = RateFunction::from_json(f.value("newborn_size", nlohmann::json(1.0)));

    const auto& d = require(j, "diffusion");
    const auto dv = variant_of(d, "neumann");
    if (dv == "neumann") {
      spec.diffusion.kind = DiffusionKind::NondegenerateNeumann;
      spec.diffusion.length = number_or(d, "length", 1.0);
      spec.diffusion.conductivity = RateFunction::from_json(d.value("conductivity", nlohmann::json(1.0)));
    } else if (dv == "degenerate_dirichlet") {
      spec.diffusion.kind = DiffusionKind::DegenerateDirichlet;
      spec.diffusion.length = 1.0;
      spec.diffusion.k = RateFunction::from_json(require(d, "k"));
      spec.diffusion.b = RateFunction::from_json(d.value("b", nlohmann::json(0.0)));
      spec.diffusion.m1 = number_or(d, "m1", 1.0);
      spec.diffusion.m2 = number_or(d, "m2", 1.0);
    } else {
      throw Error(ErrorKind::InvalidConfig, "unknown diffusion variant '" + dv + "'");
    }

    const auto& c = require(j, "control");
    if (const auto v = variant_of(c, "box"); v != "box") {
      throw Error(ErrorKind::InvalidConfig, "unknown control variant '" + v + "'");
    }
    std::tie(spec.control.x_lo, spec.control.x_hi) = interval(c, "omega");
    std::tie(spec.control.a_lo, spec.control.a_hi) = interval(c, "age");
    std::tie(spec.control.s_lo, spec.control.s_hi) = interval(c, "size");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const {
  return std::none_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == "fail"; });
}

const ValidationCheck* ValidationReport::find(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"id", c.id}, {"status", c.status}, {"detail", c.detail}, {"witness", c.witness}});
  }
  j["hypotheses"] = {{"a1_lt_a_hat", hypotheses.at(0)},
                     {"s2_star_lt_min_a2_minus_a1_a_hat_minus_a1", hypotheses.at(1)},
                     {"s1_star_lt_min_a2_a_hat", hypotheses.at(2)}};
  j["non_extinction"] = non_extinction;
  return j;
}

namespace {

void check_mortality_component(std::vector<ValidationCheck>& out, const std::string& label,
                               const RateFunction& rate, double end, double cut, bool truncated,
                               const MortalityModel& m, bool age) {
  std::optional<double> negative_at;
  for (int i = 0; i < kSamples; ++i) {
    const double x = interior_sample(0.0, end, i);
    const double v = rate(x);
    require_finite(v, label, x);
    if (v < 0.0 && !negative_at) negative_at = x;
  }
  out.push_back(check(label + ".nonnegative", !negative_at, "rate >= 0 on interior samples",
                      negative_at ? nlohmann::json(*negative_at) : nlohmann::json(nullptr)));

  const double local = age ? m.integral_mu1(0.0, cut) : m.integral_mu2(0.0, cut);
  out.push_back(check(label + ".locally_integrable", std::isfinite(local),
                      "integral over [0, cutoff * end] is finite", local));

  const bool divergent = !std::isfinite(rate.integral(0.0, end));
  out.push_back({label + ".tail", divergent ? "truncated: satisfied" : "truncated: not satisfied",
                 truncated ? "non-integrable tail replaced by constant rate beyond cutoff"
                           : "integral to the end is finite; solver relies on its outflow boundary",
                 divergent});
}

}  // namespace

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport report;
  auto& out = report.checks;
  const double A = spec.max_age();
  const double S = spec.max_size();
  const bool part2 = spec.degenerate();

  out.push_back(check("domain.positive", A > 0.0 && S > 0.0, "A > 0 and S > 0", {{"A", A}, {"S", S}}));

  // mortality
  check_mortality_component(out, "H1", spec.mortality.age_rate, A, spec.mortality.age_cut(),
                            spec.mortality.age_tail_truncated(), spec.mortality, true);
  check_mortality_component(out, "H2", spec.mortality.size_rate, S, spec.mortality.size_cut(),
                            spec.mortality.size_tail_truncated(), spec.mortality, false);
  out.push_back(check("mortality.cutoff", spec.mortality.integrable_cutoff > 0.0 && spec.mortality.integrable_cutoff < 1.0,
                      "integrable_cutoff in (0, 1)", spec.mortality.integrable_cutoff));

  // growth
  {
    const std::string id = part2 ? "H5.growth_positive" : "H3.growth_nonnegative";
    nlohmann::json witness = nullptr;
    bool pass = true;
    const auto& ty = spec.growth.rate.table_y();
    for (std::size_t i = 0; i < ty.size(); ++i) {
      require_finite(ty[i], "growth table sample", static_cast<double>(i));
      const bool bad = part2 ? ty[i] <= 0.0 : ty[i] < 0.0;
      if (bad && pass) {
        pass = false;
        witness = {{"sample_index", i}, {"size", spec.growth.rate.table_x()[i]}, {"value", ty[i]}};
      }
    }
    for (int i = 0; i < kSamples && pass; ++i) {
      const double s = interior_sample(0.0, S, i);
      const double v = spec.growth(s);
      require_finite(v, "growth rate", s);
      if (part2 ? v <= 0.0 : v < 0.0) {
        pass = false;
        witness = {{"size", s}, {"value", v}};
      }
    }
    out.push_back(check(id, pass, part2 ? "g > 0 on [0, S]" : "g >= 0 on [0, S]", witness));

    bool lipschitz = true;
    for (int i = 0; i < kSamples; ++i) {
      if (!std::isfinite(spec.growth.rate.derivative(interior_sample(0.0, S, i)))) lipschitz = false;
    }
    out.push_back(check(part2 ? "H5.growth_c1" : "H3.growth_lipschitz", lipschitz, "g' bounded on interior samples"));

    double total = std::numeric_limits<double>::quiet_NaN();
    try {
      total = spec.growth.reciprocal_integral(0.0, S);
    } catch (const Error&) {
    }
    if (std::isfinite(total)) {
      out.push_back(check(part2 ? "H5.finite_growth_time" : "H3.finite_growth_time", true,
                          "G(S) = integral of 1/g over [0, S] is finite", total));
    } else if (spec.growth.growth_time_cap) {
      out.push_back({part2 ? "H5.finite_growth_time" : "H3.finite_growth_time", "reported",
                     "G(S) is infinite; capped at growth_time_cap", *spec.growth.growth_time_cap});
    } else {
      out.push_back(check(part2 ? "H5.finite_growth_time" : "H3.finite_growth_time", false,
                          "G(S) is infinite and no growth_time_cap is set"));
    }
  }

  // fertility
  {
    const auto& k = spec.fertility;
    const double a_hat = k.min_fertile_age;
    const bool probabilistic = k.kind == KernelKind::Probabilistic;
    const std::string pos_id = part2 ? "H6.nonnegative" : "H4.nonnegative";
    const std::string zero_id = part2 ? "H7.vanishes_below_a_hat" : "H5.vanishes_below_a_hat";
    constexpr int n = 33;
    nlohmann::json neg = nullptr;
    nlohmann::json nonzero = nullptr;
    for (int ia = 0; ia < n; ++ia) {
      const double a = interior_sample(0.0, A, ia, n);
      for (int ip = 0; ip < n; ++ip) {
        const double ps = interior_sample(0.0, S, ip, n);
        for (int in = 0; in < (probabilistic ? n : 1); ++in) {
          const double ns = interior_sample(0.0, S, in, n);
          const double v = probabilistic ? k.probabilistic(a, ps, ns) : k.local(a, ps);
          require_finite(v, "fertility", a);
          if (v < 0.0 && neg.is_null()) neg = {{"a", a}, {"s", ps}, {"value", v}};
          // the raw age rate: the solvers zero it below a_hat regardless
          if (a < a_hat && k.age(a) != 0.0 && nonzero.is_null()) nonzero = {{"a", a}, {"value", k.age(a)}};
        }
      }
    }
    out.push_back(check(pos_id, neg.is_null(), "beta >= 0 on sampled box", neg));
    out.push_back(check(zero_id, nonzero.is_null() && a_hat >= 0.0 && a_hat < A,
                        "beta = 0 for a < a_hat, a_hat in [0, A)", nonzero.is_null() ? nlohmann::json(a_hat) : nonzero));
    const double jump = std::abs(k.age(a_hat));
    const double scale = std::max(1.0, std::abs(k.age(0.5 * (a_hat + A))));
    bool continuous = jump <= 1e-12 * scale || a_hat == 0.0;
    for (const auto* f : {&k.age, &k.parent_size, &k.newborn_size}) {
      if (std::holds_alternative<RateFunction::PiecewiseConstant>(f->repr())) continuous = false;
    }
    out.push_back(check(part2 ? "H6.continuous" : "H4.continuous", continuous,
                        "beta continuous, including at a = a_hat", jump));
  }

  // diffusion
  const auto& d = spec.diffusion;
  if (d.kind == DiffusionKind::NondegenerateNeumann) {
    double c_min = std::numeric_limits<double>::infinity();
    double at = 0.0;
    for (int i = 0; i <= kSamples; ++i) {
      const double x = d.length * static_cast<double>(i) / kSamples;
      const double v = d.conductivity(x);
      require_finite(v, "conductivity", x);
      if (v < c_min) {
        c_min = v;
        at = x;
      }
    }
    out.push_back(check("ellipticity", c_min > 0.0, "conductivity bounded below by C > 0",
                        {{"C", c_min}, {"x", at}}));
    out.push_back(check("domain.length", d.length > 0.0, "spatial length > 0", d.length));
  } else {
    const double k0 = d.k(0.0), k1 = d.k(1.0);
    const bool left = k0 == 0.0, right = k1 == 0.0;
    out.push_back(check("A2.endpoint_degeneracy", left || right, "k vanishes at x = 0 and/or x = 1",
                        {{"k0", k0}, {"k1", k1}}));
    nlohmann::json bad = nullptr;
    nlohmann::json ineq = nullptr;
    for (int i = 0; i < kSamples; ++i) {
      const double x = interior_sample(0.0, 1.0, i);
      const double kx = d.k(x), dk = d.k.derivative(x);
      require_finite(kx, "k", x);
      require_finite(d.b(x), "b", x);
      if (kx <= 0.0 && bad.is_null()) bad = {{"x", x}, {"k", kx}};
      const double tol = 1e-12 * std::max(1.0, std::abs(kx));
      if (left && x * dk > d.m1 * kx + tol && ineq.is_null()) ineq = {{"x", x}, {"which", "x k' <= M1 k"}};
      if (right && (x - 1.0) * dk > d.m2 * kx + tol && ineq.is_null()) {
        ineq = {{"x", x}, {"which", "(x-1) k' <= M2 k"}};
      }
    }
    out.push_back(check("A2.interior_positive", bad.is_null(), "k > 0 on (0, 1)", bad));
    out.push_back(check("A2.exponents", d.m1 > 0.0 && d.m1 < 2.0 && d.m2 > 0.0 && d.m2 < 2.0, "M1, M2 in (0, 2)",
                        {{"M1", d.m1}, {"M2", d.m2}}));
    out.push_back(check("A2.degeneracy_inequalities", ineq.is_null(), "growth of k near degenerate endpoints", ineq));
    double b_over_k = 0.0;
    bool integrable = true;
    try {
      std::vector<double> breaks = d.b.breakpoints();
      b_over_k = integrate([&](double x) { return std::abs(d.b(x) / d.k(x)); }, 0.0, 1.0, breaks, 1e-10);
    } catch (const Error&) {
      integrable = false;
    }
    out.push_back(check("A2.b_over_k_integrable", integrable && std::isfinite(b_over_k),
                        "b / k in L^1(0, 1)", b_over_k));
    if (spec.fertility.kind == KernelKind::Probabilistic) {
      out.push_back(check("kernel.variant", false, "the degenerate model uses a local birth kernel"));
    }
  }

  // control region
  const auto& c = spec.control;
  out.push_back(check("control.age_window", 0.0 <= c.a_lo && c.a_lo < c.a_hi && c.a_hi <= A, "0 <= a1 < a2 <= A",
                      {c.a_lo, c.a_hi}));
  out.push_back(check("control.size_window", 0.0 <= c.s_lo && c.s_lo < c.s_hi && c.s_hi <= S, "0 <= s1 < s2 <= S",
                      {c.s_lo, c.s_hi}));
  out.push_back(check("control.omega_inside", 0.0 < c.x_lo && c.x_lo < c.x_hi && c.x_hi < d.length,
                      "omega strictly inside the spatial domain", {c.x_lo, c.x_hi}));

  // theorem hypotheses and non-extinction, reported only
  report.hypotheses = {false, false, false};
  try {
    const auto tt = transit_times(spec);
    const double a1 = c.a_lo, a2 = c.a_hi, a_hat = spec.fertility.min_fertile_age;
    report.hypotheses = {a1 < a_hat, tt.s2_star < std::min(a2 - a1, a_hat - a1), tt.s1_star < std::min(a2, a_hat)};
    const double g_total = growth_time_direct(spec.growth, S);
    report.non_extinction = g_total > a_hat;
    out.push_back({"non_extinction", "reported", "G(S) > a_hat", {{"G(S)", g_total}, {"a_hat", a_hat}}});
  } catch (const Error& e) {
    out.push_back({"non_extinction", "reported", std::string("not computable: ") + e.what(), nullptr});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Derived quantities

TransitTimes transit_times(const ModelSpec& spec) {
  const auto& g = spec.growth;
  const double S = g.max_size;
  TransitTimes t;
  t.s1_star = growth_time_direct(g, spec.control.s_lo);
  if (spec.control.s_hi >= S) {
    t.s2_star = 0.0;
  } else {
    const double tail = g.reciprocal_integral(spec.control.s_hi, S);
    if (std::isfinite(tail) && !g.growth_time_cap) {
      t.s2_star = tail;
    } else {
      t.s2_star = growth_time_direct(g, S) - growth_time_direct(g, spec.control.s_hi);
    }
  }
  t.t0 = std::max(t.s1_star, t.s2_star);
  t.t1 = std::max(spec.control.a_lo + t.s2_star, t.s1_star);
  return t;
}

CriticalSizes critical_sizes(const ModelSpec& spec) {
  const auto& g = spec.growth;
  const double a1 = spec.control.a_lo;
  CriticalSizes out;
  auto solve = [&](double s_edge) -> std::optional<double> {
    const double target = growth_time_direct(g, s_edge) - a1;
    if (target <= 0.0) return std::nullopt;
    if (a1 == 0.0) return s_edge;
    return invert_growth_direct(g, target, s_edge);
  };
  out.alpha = solve(spec.control.s_hi);
  out.beta = solve(spec.control.s_lo);
  return out;
}

double minimal_time(const ModelSpec& spec, KernelKind kind) {
  const auto tt = transit_times(spec);
  const double base = spec.max_age() - spec.control.a_hi;
  if (kind == KernelKind::Probabilistic) return base + tt.t1 + tt.t0;
  return base + spec.control.a_lo + tt.s1_star + tt.s2_star;
}

}  // namespace popctrl
