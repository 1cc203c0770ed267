#include "popctrl/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "popctrl/error.hpp"
#include "popctrl/quadrature.hpp"

namespace popctrl {

std::string to_string(Region r) {
  switch (r) {
    case Region::A1: return "A1";
    case Region::A1Prime: return "A1'";
    case Region::A2Prime: return "A2'";
  }
  return "?";
}

CharacteristicsTable::CharacteristicsTable(const ModelSpec& spec, int n_nodes, double tolerance)
    : spec_(spec), tol_(tolerance) {
  if (n_nodes < 2) throw Error(ErrorKind::InvalidConfig, "characteristics table needs at least 2 nodes");
  const double S = spec_.max_size();
  const double A = spec_.max_age();
  const auto cap = spec_.growth.growth_time_cap;

  std::vector<double> coarse(n_nodes + 1);
  for (int i = 0; i <= n_nodes; ++i) coarse[i] = S * i / n_nodes;
  coarse.back() = S;

  // refine where the growth time per interval is large (small g)
  std::vector<double> inc(n_nodes);
  double finite_total = 0.0;
  int finite_count = 0;
  for (int i = 0; i < n_nodes; ++i) {
    inc[i] = spec_.growth.reciprocal_integral(coarse[i], coarse[i + 1]);
    if (std::isfinite(inc[i])) {
      finite_total += inc[i];
      ++finite_count;
    }
  }
  const double mean = finite_count > 0 ? finite_total / finite_count : 0.0;
  nodes_.reserve(coarse.size() * 2);
  for (int i = 0; i < n_nodes; ++i) {
    nodes_.push_back(coarse[i]);
    if (!std::isfinite(inc[i]) || inc[i] > 4.0 * mean) {
      for (int k = 1; k < 8; ++k) nodes_.push_back(coarse[i] + (coarse[i + 1] - coarse[i]) * k / 8.0);
    }
  }
  nodes_.push_back(S);

  g_values_.assign(nodes_.size(), 0.0);
  log_pi2_.assign(nodes_.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const double d = spec_.growth.reciprocal_integral(nodes_[i - 1], nodes_[i]);
    acc += d;
    if (!std::isfinite(acc) && !cap) {
      throw Error(ErrorKind::QuadratureFailure,
                  "growth time diverges near size " + std::to_string(nodes_[i]) + " and no growth_time_cap is set");
    }
    g_values_[i] = cap ? std::min(acc, *cap) : acc;
    log_pi2_[i] = log_pi2_[i - 1] + log_pi2_increment(nodes_[i - 1], nodes_[i]);
  }
  age_nodes_.resize(n_nodes + 1);
  log_pi1_.resize(n_nodes + 1);
  for (int i = 0; i <= n_nodes; ++i) {
    age_nodes_[i] = A * i / n_nodes;
    log_pi1_[i] = -spec_.mortality.integral_mu1(0.0, age_nodes_[i]);
  }
}

std::size_t CharacteristicsTable::size_interval(double s) const {
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
  const auto i = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
  return i == 0 ? 0 : std::min(i - 1, nodes_.size() - 2);
}

double CharacteristicsTable::g_increment(double lo, double hi) const {
  return spec_.growth.reciprocal_integral(lo, hi);
}

double CharacteristicsTable::log_pi2_increment(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  const auto& m = spec_.mortality;
  if (const auto* c = std::get_if<RateFunction::Constant>(&spec_.growth.rate.repr())) {
    return -m.integral_mu2(lo, hi) / c->value;
  }
  std::vector<double> breaks = m.size_rate.breakpoints();
  const auto gb = spec_.growth.rate.breakpoints();
  breaks.insert(breaks.end(), gb.begin(), gb.end());
  if (m.size_tail_truncated()) breaks.push_back(m.size_cut());
  auto f = [&](double u) {
    const double mu = m.mu2(u);
    return mu == 0.0 ? 0.0 : mu / spec_.growth(u);
  };
  try {
    return -integrate(f, lo, hi, breaks, 1e-13);
  } catch (const Error&) {
    if (spec_.growth(hi) <= 0.0) return -std::numeric_limits<double>::infinity();
    throw;
  }
}

double CharacteristicsTable::growth_time(double s) const {
  const double S = spec_.max_size();
  if (!(s >= -tol_ * S && s <= S * (1.0 + tol_))) {
    throw Error(ErrorKind::OutOfRange, "size " + std::to_string(s) + " outside [0, S]");
  }
  s = std::clamp(s, 0.0, S);
  if (s == S) return g_values_.back();
  if (const auto* c = std::get_if<RateFunction::Constant>(&spec_.growth.rate.repr())) {
    const double v = s / c->value;
    return spec_.growth.growth_time_cap ? std::min(v, *spec_.growth.growth_time_cap) : v;
  }
  const std::size_t i = size_interval(s);
  double v = g_values_[i] + g_increment(nodes_[i], s);
  if (spec_.growth.growth_time_cap) v = std::min(v, *spec_.growth.growth_time_cap);
  return v;
}

double CharacteristicsTable::inverse_growth(double tau) const {
  const double total = g_values_.back();
  if (!(tau >= -tol_ * std::max(1.0, total) && tau <= total + tol_ * std::max(1.0, total))) {
    throw Error(ErrorKind::OutOfRange, "growth time " + std::to_string(tau) + " outside [0, G(S)]");
  }
  const double S = spec_.max_size();
  if (tau <= 0.0) return 0.0;
  if (tau >= total) return S;
  if (auto closed = spec_.growth.closed_form_inverse(tau)) return std::clamp(*closed, 0.0, S);

  auto it = std::upper_bound(g_values_.begin(), g_values_.end(), tau);
  const auto i = static_cast<std::size_t>(std::distance(g_values_.begin(), it)) - 1;
  const double lo = nodes_[i], hi = nodes_[i + 1];
  const double base = g_values_[i];
  if (g_values_[i + 1] <= base) return lo;
  auto f = [&](double s) {
    const double v = base + g_increment(lo, s);
    return (std::isfinite(v) ? v : total) - tau;
  };
  std::uintmax_t iters = 100;
  try {
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, base - tau, g_values_[i + 1] - tau,
                                                    boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (a + b);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::InversionFailure, std::string("inverse growth failed: ") + e.what());
  }
}

double CharacteristicsTable::log_pi1(double a) const {
  return -spec_.mortality.integral_mu1(0.0, std::clamp(a, 0.0, spec_.max_age()));
}

double CharacteristicsTable::log_pi2(double s) const {
  const double S = spec_.max_size();
  if (s <= 0.0) return 0.0;
  s = std::min(s, S);
  const std::size_t i = size_interval(s);
  return log_pi2_[i] + log_pi2_increment(nodes_[i], s);
}

double CharacteristicsTable::survival_ratio(double a, double s, double t) const {
  const double A = spec_.max_age();
  const double S = spec_.max_size();
  const double ta = tol_ * std::max(1.0, A);
  if (t < 0.0 || a < -ta || a > A + ta || a - t < -ta || s < -tol_ * S || s > S * (1 + tol_)) {
    throw Error(ErrorKind::OutOfRange, "survival_ratio arguments outside the domain");
  }
  if (t == 0.0) return 1.0;
  const double gs = growth_time(s);
  if (gs - t < -tol_ * std::max(1.0, gs)) {
    throw Error(ErrorKind::OutOfRange, "characteristic through size " + std::to_string(s) +
                                           " does not extend back by " + std::to_string(t));
  }
  const double s_prev = inverse_growth(std::max(0.0, gs - t));
  const double l1 = -spec_.mortality.integral_mu1(std::max(0.0, a - t), std::min(a, A));
  const double l2 = log_pi2_increment(s_prev, s);
  return std::exp(l1 + l2);
}

Classification CharacteristicsTable::classify(double a, double s, double t) const {
  const double A = spec_.max_age();
  const double age_exit = t - (A - a);
  const double size_exit = t - (total_growth_time() - growth_time(s));
  const double tie_tol = tol_ * std::max({1.0, A, total_growth_time()});
  // candidates ordered by tie preference: size exit, age exit, interior
  const double vals[3] = {size_exit, age_exit, 0.0};
  const Region tags[3] = {Region::A2Prime, Region::A1Prime, Region::A1};
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (vals[k] > vals[best] + tie_tol) best = k;
  }
  Classification out{tags[best], false};
  for (int k = 0; k < 3; ++k) {
    if (k != best && std::abs(vals[k] - vals[best]) <= tie_tol) out.tie = true;
  }
  return out;
}

double CharacteristicsTable::lower_limit(double a, double s, double t) const {
  return std::max({0.0, t - spec_.max_age() + a, t - (total_growth_time() - growth_time(s))});
}

std::pair<double, double> CharacteristicsTable::backward_foot(double a, double s, double t, double lambda) const {
  const double A = spec_.max_age();
  const double age = a + t - lambda;
  const double tau = growth_time(s) + t - lambda;
  const double total = total_growth_time();
  if (age > A + tol_ * std::max(1.0, A) || tau > total + tol_ * std::max(1.0, total) || age < -tol_ || tau < -tol_) {
    throw Error(ErrorKind::OutOfRange, "characteristic point leaves the age-size box");
  }
  return {std::clamp(age, 0.0, A), inverse_growth(std::clamp(tau, 0.0, total))};
}

TransitTimes CharacteristicsTable::transit_times() const {
  TransitTimes t;
  const auto& c = spec_.control;
  t.s1_star = growth_time(c.s_lo);
  t.s2_star = total_growth_time() - growth_time(c.s_hi);
  t.t0 = std::max(t.s1_star, t.s2_star);
  t.t1 = std::max(c.a_lo + t.s2_star, t.s1_star);
  return t;
}

CriticalSizes CharacteristicsTable::critical_sizes() const {
  const auto& c = spec_.control;
  auto solve = [&](double edge) -> std::optional<double> {
    const double target = growth_time(edge) - c.a_lo;
    if (target <= 0.0) return std::nullopt;
    if (c.a_lo == 0.0) return edge;
    return inverse_growth(target);
  };
  return {solve(c.s_hi), solve(c.s_lo)};
}

void CharacteristicsTable::dump_csv(const std::string& path_prefix, int n_samples) const {
  std::ofstream g(path_prefix + "_G.csv");
  std::ofstream gi(path_prefix + "_Ginv.csv");
  if (!g || !gi) throw Error(ErrorKind::InvalidConfig, "cannot write characteristics CSV at " + path_prefix);
  g.precision(17);
  gi.precision(17);
  g << "s,G\n";
  gi << "tau,s\n";
  const double S = spec_.max_size();
  const double total = total_growth_time();
  for (int i = 0; i < n_samples; ++i) {
    const double s = S * i / (n_samples - 1);
    g << s << ',' << growth_time(s) << '\n';
    const double tau = total * i / (n_samples - 1);
    gi << tau << ',' << inverse_growth(tau) << '\n';
  }
}

}  // namespace popctrl
