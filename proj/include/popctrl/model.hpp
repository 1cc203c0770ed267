#pragma once

// Problem description for the age-size-space structured population model
// and the scalar quantities derived from it (transit times, critical sizes,
// minimal control times).

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "popctrl/functions.hpp"

namespace popctrl {

struct GrowthModel {
  RateFunction rate = RateFunction::constant(1.0);
  double max_size = 1.0;
  // Horizon used in place of G(S) when g(S) = 0 makes the growth time to S
  // infinite. Sizes whose growth time exceeds it never reach S.
  std::optional<double> growth_time_cap;

  double operator()(double s) const { return rate(s); }
  // Integral of 1/g over [lo, hi]; +inf when it diverges.
  double reciprocal_integral(double lo, double hi) const;
  // Closed-form inverse of s -> reciprocal_integral(0, s), when one exists.
  std::optional<double> closed_form_inverse(double tau) const;
};

struct MortalityModel {
  RateFunction age_rate;   // mu_1(a)
  RateFunction size_rate;  // mu_2(s)
  double max_age = 1.0;
  double integrable_cutoff = 0.95;
  // Filled from the growth model; the size tail is truncated at cutoff * S.
  double max_size = 1.0;

  // Truncated rates actually used by the solvers. A rate is truncated (held
  // at its value at cutoff * end) only when its integral to the end diverges.
  double mu1(double a) const;
  double mu2(double s) const;
  double integral_mu1(double lo, double hi) const;
  double integral_mu2(double lo, double hi) const;
  bool age_tail_truncated() const;
  bool size_tail_truncated() const;
  double age_cut() const { return integrable_cutoff * max_age; }
  double size_cut() const { return integrable_cutoff * max_size; }
};

enum class KernelKind { Probabilistic, Local, LocalAgeSize };

// Birth kernels are stored in separable form:
//   Probabilistic: beta(a, parent_s, newborn_s) = age(a) parent_size(parent_s) newborn_size(newborn_s)
//   Local:         beta(a) = age(a)
//   LocalAgeSize:  beta(a, s) = age(a) parent_size(s)
// and are forced to zero below the minimal fertility age.
struct FertilityKernel {
  KernelKind kind = KernelKind::Probabilistic;
  double min_fertile_age = 0.0;
  RateFunction age;
  RateFunction parent_size = RateFunction::constant(1.0);
  RateFunction newborn_size = RateFunction::constant(1.0);

  double age_factor(double a) const { return a < min_fertile_age ? 0.0 : age(a); }
  double probabilistic(double a, double parent_s, double newborn_s) const {
    return age_factor(a) * parent_size(parent_s) * newborn_size(newborn_s);
  }
  double local(double a, double s) const {
    return kind == KernelKind::LocalAgeSize ? age_factor(a) * parent_size(s) : age_factor(a);
  }
};

enum class DiffusionKind { NondegenerateNeumann, DegenerateDirichlet };

struct DiffusionSpec {
  DiffusionKind kind = DiffusionKind::NondegenerateNeumann;
  double length = 1.0;  // spatial domain [0, length]; 1 for the degenerate model
  RateFunction conductivity = RateFunction::constant(1.0);
  // degenerate operator k u_xx + b u_x
  RateFunction k;
  RateFunction b;
  double m1 = 1.0;
  double m2 = 1.0;

  // gamma(x) = exp(int_{3/4}^x b/k); sigma = k / gamma. The operator
  // k u_xx + b u_x equals sigma (gamma u_x)_x and is symmetric in L^2_{1/sigma}.
  double gamma(double x) const;
  double sigma(double x) const { return k(x) / gamma(x); }
};

struct ControlRegion {
  double x_lo = 0.0, x_hi = 1.0;
  double a_lo = 0.0, a_hi = 1.0;
  double s_lo = 0.0, s_hi = 1.0;

  bool operator==(const ControlRegion&) const = default;
};

struct ModelSpec {
  GrowthModel growth;
  MortalityModel mortality;
  FertilityKernel fertility;
  DiffusionSpec diffusion;
  ControlRegion control;

  double max_age() const { return mortality.max_age; }
  double max_size() const { return growth.max_size; }
  bool degenerate() const { return diffusion.kind == DiffusionKind::DegenerateDirichlet; }

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

struct TransitTimes {
  double s1_star = 0.0;  // growth time 0 -> s1
  double s2_star = 0.0;  // growth time s2 -> S
  double t0 = 0.0;       // max{S1*, S2*}
  double t1 = 0.0;       // max{a1 + S2*, S1*}
};

struct CriticalSizes {
  std::optional<double> alpha;  // G(s2) - G(alpha) = a1
  std::optional<double> beta;   // G(s1) - G(beta) = a1
};

struct ValidationCheck {
  std::string id;
  std::string status;  // "pass", "fail", "truncated: satisfied", "truncated: not satisfied", "reported"
  std::string detail;
  nlohmann::json witness;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  // Theorem hypotheses, reported but never enforced:
  // a1 < a_hat, S2* < min{a2 - a1, a_hat - a1}, S1* < min{a2, a_hat}
  std::vector<bool> hypotheses;
  bool non_extinction = false;  // G(S) > a_hat

  // True when no structural check failed.
  bool ok() const;
  const ValidationCheck* find(const std::string& id) const;
  nlohmann::json to_json() const;
};

ValidationReport validate(const ModelSpec& spec);

TransitTimes transit_times(const ModelSpec& spec);
CriticalSizes critical_sizes(const ModelSpec& spec);
double minimal_time(const ModelSpec& spec, KernelKind kind);
inline double minimal_time(const ModelSpec& spec) { return minimal_time(spec, spec.fertility.kind); }

// Growth time G(s) computed directly from the growth model, honoring the cap.
double growth_time_direct(const GrowthModel& growth, double s);
// Monotone inversion of growth_time_direct on [0, s_hi].
double invert_growth_direct(const GrowthModel& growth, double tau, double s_hi);

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

}  // namespace popctrl
