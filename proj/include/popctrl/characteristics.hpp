#pragma once

// Growth-time bijection G(s) = int_0^s du/g(u), its inverse, survival
// log-integrals and the characteristic geometry (a + t - l, G^-1(G(s) + t - l), l).

#include <string>
#include <utility>
#include <vector>

#include "popctrl/model.hpp"

namespace popctrl {

enum class Region { A1, A1Prime, A2Prime };

struct Classification {
  Region region;
  bool tie = false;  // two of {0, t-A+a, t-G(S)+G(s)} equal within tolerance
};

std::string to_string(Region r);

class CharacteristicsTable {
 public:
  explicit CharacteristicsTable(const ModelSpec& spec, int n_nodes = 4096, double tolerance = 1e-12);

  double growth_time(double s) const;
  double inverse_growth(double tau) const;
  double total_growth_time() const { return g_values_.back(); }

  // log pi_1(a) = -int_0^a mu_1 and log pi_2(s) = -int_0^s mu_2(u)/g(u) du,
  // the size survival measured in time along the growth curve.
  double log_pi1(double a) const;
  double log_pi2(double s) const;

  // Survival factor over the last t units of time of the characteristic
  // ending at (a, s).
  double survival_ratio(double a, double s, double t) const;

  Classification classify(double a, double s, double t) const;
  double lower_limit(double a, double s, double t) const;
  std::pair<double, double> backward_foot(double a, double s, double t, double lambda) const;

  TransitTimes transit_times() const;
  CriticalSizes critical_sizes() const;

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& g_values() const { return g_values_; }
  const std::vector<double>& log_pi1_values() const { return log_pi1_; }
  const std::vector<double>& log_pi2_values() const { return log_pi2_; }
  const std::vector<double>& age_nodes() const { return age_nodes_; }
  double tolerance() const { return tol_; }
  double max_age() const { return spec_.max_age(); }
  double max_size() const { return spec_.max_size(); }
  const ModelSpec& spec() const { return spec_; }

  // Two CSV files: path + "_G.csv" with (s, G) and path + "_Ginv.csv" with (tau, s).
  void dump_csv(const std::string& path_prefix, int n_samples = 513) const;

 private:
  std::size_t size_interval(double s) const;
  double g_increment(double lo, double hi) const;
  double log_pi2_increment(double lo, double hi) const;

  ModelSpec spec_;
  double tol_;
  std::vector<double> nodes_;
  std::vector<double> g_values_;
  std::vector<double> log_pi2_;
  std::vector<double> age_nodes_;
  std::vector<double> log_pi1_;
};

}  // namespace popctrl
