#pragma once

// Tensor grid on [0, L] x [0, A] x [0, S], density fields on it, the weighted
// inner product and the (a, s) interpolation used by the semi-Lagrangian step.
//
// Storage: a field is an n_x by (n_a * n_s) column-major matrix; column
// j * n_s + k holds the x-profile at age node j, size node k.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "popctrl/model.hpp"

namespace popctrl {

enum class WeightKind { Uniform, InverseSigma };

struct GridConfig {
  int n_x = 33;
  int n_a = 33;
  int n_s = 33;
  double dt = 0.0;  // 0 selects dt = da
  double T = 1.0;

  nlohmann::json to_json() const;
  static GridConfig from_json(const nlohmann::json& j);
};

class Grid {
 public:
  // Uniform nodes including both endpoints in every direction. The weight is
  // InverseSigma for the degenerate model and Uniform otherwise.
  Grid(const ModelSpec& spec, const GridConfig& config);

  int n_x() const { return n_x_; }
  int n_a() const { return n_a_; }
  int n_s() const { return n_s_; }
  int n_as() const { return n_a_ * n_s_; }
  double length() const { return length_; }
  double max_age() const { return max_age_; }
  double max_size() const { return max_size_; }
  double dx() const { return dx_; }
  double da() const { return da_; }
  double ds() const { return ds_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  // Horizon actually simulated: steps() * dt().
  double T() const { return steps_ * dt_; }
  double requested_T() const { return config_.T; }
  WeightKind weight_kind() const { return weight_kind_; }

  double x(int i) const { return dx_ * i; }
  double a(int j) const { return da_ * j; }
  double s(int k) const { return ds_ * k; }
  int index(int j, int k) const { return j * n_s_ + k; }

  // Quadrature weights. x: trapezoid (Uniform) or h / sigma(x_i) at interior
  // nodes and 0 on the Dirichlet boundary (InverseSigma). a and s: cell rule
  // with weight d at every node except the last, whose weight is 0.
  const Eigen::VectorXd& wx() const { return wx_; }
  const Eigen::VectorXd& wa() const { return wa_; }
  const Eigen::VectorXd& ws() const { return ws_; }
  // wa(j) * ws(k) laid out by column index
  const Eigen::VectorXd& was() const { return was_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }

  const GridConfig& config() const { return config_; }
  bool same_geometry(const Grid& other) const;
  std::size_t unknowns() const { return static_cast<std::size_t>(n_x_) * n_as(); }

 private:
  GridConfig config_;
  int n_x_, n_a_, n_s_;
  double length_, max_age_, max_size_;
  double dx_, da_, ds_, dt_;
  int steps_;
  WeightKind weight_kind_;
  Eigen::VectorXd wx_, wa_, ws_, was_, sigma_;
};

using GridPtr = std::shared_ptr<const Grid>;

struct StateField {
  GridPtr grid;
  Eigen::MatrixXd values;
  double time = 0.0;

  StateField() = default;
  explicit StateField(GridPtr g, double t = 0.0);
  StateField(GridPtr g, Eigen::MatrixXd v, double t = 0.0);

  double& operator()(int i, int j, int k) { return values(i, grid->index(j, k)); }
  double operator()(int i, int j, int k) const { return values(i, grid->index(j, k)); }
  bool finite() const { return values.allFinite(); }
};

double inner_product(const StateField& f, const StateField& h);
double norm(const StateField& f);
// Weighted inner product of raw matrices on a grid.
double weighted_dot(const Grid& grid, const Eigen::MatrixXd& f, const Eigen::MatrixXd& h);

// Bilinear interpolation in (a, s) at x node i. Zero for a < 0, a > A,
// s < 0 and s > S.
double interpolate(const StateField& f, int x_index, double a, double s);

// Node indicator of the control box (closed, nodes within 1e-12 of an edge count as inside).
struct ControlMask {
  Eigen::VectorXd x;   // n_x
  Eigen::VectorXd as;  // n_a * n_s
  std::size_t count() const;
};
ControlMask control_mask(const Grid& grid, const ControlRegion& region);
StateField restrict_to_control(const StateField& f, const ControlRegion& region);
void apply_mask(const ControlMask& m, Eigen::MatrixXd& values);

enum class FieldShape { Signed, Positive };

// Smooth random Fourier field times cos(pi a / 2A) cos(pi s / 2S); on the
// degenerate grid also times sin(pi x) so the Dirichlet rows vanish.
StateField random_smooth_field(GridPtr grid, std::uint64_t seed, FieldShape shape = FieldShape::Signed);

// Field snapshots: CSV with header x,a,s,value, or binary: three little-endian
// uint64 dims (n_x, n_a, n_s) followed by float64 values in (x, a, s) row-major order.
void write_field_csv(const StateField& f, const std::string& path);
void write_field_binary(const StateField& f, const std::string& path);
// Reads either layout; CSV is recognized by the .csv extension.
Eigen::MatrixXd read_field(const Grid& grid, const std::string& path);

}  // namespace popctrl
