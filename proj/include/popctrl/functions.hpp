#pragma once

// One-dimensional coefficient functions (growth, mortality, fertility factors,
// diffusion coefficients). Every function is either a closed-form token or a
// sampled table interpolated by a monotone cubic (Fritsch-Carlson), and can
// be integrated exactly over any interval.

#include <limits>
#include <variant>
#include <vector>

#include "json.hpp"

namespace popctrl {

class RateFunction {
 public:
  struct Constant {
    double value = 0.0;
  };
  // coeffs[i] multiplies x^i
  struct Polynomial {
    std::vector<double> coeffs;
  };
  // c * x^p on x >= 0
  struct Power {
    double c = 1.0;
    double p = 1.0;
  };
  // values[i] on [breaks[i-1], breaks[i]), values.size() == breaks.size() + 1
  struct PiecewiseConstant {
    std::vector<double> breaks;
    std::vector<double> values;
  };
  // c / (end - x), non-integrable at x = end
  struct Tail {
    double c = 1.0;
    double end = 1.0;
  };
  // amplitude * sin^2(pi (x - lo) / (hi - lo)) on [lo, hi], zero elsewhere
  struct Bump {
    double amplitude = 1.0;
    double lo = 0.0;
    double hi = 1.0;
  };
  struct Table {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> slope;
  };

  using Repr = std::variant<Constant, Polynomial, Power, PiecewiseConstant, Tail, Bump, Table>;

  RateFunction() : repr_(Constant{0.0}) {}
  explicit RateFunction(Repr repr);

  static RateFunction constant(double value) { return RateFunction(Constant{value}); }
  static RateFunction polynomial(std::vector<double> coeffs);
  static RateFunction affine(double c0, double c1) { return polynomial({c0, c1}); }
  static RateFunction power(double c, double p) { return RateFunction(Power{c, p}); }
  static RateFunction piecewise_constant(std::vector<double> breaks, std::vector<double> values);
  static RateFunction tail(double c, double end) { return RateFunction(Tail{c, end}); }
  static RateFunction bump(double amplitude, double lo, double hi);
  // Samples must have strictly increasing abscissae; at least two points.
  static RateFunction table(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  // Exact integral over [lo, hi] (lo <= hi). Returns +inf when the interval
  // reaches the pole of a Tail.
  double integral(double lo, double hi) const;

  // Points where the function or its derivative is discontinuous; quadrature
  // of expressions involving this function should split there.
  std::vector<double> breakpoints() const;

  // factor * f, in the same representation
  RateFunction scaled(double factor) const;

  bool is_constant() const { return std::holds_alternative<Constant>(repr_); }
  bool is_table() const { return std::holds_alternative<Table>(repr_); }
  bool is_tail() const { return std::holds_alternative<Tail>(repr_); }
  const Repr& repr() const { return repr_; }

  // Sampled values of a table function (empty for closed forms).
  const std::vector<double>& table_x() const;
  const std::vector<double>& table_y() const;

  nlohmann::json to_json() const;
  static RateFunction from_json(const nlohmann::json& j);

 private:
  Repr repr_;
};

}  // namespace popctrl
