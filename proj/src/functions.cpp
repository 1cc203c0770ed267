#include "popctrl/functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "popctrl/error.hpp"

namespace popctrl {
namespace {

using std::numbers::pi;

// Fritsch-Carlson monotone slopes.
std::vector<double> monotone_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);

  std::vector<double> m(n);
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    m[i] = (delta[i - 1] * delta[i] <= 0.0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      m[i] = 0.0;
      m[i + 1] = 0.0;
      continue;
    }
    const double alpha = m[i] / delta[i];
    const double beta = m[i + 1] / delta[i];
    const double r = alpha * alpha + beta * beta;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m[i] = tau * alpha * delta[i];
      m[i + 1] = tau * beta * delta[i];
    }
  }
  return m;
}

std::size_t table_interval(const RateFunction::Table& t, double x) {
  auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
  std::size_t i = static_cast<std::size_t>(std::distance(t.x.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, t.x.size() - 2);
}

double hermite_value(const RateFunction::Table& t, std::size_t i, double x) {
  const double h = t.x[i + 1] - t.x[i];
  const double u = (x - t.x[i]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  const double h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u);
  const double h11 = u * u * (u - 1);
  return h00 * t.y[i] + h10 * h * t.slope[i] + h01 * t.y[i + 1] + h11 * h * t.slope[i + 1];
}

double hermite_derivative(const RateFunction::Table& t, std::size_t i, double x) {
  const double h = t.x[i + 1] - t.x[i];
  const double u = (x - t.x[i]) / h;
  const double d00 = 6 * u * u - 6 * u;
  const double d10 = 3 * u * u - 4 * u + 1;
  const double d01 = -6 * u * u + 6 * u;
  const double d11 = 3 * u * u - 2 * u;
  return (d00 * t.y[i] + d01 * t.y[i + 1]) / h + d10 * t.slope[i] + d11 * t.slope[i + 1];
}

double table_value(const RateFunction::Table& t, double x) {
  if (x <= t.x.front()) return t.y.front();
  if (x >= t.x.back()) return t.y.back();
  return hermite_value(t, table_interval(t, x), x);
}

// Simpson is exact for the cubic pieces.
double table_integral(const RateFunction::Table& t, double lo, double hi) {
  double total = 0.0;
  if (lo < t.x.front()) {
    const double end = std::min(hi, t.x.front());
    total += t.y.front() * (end - lo);
    lo = end;
  }
  if (hi > t.x.back()) {
    const double start = std::max(lo, t.x.back());
    total += t.y.back() * (hi - start);
    hi = start;
  }
  if (hi <= lo) return total;
  std::size_t i = table_interval(t, lo);
  double a = lo;
  while (a < hi) {
    const double b = std::min(hi, t.x[i + 1]);
    if (b > a) {
      const double mid = 0.5 * (a + b);
      total += (b - a) / 6.0 *
               (hermite_value(t, i, a) + 4.0 * hermite_value(t, i, mid) + hermite_value(t, i, b));
    }
    a = b;
    if (i + 2 >= t.x.size()) break;
    ++i;
  }
  return total;
}

double bump_primitive(const RateFunction::Bump& b, double x) {
  const double w = b.hi - b.lo;
  const double u = std::clamp((x - b.lo) / w, 0.0, 1.0);
  return b.amplitude * w * (0.5 * u - std::sin(2.0 * pi * u) / (4.0 * pi));
}

std::vector<double> json_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorKind::InvalidConfig, std::string("function token needs array '") + key + "'");
  }
  return j.at(key).get<std::vector<double>>();
}

}  // namespace

RateFunction::RateFunction(Repr repr) : repr_(std::move(repr)) {}

RateFunction RateFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) coeffs.push_back(0.0);
  return RateFunction(Polynomial{std::move(coeffs)});
}

RateFunction RateFunction::piecewise_constant(std::vector<double> breaks, std::vector<double> values) {
  if (values.size() != breaks.size() + 1) {
    throw Error(ErrorKind::InvalidConfig, "piecewise_constant needs one more value than breaks");
  }
  if (!std::is_sorted(breaks.begin(), breaks.end())) {
    throw Error(ErrorKind::InvalidConfig, "piecewise_constant breaks must be sorted");
  }
  return RateFunction(PiecewiseConstant{std::move(breaks), std::move(values)});
}

RateFunction RateFunction::bump(double amplitude, double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorKind::InvalidConfig, "bump needs lo < hi");
  return RateFunction(Bump{amplitude, lo, hi});
}

RateFunction RateFunction::table(std::vector<double> x, std::vector<double> y) {
  if (x.size() < 2 || x.size() != y.size()) {
    throw Error(ErrorKind::InvalidConfig, "table needs at least two (x, y) samples of equal length");
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (!(x[i + 1] > x[i])) {
      throw Error(ErrorKind::InvalidConfig, "table abscissae must be strictly increasing");
    }
  }
  auto slope = monotone_slopes(x, y);
  return RateFunction(Table{std::move(x), std::move(y), std::move(slope)});
}

double RateFunction::operator()(double x) const {
  struct Visitor {
    double x;
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Polynomial& p) const {
      double acc = 0.0;
      for (auto it = p.coeffs.rbegin(); it != p.coeffs.rend(); ++it) acc = acc * x + *it;
      return acc;
    }
    double operator()(const Power& p) const { return p.c * std::pow(std::max(x, 0.0), p.p); }
    double operator()(const PiecewiseConstant& pc) const {
      auto it = std::upper_bound(pc.breaks.begin(), pc.breaks.end(), x);
      return pc.values[static_cast<std::size_t>(std::distance(pc.breaks.begin(), it))];
    }
    double operator()(const Tail& t) const {
      if (x >= t.end) return std::numeric_limits<double>::infinity();
      return t.c / (t.end - x);
    }
    double operator()(const Bump& b) const {
      if (x <= b.lo || x >= b.hi) return 0.0;
      const double s = std::sin(pi * (x - b.lo) / (b.hi - b.lo));
      return b.amplitude * s * s;
    }
    double operator()(const Table& t) const { return table_value(t, x); }
  };
  return std::visit(Visitor{x}, repr_);
}

double RateFunction::derivative(double x) const {
  struct Visitor {
    double x;
    double operator()(const Constant&) const { return 0.0; }
    double operator()(const Polynomial& p) const {
      double acc = 0.0;
      for (std::size_t i = p.coeffs.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * p.coeffs[i];
      return acc;
    }
    double operator()(const Power& p) const {
      if (p.p == 0.0) return 0.0;
      return p.c * p.p * std::pow(std::max(x, 0.0), p.p - 1.0);
    }
    double operator()(const PiecewiseConstant&) const { return 0.0; }
    double operator()(const Tail& t) const {
      if (x >= t.end) return std::numeric_limits<double>::infinity();
      return t.c / ((t.end - x) * (t.end - x));
    }
    double operator()(const Bump& b) const {
      if (x <= b.lo || x >= b.hi) return 0.0;
      const double w = b.hi - b.lo;
      return b.amplitude * pi / w * std::sin(2.0 * pi * (x - b.lo) / w);
    }
    double operator()(const Table& t) const {
      if (x < t.x.front() || x > t.x.back()) return 0.0;
      return hermite_derivative(t, table_interval(t, x), x);
    }
  };
  return std::visit(Visitor{x}, repr_);
}

double RateFunction::integral(double lo, double hi) const {
  if (hi < lo) return -integral(hi, lo);
  if (hi == lo) return 0.0;
  struct Visitor {
    double lo, hi;
    double operator()(const Constant& c) const { return c.value * (hi - lo); }
    double operator()(const Polynomial& p) const {
      double acc_hi = 0.0, acc_lo = 0.0;
      for (std::size_t i = p.coeffs.size(); i-- > 0;) {
        const double k = p.coeffs[i] / static_cast<double>(i + 1);
        acc_hi = acc_hi * hi + k;
        acc_lo = acc_lo * lo + k;
      }
      return acc_hi * hi - acc_lo * lo;
    }
    double operator()(const Power& p) const {
      const double a = std::max(lo, 0.0), b = std::max(hi, 0.0);
      if (p.p <= -1.0) return std::numeric_limits<double>::infinity();
      return p.c * (std::pow(b, p.p + 1.0) - std::pow(a, p.p + 1.0)) / (p.p + 1.0);
    }
    double operator()(const PiecewiseConstant& pc) const {
      double total = 0.0;
      double a = lo;
      std::size_t i = static_cast<std::size_t>(
          std::distance(pc.breaks.begin(), std::upper_bound(pc.breaks.begin(), pc.breaks.end(), lo)));
      while (a < hi) {
        const double b = (i < pc.breaks.size()) ? std::min(hi, pc.breaks[i]) : hi;
        total += pc.values[i] * (b - a);
        a = b;
        ++i;
      }
      return total;
    }
    double operator()(const Tail& t) const {
      if (hi >= t.end) return std::numeric_limits<double>::infinity();
      return t.c * std::log((t.end - lo) / (t.end - hi));
    }
    double operator()(const Bump& b) const { return bump_primitive(b, hi) - bump_primitive(b, lo); }
    double operator()(const Table& t) const { return table_integral(t, lo, hi); }
  };
  return std::visit(Visitor{lo, hi}, repr_);
}

std::vector<double> RateFunction::breakpoints() const {
  if (const auto* pc = std::get_if<PiecewiseConstant>(&repr_)) return pc->breaks;
  if (const auto* b = std::get_if<Bump>(&repr_)) return {b->lo, b->hi};
  if (const auto* t = std::get_if<Table>(&repr_)) return t->x;
  return {};
}

RateFunction RateFunction::scaled(double factor) const {
  struct Visitor {
    double f;
    RateFunction operator()(Constant c) const { return constant(f * c.value); }
    RateFunction operator()(Polynomial p) const {
      for (double& c : p.coeffs) c *= f;
      return RateFunction(std::move(p));
    }
    RateFunction operator()(Power p) const { return power(f * p.c, p.p); }
    RateFunction operator()(PiecewiseConstant pc) const {
      for (double& v : pc.values) v *= f;
      return RateFunction(std::move(pc));
    }
    RateFunction operator()(Tail t) const { return tail(f * t.c, t.end); }
    RateFunction operator()(Bump b) const { return bump(f * b.amplitude, b.lo, b.hi); }
    RateFunction operator()(Table t) const {
      for (double& v : t.y) v *= f;
      return table(std::move(t.x), std::move(t.y));
    }
  };
  return std::visit(Visitor{factor}, repr_);
}

const std::vector<double>& RateFunction::table_x() const {
  static const std::vector<double> empty;
  if (const auto* t = std::get_if<Table>(&repr_)) return t->x;
  return empty;
}

const std::vector<double>& RateFunction::table_y() const {
  static const std::vector<double> empty;
  if (const auto* t = std::get_if<Table>(&repr_)) return t->y;
  return empty;
}

nlohmann::json RateFunction::to_json() const {
  struct Visitor {
    nlohmann::json operator()(const Constant& c) const { return {{"kind", "constant"}, {"value", c.value}}; }
    nlohmann::json operator()(const Polynomial& p) const {
      return {{"kind", "polynomial"}, {"coeffs", p.coeffs}};
    }
    nlohmann::json operator()(const Power& p) const { return {{"kind", "power"}, {"c", p.c}, {"p", p.p}}; }
    nlohmann::json operator()(const PiecewiseConstant& pc) const {
      return {{"kind", "piecewise_constant"}, {"breaks", pc.breaks}, {"values", pc.values}};
    }
    nlohmann::json operator()(const Tail& t) const { return {{"kind", "tail"}, {"c", t.c}, {"end", t.end}}; }
    nlohmann::json operator()(const Bump& b) const {
      return {{"kind", "bump"}, {"amplitude", b.amplitude}, {"lo", b.lo}, {"hi", b.hi}};
    }
    nlohmann::json operator()(const Table& t) const { return {{"kind", "table"}, {"x", t.x}, {"y", t.y}}; }
  };
  return std::visit(Visitor{}, repr_);
}

RateFunction RateFunction::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (!j.is_object() || !j.contains("kind")) {
    throw Error(ErrorKind::InvalidConfig, "function token must be a number or an object with 'kind'");
  }
  const auto kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  if (kind == "constant") return constant(num("value", 0.0));
  if (kind == "affine") return affine(num("c0", 0.0), num("c1", 0.0));
  if (kind == "polynomial") return polynomial(json_vector(j, "coeffs"));
  if (kind == "power") return power(num("c", 1.0), num("p", 1.0));
  if (kind == "piecewise_constant") return piecewise_constant(json_vector(j, "breaks"), json_vector(j, "values"));
  if (kind == "tail") return tail(num("c", 1.0), num("end", 1.0));
  if (kind == "bump") return bump(num("amplitude", 1.0), num("lo", 0.0), num("hi", 1.0));
  if (kind == "table") return table(json_vector(j, "x"), json_vector(j, "y"));
  throw Error(ErrorKind::InvalidConfig, "unknown function kind '" + kind + "'");
}

}  // namespace popctrl
