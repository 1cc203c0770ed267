#include "popctrl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "popctrl/error.hpp"

namespace popctrl {

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 std::span<const double> breakpoints, double tol) {
  if (hi == lo) return 0.0;
  if (hi < lo) return -integrate(f, hi, lo, breakpoints, tol);

  std::vector<double> cuts{lo};
  for (double b : breakpoints) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());

  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    double err = 0.0;
    // the Kronrod-Gauss difference has a round-off floor near 1e-12 relative;
    // asking for less only drives the recursion to full depth
    const double piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, cuts[i], cuts[i + 1], 15, std::max(tol, 1e-11), &err);
    total += piece;
    total_err += err;
  }
  if (!std::isfinite(total) || total_err > 1e3 * tol * std::max(1.0, std::abs(total))) {
    throw Error(ErrorKind::QuadratureFailure,
                "integral over [" + std::to_string(lo) + ", " + std::to_string(hi) +
                    "] did not converge (error estimate " + std::to_string(total_err) + ")");
  }
  return total;
}

}  // namespace popctrl
