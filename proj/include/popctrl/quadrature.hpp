#pragma once

#include <functional>
#include <span>

namespace popctrl {

// Adaptive Gauss-Kronrod quadrature of f over [lo, hi], split at the given
// breakpoints. Throws Error{QuadratureFailure} when the error estimate stays
// above tol * max(1, |result|).
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 std::span<const double> breakpoints = {}, double tol = 1e-13);

}  // namespace popctrl
