#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <limits>

namespace heatlens {

// Adaptive Gauss-Kronrod integral over [a, b]; infinite limits allowed.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-12) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, rel_tol, &err);
}

}  // namespace heatlens
