#pragma once

// Independent reference computations used as test oracles. None of these
// call into the library's numerical code.

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// Periodic trapezoid rule; spectrally accurate for smooth periodic integrands.
inline double periodic_trapezoid(const std::function<double(double)>& f, double a, double length, int points = 4096) {
    const double h = length / points;
    double s = 0.0;
    for (int i = 0; i < points; ++i) s += f(a + h * i);
    return s * h;
}

// Composite Simpson rule on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
    const double h = (b - a) / (2 * panels);
    double s = f(a) + f(b);
    for (int i = 1; i < 2 * panels; ++i) s += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// ∫_{x-r}^{x+r} exp(-a cos s) ds from exp(-a cos s) = I0(a) + 2 Σ (-1)^k I_k(a) cos(k s).
inline double weighted_arc(double a, double x, double r, int terms = 60) {
    double v = 2.0 * r * boost::math::cyl_bessel_i(0, a);
    for (int k = 1; k <= terms; ++k)
        v += 2.0 * ((k % 2) ? -1.0 : 1.0) * boost::math::cyl_bessel_i(k, a) * (2.0 / k) * std::sin(k * r) * std::cos(k * x);
    return v;
}

// Circle of length 2 pi: p(x, x, t) by Poisson summation, (4 pi t)^{-1/2} Σ_m exp(-(2 pi m)^2 / (4t)).
inline double circle_diag_heat(double t) {
    double s = 0.0;
    for (int m = -20; m <= 20; ++m) s += std::exp(-std::pow(2.0 * pi * m, 2) / (4.0 * t));
    return s / std::sqrt(4.0 * pi * t);
}

// Circle of length 2 pi: g_t = (1/pi) Σ_{k>=1} k^2 exp(-2 k^2 t), by direct summation.
inline double circle_metric(double t, int kmax = 4000) {
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) s += double(k) * k * std::exp(-2.0 * double(k) * k * t);
    return s / pi;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("heatlens-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace oracle
