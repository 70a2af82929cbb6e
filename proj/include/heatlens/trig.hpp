#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace heatlens {

// Real trigonometric series on a circle of length L:
//   f(x) = sum_k cos_coeffs[k] cos(k w x) + sum_k sin_coeffs[k-1] sin(k w x),  w = 2 pi / L.
struct TrigSeries {
    std::vector<double> cos_coeffs;  // frequencies 0, 1, 2, ...
    std::vector<double> sin_coeffs;  // frequencies 1, 2, ...

    bool is_zero() const {
        for (double c : cos_coeffs) if (c != 0.0) return false;
        for (double s : sin_coeffs) if (s != 0.0) return false;
        return true;
    }

    std::size_t degree() const {
        std::size_t d = 0;
        for (std::size_t k = 0; k < cos_coeffs.size(); ++k) if (cos_coeffs[k] != 0.0) d = std::max(d, k);
        for (std::size_t k = 0; k < sin_coeffs.size(); ++k) if (sin_coeffs[k] != 0.0) d = std::max(d, k + 1);
        return d;
    }

    // order-th derivative at x.
    double evaluate(double x, double length, int order = 0) const {
        const double w = 2.0 * std::numbers::pi / length;
        double v = 0.0;
        for (std::size_t k = 0; k < cos_coeffs.size(); ++k) v += cos_coeffs[k] * derivative_term(k, w, x, order, true);
        for (std::size_t k = 0; k < sin_coeffs.size(); ++k) v += sin_coeffs[k] * derivative_term(k + 1, w, x, order, false);
        return v;
    }

private:
    static double derivative_term(std::size_t k, double w, double x, int order, bool is_cos) {
        if (k == 0) return order == 0 && is_cos ? 1.0 : 0.0;
        const double kw = static_cast<double>(k) * w;
        const double s = std::sin(kw * x), c = std::cos(kw * x);
        // d^m cos = kw^m cos(. + m pi/2); same for sin.
        const double scale = std::pow(kw, order);
        switch (((order % 4) + 4) % 4) {
            case 0: return scale * (is_cos ? c : s);
            case 1: return scale * (is_cos ? -s : c);
            case 2: return scale * (is_cos ? -c : -s);
            default: return scale * (is_cos ? s : -c);
        }
    }
};

// One term a cos(<k, w x>) + b sin(<k, w x>) with w_j = 2 pi / L_j.
struct TrigTerm {
    std::vector<int> frequency;
    double cos_coeff = 0.0;
    double sin_coeff = 0.0;
};

// A mode stored symbolically as a finite trigonometric sum.
struct TrigMode {
    std::vector<TrigTerm> terms;

    int max_abs_frequency() const {
        int m = 0;
        for (const auto& t : terms)
            for (int k : t.frequency) m = std::max(m, std::abs(k));
        return m;
    }
};

}  // namespace heatlens
