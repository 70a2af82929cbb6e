#pragma once

#include "heatlens/error.hpp"
#include "heatlens/quadrature.hpp"
#include "heatlens/trig.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace heatlens {

// n: essential dimension, curvature_lower: K, dimension_upper: N (n <= N).
struct SpaceMetadata {
    int n = 1;
    double curvature_lower = 0.0;
    double dimension_upper = 1.0;
    double diameter = 0.0;
};

enum class ModelKind { circle, flat_torus, weighted_circle };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::circle: return "circle";
        case ModelKind::flat_torus: return "flat_torus";
        default: return "weighted_circle";
    }
}

// Smooth model spaces: circles, flat rectangular tori, and circles with
// measure e^{-phi} dx. measure_scale multiplies the reference measure.
class ModelSpace {
public:
    static ModelSpace circle(double length, double measure_scale = 1.0) {
        return ModelSpace(ModelKind::circle, {length}, {}, measure_scale);
    }
    static ModelSpace flat_torus(std::vector<double> lengths, double measure_scale = 1.0) {
        return ModelSpace(ModelKind::flat_torus, std::move(lengths), {}, measure_scale);
    }
    static ModelSpace weighted_circle(double length, TrigSeries phi, double measure_scale = 1.0) {
        return ModelSpace(ModelKind::weighted_circle, {length}, std::move(phi), measure_scale);
    }

    ModelKind kind() const { return kind_; }
    int dimension() const { return static_cast<int>(lengths_.size()); }
    const std::vector<double>& lengths() const { return lengths_; }
    const TrigSeries& log_density() const { return phi_; }
    double measure_scale() const { return scale_; }
    const SpaceMetadata& metadata() const { return meta_; }
    bool weighted() const { return kind_ == ModelKind::weighted_circle; }

    // Density of the measure with respect to Lebesgue measure at coordinate x.
    double density(const double* x) const {
        if (!weighted()) return scale_;
        return scale_ * std::exp(-phi_.evaluate(x[0], lengths_[0]));
    }
    double density(double x) const { return density(&x); }

    // order-th derivative of phi (zero on unweighted spaces).
    double log_density_derivative(double x, int order) const {
        return weighted() ? phi_.evaluate(x, lengths_[0], order) : 0.0;
    }

    double total_measure() const {
        if (!weighted()) {
            double v = scale_;
            for (double l : lengths_) v *= l;
            return v;
        }
        return integrate([this](double x) { return density(x); }, 0.0, lengths_[0]);
    }

private:
    ModelSpace(ModelKind kind, std::vector<double> lengths, TrigSeries phi, double scale)
        : kind_(kind), lengths_(std::move(lengths)), phi_(std::move(phi)), scale_(scale) {
        if (lengths_.empty()) throw invalid_parameter("model space needs at least one length");
        if (kind_ != ModelKind::flat_torus && lengths_.size() != 1)
            throw invalid_parameter("circle variants take exactly one length");
        for (double l : lengths_)
            if (!(l > 0.0) || !std::isfinite(l)) throw invalid_parameter("lengths must be positive and finite");
        if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw invalid_parameter("measure_scale must be positive");
        for (double c : phi_.cos_coeffs)
            if (!std::isfinite(c)) throw invalid_parameter("phi coefficients must be finite");
        for (double c : phi_.sin_coeffs)
            if (!std::isfinite(c)) throw invalid_parameter("phi coefficients must be finite");

        meta_.n = dimension();
        meta_.dimension_upper = dimension();
        double sq = 0.0;
        for (double l : lengths_) sq += l * l;
        meta_.diameter = 0.5 * std::sqrt(sq);
        meta_.curvature_lower = 0.0;
        if (weighted()) {
            // Ric_N = phi'' - phi'^2 / (N - n) with N = n + 1 on a 1D space.
            meta_.dimension_upper = 2.0;
            double k = std::numeric_limits<double>::infinity();
            const int samples = 4096;
            for (int i = 0; i < samples; ++i) {
                double x = lengths_[0] * i / samples;
                double d1 = phi_.evaluate(x, lengths_[0], 1), d2 = phi_.evaluate(x, lengths_[0], 2);
                k = std::min(k, d2 - d1 * d1);
            }
            meta_.curvature_lower = k;
        }
    }

    ModelKind kind_;
    std::vector<double> lengths_;
    TrigSeries phi_;
    double scale_;
    SpaceMetadata meta_;
};

namespace detail {

// Lebesgue measure of B_r(0) intersected with the box prod [-h_j, h_j].
inline double ball_box_volume(double r, const double* h, int n) {
    if (r <= 0.0) return 0.0;
    if (n == 1) return 2.0 * std::min(r, h[0]);
    if (n == 2) {
        const double a = h[0], b = h[1];
        auto F = [r](double x) {
            x = std::min(x, r);
            return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(x / r));
        };
        double q;
        if (r <= b) {
            q = F(std::min(a, r));
        } else {
            const double x0 = std::sqrt(r * r - b * b);
            q = b * std::min(a, x0);
            if (a > x0) q += F(std::min(a, r)) - F(x0);
        }
        return 4.0 * q;
    }
    const double lim = std::min(r, h[0]);
    return 2.0 * integrate([&](double x) { return ball_box_volume(std::sqrt(std::max(0.0, r * r - x * x)), h + 1, n - 1); },
                           0.0, lim, 1e-12);
}

}  // namespace detail

// m(B_r(x)) on a model space. Exact for circles and tori; adaptive quadrature
// of the density on weighted circles.
inline double ball_volume(const ModelSpace& space, const double* x, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw invalid_parameter("ball radius must be positive and finite");
    const auto& L = space.lengths();
    if (space.kind() == ModelKind::weighted_circle) {
        if (2.0 * r >= L[0]) return space.total_measure();
        return integrate([&](double s) { return space.density(s); }, x[0] - r, x[0] + r);
    }
    std::vector<double> h(L.size());
    for (std::size_t j = 0; j < L.size(); ++j) h[j] = 0.5 * L[j];
    return space.measure_scale() * detail::ball_box_volume(r, h.data(), static_cast<int>(h.size()));
}

inline double ball_volume(const ModelSpace& space, double x, double r) { return ball_volume(space, &x, r); }

// Uniform product grid with the same number of points per axis.
// weights[i] = density(node) * cell volume, so sum weights = total measure
// (trapezoid rule, spectrally accurate for periodic integrands).
struct QuadratureGrid {
    int dim = 1;
    std::size_t points_per_axis = 0;
    Eigen::MatrixXd nodes;      // node_count x dim
    Eigen::VectorXd weights;    // node_count
    std::vector<double> lengths;

    std::size_t node_count() const { return static_cast<std::size_t>(nodes.rows()); }

    // Axis index of a node; axis 0 varies slowest.
    std::size_t axis_index(std::size_t node, int axis) const {
        std::size_t stride = 1;
        for (int j = dim - 1; j > axis; --j) stride *= points_per_axis;
        return (node / stride) % points_per_axis;
    }
};

inline QuadratureGrid make_grid(const ModelSpace& space, std::size_t points_per_axis) {
    if (points_per_axis < 2) throw invalid_parameter("grid needs at least 2 points per axis");
    QuadratureGrid g;
    g.dim = space.dimension();
    g.points_per_axis = points_per_axis;
    g.lengths = space.lengths();
    std::size_t count = 1;
    for (int j = 0; j < g.dim; ++j) count *= points_per_axis;
    g.nodes.resize(static_cast<Eigen::Index>(count), g.dim);
    g.weights.resize(static_cast<Eigen::Index>(count));
    double cell = 1.0;
    for (double l : g.lengths) cell *= l / static_cast<double>(points_per_axis);
    for (std::size_t i = 0; i < count; ++i) {
        for (int j = 0; j < g.dim; ++j)
            g.nodes(i, j) = g.lengths[j] * static_cast<double>(g.axis_index(i, j)) / static_cast<double>(points_per_axis);
        Eigen::RowVectorXd p = g.nodes.row(i);
        g.weights(i) = cell * space.density(p.data());
    }
    return g;
}

}  // namespace heatlens
