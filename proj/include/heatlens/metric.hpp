#pragma once

#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/parallel.hpp"
#include "heatlens/quadrature.hpp"
#include "heatlens/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace heatlens {

struct DimensionConstants {
    double omega;  // volume of the unit ball in R^n
    double c;      // limit constant of the rescaled heat metric
};

// omega_n = pi^{n/2} / Gamma(n/2 + 1);
// c_n = omega_n (4 pi)^{-n} * integral over R^n of |d/dx_1 e^{-|x|^2/4}|^2,
// the integral factored into one-dimensional Gaussian moments.
inline DimensionConstants constants(int n) {
    if (n < 1) throw invalid_parameter("dimension must be at least 1");
    const double pi = std::numbers::pi;
    DimensionConstants k;
    k.omega = std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
    const double inf = std::numeric_limits<double>::infinity();
    const double moment = integrate([](double x) { return 0.25 * x * x * std::exp(-0.5 * x * x); }, -inf, inf);
    const double mass = integrate([](double x) { return std::exp(-0.5 * x * x); }, -inf, inf);
    k.c = k.omega / std::pow(4.0 * pi, n) * moment * std::pow(mass, n - 1);
    return k;
}

// g_t = sum_{i>=1} e^{-2 lambda_i t} d phi_i ⊗ d phi_i at every node.
template <class Backend>
TensorField pullback_metric(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    if (!(t > 0.0) || !std::isfinite(t)) throw invalid_parameter("t must be positive and finite");
    basis.truncation().require(2.0 * t, 1.0, tolerance, "pullback_metric");
    const Backend& be = basis.backend();
    if constexpr (Backend::pointwise_calculus) {
        const int n = be.dim();
        TensorField g = make_tensor_field(n, be.weights());
        for (std::size_t i = 1; i < basis.size(); ++i) {
            const double c = std::exp(-2.0 * basis.eigenvalue(i) * t);
            if (c == 0.0) continue;
            CovectorField d = be.gradient(basis.mode(i));
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) g.entries.col(sym_index(a, b, n)) += c * d.col(a).cwiseProduct(d.col(b));
        }
        return g;
    } else {
        const int a = be.ambient();
        Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(be.cell_count()), a * a);
        for (std::size_t i = 1; i < basis.size(); ++i) {
            const double c = std::exp(-2.0 * basis.eigenvalue(i) * t);
            if (c == 0.0) continue;
            Eigen::MatrixXd d = be.cell_gradient(basis.mode(i));
            for (int r = 0; r < a; ++r)
                for (int s = 0; s < a; ++s) cells.col(r * a + s) += c * d.col(r).cwiseProduct(d.col(s));
        }
        return be.cells_to_nodes(cells);
    }
}

// m(B_r(x)) at every node for each radius: node_count x radii.
inline Eigen::MatrixXd node_ball_volumes(const ModelBackend& be, const std::vector<double>& radii) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(be.node_count()), static_cast<Eigen::Index>(radii.size()));
    const auto& grid = be.grid();
    if (!be.space().weighted()) {
        // Homogeneous: one value per radius.
        Eigen::RowVectorXd x0 = grid.nodes.row(0);
        for (std::size_t k = 0; k < radii.size(); ++k)
            out.col(static_cast<Eigen::Index>(k)).setConstant(ball_volume(be.space(), x0.data(), radii[k]));
        return out;
    }
    parallel_for(be.node_count(), [&](std::size_t i) {
        Eigen::RowVectorXd x = grid.nodes.row(static_cast<Eigen::Index>(i));
        for (std::size_t k = 0; k < radii.size(); ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ball_volume(be.space(), x.data(), radii[k]);
    });
    return out;
}

inline Eigen::MatrixXd node_ball_volumes(const DiscreteBackend& be, const std::vector<double>& radii,
                                         DistanceMethod method = DistanceMethod::fast_marching) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(be.node_count()), static_cast<Eigen::Index>(radii.size()));
    MeshBallOracle oracle(be.space(), method);
    parallel_for(be.node_count(), [&](std::size_t i) {
        auto v = oracle.volumes(static_cast<int>(i), radii);
        for (std::size_t k = 0; k < radii.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
    });
    return out;
}

// omega_n t^{(n+2)/2} g_t.
template <class Backend>
TensorField rescaled_bgg(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    const int n = basis.backend().metadata().n;
    return (constants(n).omega * std::pow(t, 0.5 * (n + 2))) * pullback_metric(basis, t, tolerance);
}

// t m(B_sqrt(t)(x)) g_t.
template <class Backend>
TensorField rescaled_ball(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    TensorField g = pullback_metric(basis, t, tolerance);
    Eigen::VectorXd vol = node_ball_volumes(basis.backend(), std::vector<double>{std::sqrt(t)}).col(0);
    return scale_pointwise(t * g, vol);
}

template <class Backend>
TensorField canonical_metric(const SpectralBasis<Backend>& basis) {
    return basis.backend().canonical_metric();
}

// (integral |A - B|_HS^p dm)^{1/p}.
inline double hs_distance(const TensorField& a, const TensorField& b, double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw invalid_parameter("hs_distance needs finite p >= 1");
    require_same_grid(a, b);
    if (!a.weights) throw shape_error("tensor field has no quadrature weights");
    ScalarField d = hs_norm_squared(a - b).cwiseSqrt();
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) s += (*a.weights)(i) * std::pow(d(i), p);
    return std::pow(s, 1.0 / p);
}

}  // namespace heatlens
