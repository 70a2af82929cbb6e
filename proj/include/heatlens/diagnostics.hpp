#pragma once

#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/metric.hpp"
#include "heatlens/operators.hpp"
#include "heatlens/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace heatlens {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms = 0.0;
};

// Least-squares fit y = intercept + slope * x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw invalid_parameter("line fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.rms = std::sqrt(ss / n);
    return f;
}

// Log-log slope of positive samples.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return fit_line(lx, ly).slope;
}

// ---- spectrum checks ------------------------------------------------------

// max |<phi_i, phi_j> - delta_ij| over the first `count` modes.
template <class Backend>
double orthonormality_error(const SpectralBasis<Backend>& basis, std::size_t count = 64) {
    count = std::min(count, basis.size());
    std::vector<ScalarField> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = basis.values(i);
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = i; j < count; ++j) {
            double g = basis.backend().integrate(v[i].cwiseProduct(v[j]));
            worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

// c in lambda_i ≈ c i^{2/n} (least squares through the origin, i >= 1).
template <class Backend>
double weyl_fit(const SpectralBasis<Backend>& basis) {
    const double n = basis.backend().metadata().n;
    double num = 0, den = 0;
    for (std::size_t i = 1; i < basis.size(); ++i) {
        double x = std::pow(static_cast<double>(i), 2.0 / n);
        num += x * basis.eigenvalue(i);
        den += x * x;
    }
    return den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

// Smallest C with max|phi_i| <= C lambda_i^{N/4} over the first `count` nonconstant modes.
template <class Backend>
double supnorm_constant(const SpectralBasis<Backend>& basis, std::size_t count = 64) {
    const double N = basis.backend().metadata().dimension_upper;
    double c = 0.0;
    for (std::size_t i = 1; i < std::min(count, basis.size()); ++i)
        c = std::max(c, basis.values(i).cwiseAbs().maxCoeff() / std::pow(basis.eigenvalue(i), N / 4.0));
    return c;
}

// ---- volume growth ----------------------------------------------------------

struct DensityEstimate {
    std::vector<double> radii;
    Eigen::MatrixXd ratios;  // node_count x radii: m(B_r(x)) / (omega_n r^n)
    ScalarField theta;       // extrapolated to r -> 0
    double mean = 0.0;
    double coefficient_of_variation = 0.0;
    double max_fit_rms = 0.0;  // relative rms of the per-node line fits
    std::size_t points_used = 0;
};

namespace detail {

inline void validate_radii(const std::vector<double>& r, double diameter, std::size_t min_points) {
    if (r.size() < min_points)
        throw invalid_parameter("r_grid needs at least " + std::to_string(min_points) + " radii");
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!(r[i] > 0.0) || !std::isfinite(r[i])) throw invalid_parameter("r_grid entries must be positive");
        if (i > 0 && !(r[i] < r[i - 1])) throw invalid_parameter("r_grid must be strictly decreasing");
    }
    if (diameter > 0.0 && !(r.front() < 0.5 * diameter)) throw invalid_parameter("r_grid maximum must be below half the diameter");
}

inline double weighted_cv(const ScalarField& v, const Eigen::VectorXd& w, double* mean_out) {
    const double W = w.sum();
    const double mean = w.dot(v) / W;
    const double var = w.dot((v.array() - mean).square().matrix()) / W;
    if (mean_out) *mean_out = mean;
    return mean != 0.0 ? std::sqrt(std::max(var, 0.0)) / std::abs(mean) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Ratio curves r -> m(B_r(x)) / (omega_n r^n) and their linear extrapolation
// to r = 0, fitted over radii within one decade of the smallest.
template <class Backend>
DensityEstimate volume_density(const Backend& be, int n, const std::vector<double>& r_grid) {
    detail::validate_radii(r_grid, be.metadata().diameter, 3);
    DensityEstimate d;
    d.radii = r_grid;
    const double omega = constants(n).omega;
    const Eigen::MatrixXd vol = node_ball_volumes(be, r_grid);
    d.ratios.resize(vol.rows(), vol.cols());
    for (Eigen::Index k = 0; k < vol.cols(); ++k)
        d.ratios.col(k) = vol.col(k) / (omega * std::pow(r_grid[static_cast<std::size_t>(k)], n));
    std::vector<std::size_t> use;
    const double rmin = r_grid.back();
    for (std::size_t k = 0; k < r_grid.size(); ++k)
        if (r_grid[k] <= 10.0 * rmin) use.push_back(k);
    while (use.size() < 3) use.insert(use.begin(), use.front() - 1);
    d.points_used = use.size();
    d.theta.resize(vol.rows());
    std::vector<double> x;
    for (auto k : use) x.push_back(r_grid[k]);
    for (Eigen::Index i = 0; i < vol.rows(); ++i) {
        std::vector<double> y;
        for (auto k : use) y.push_back(d.ratios(i, static_cast<Eigen::Index>(k)));
        LineFit f = fit_line(x, y);
        d.theta(i) = f.intercept;
        d.max_fit_rms = std::max(d.max_fit_rms, f.rms / std::max(std::abs(f.intercept), 1e-300));
    }
    d.coefficient_of_variation = detail::weighted_cv(d.theta, *be.weights(), &d.mean);
    return d;
}

struct NoncollapseProfile {
    std::vector<double> radii;
    std::vector<double> min_ratio;  // inf_x m(B_r(x)) / r^n per radius
    double constant = 0.0;          // inf over all sampled (x, r)
    double slope = 0.0;             // log-log slope of min_ratio against r
};

template <class Backend>
NoncollapseProfile noncollapse_profile(const Backend& be, int n, const std::vector<double>& r_grid) {
    detail::validate_radii(r_grid, be.metadata().diameter, 1);
    NoncollapseProfile p;
    p.radii = r_grid;
    const Eigen::MatrixXd vol = node_ball_volumes(be, r_grid);
    p.constant = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < vol.cols(); ++k) {
        double m = vol.col(k).minCoeff() / std::pow(r_grid[static_cast<std::size_t>(k)], n);
        p.min_ratio.push_back(m);
        p.constant = std::min(p.constant, m);
    }
    p.slope = r_grid.size() >= 2 ? loglog_slope(r_grid, p.min_ratio) : 0.0;
    return p;
}

// inf over sampled (x, r) of m(B_r(x)) / r^n.
template <class Backend>
double noncollapse_constant(const Backend& be, int n, const std::vector<double>& r_grid) {
    return noncollapse_profile(be, n, r_grid).constant;
}

// Slope of log mean m(B_r) against log r; never overrides a supplied n.
template <class Backend>
double estimate_dimension(const Backend& be, const std::vector<double>& r_grid) {
    const Eigen::MatrixXd vol = node_ball_volumes(be, r_grid);
    std::vector<double> m;
    for (Eigen::Index k = 0; k < vol.cols(); ++k) m.push_back(vol.col(k).mean());
    return loglog_slope(r_grid, m);
}

// Radii spanning one decade well inside the space.
inline std::vector<double> default_r_grid(double diameter, std::size_t points = 7) {
    std::vector<double> r;
    for (std::size_t k = 0; k < points; ++k)
        r.push_back(0.02 * diameter * std::pow(10.0, -static_cast<double>(k) / static_cast<double>(points - 1)));
    return r;
}

// ---- classifier -------------------------------------------------------------

struct ClassificationThresholds {
    double trace_residual = 1e-4;   // tr Hess = Delta, per eigenfunction
    double density_cv = 1e-2;       // flatness of theta
    double collapse_slope = 0.5;    // min ball ratio must not vanish as r -> 0
    double orthonormality = 1e-8;   // self-check of the basis
    std::size_t modes_checked = 20;
};

enum class Verdict { consistent_with_noncollapsed, collapsed_or_weighted, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::consistent_with_noncollapsed: return "consistent-with-noncollapsed";
        case Verdict::collapsed_or_weighted: return "collapsed-or-weighted";
        default: return "inconclusive";
    }
}

struct ClassificationReport {
    int n = 1;
    std::vector<std::size_t> modes;              // checked eigenfunction indices
    std::vector<double> trace_residuals;         // |tr Hess phi_i - Delta phi_i| / |Delta phi_i|
    std::vector<double> hausdorff_pairings;      // |∫ phi_i dH^n| = |∫ phi_i / theta dm|
    double orthonormality_error = 0.0;
    DensityEstimate density;
    NoncollapseProfile noncollapse;              // inf_x m(B_r(x)) / r^n profile
    bool trace_ok = false;
    bool noncollapse_ok = false;
    bool density_ok = false;
    bool self_checks_ok = false;
    std::vector<std::string> notes;
    ClassificationThresholds thresholds;
    Verdict verdict = Verdict::inconclusive;
};

// Verdict as a pure function of the recorded evidence and thresholds.
inline Verdict decide(const ClassificationReport& r) {
    if (!r.self_checks_ok) return Verdict::inconclusive;
    if (r.trace_ok && r.noncollapse_ok && r.density_ok) return Verdict::consistent_with_noncollapsed;
    return Verdict::collapsed_or_weighted;
}

template <class Backend>
ClassificationReport classify(const SpectralBasis<Backend>& basis, int n, const std::vector<double>& r_grid,
                              const ClassificationThresholds& th = {}) {
    detail::require_pointwise<Backend>("classify");
    ClassificationReport rep;
    if constexpr (Backend::pointwise_calculus) {
        const auto& be = basis.backend();
        rep.n = n;
        rep.thresholds = th;
        const std::size_t last = std::min(basis.size(), th.modes_checked + 1);
        rep.orthonormality_error = orthonormality_error(basis, last);
        rep.self_checks_ok = rep.orthonormality_error <= th.orthonormality;
        if (!rep.self_checks_ok) rep.notes.push_back("basis orthonormality check failed");
        if (last < 2) {
            rep.self_checks_ok = false;
            rep.notes.push_back("no nonconstant eigenfunctions to check");
        }
        rep.trace_ok = true;
        for (std::size_t i = 1; i < last; ++i) {
            rep.modes.push_back(i);
            double r = trace_residual(basis, i);
            rep.trace_residuals.push_back(r);
            if (!std::isfinite(r)) {
                rep.self_checks_ok = false;
                rep.notes.push_back("non-finite trace residual at mode " + std::to_string(i));
            }
            rep.trace_ok = rep.trace_ok && r <= th.trace_residual;
        }
        rep.density = volume_density(be, n, r_grid);
        rep.density_ok = rep.density.coefficient_of_variation <= th.density_cv;
        if (!(rep.density.mean > 0.0) || !std::isfinite(rep.density.coefficient_of_variation)) {
            rep.self_checks_ok = false;
            rep.notes.push_back("density extrapolation failed");
        }
        rep.noncollapse = noncollapse_profile(be, n, r_grid);
        rep.noncollapse_ok = rep.noncollapse.constant > 0.0 && rep.noncollapse.slope <= th.collapse_slope;
        const ScalarField inv_theta = rep.density.theta.cwiseInverse();
        for (std::size_t i : rep.modes) rep.hausdorff_pairings.push_back(std::abs(be.integrate(basis.values(i).cwiseProduct(inv_theta))));
        rep.verdict = decide(rep);
    }
    return rep;
}

// ---- convergence study ----------------------------------------------------

struct ConvergencePoint {
    double t = 0.0;
    bool out_of_regime = false;               // t >= diameter^2
    std::map<double, double> hs_ball;         // p -> hs_distance(rescaled_ball(t), c_n g, p)
    std::map<double, double> hs_bgg;          // p -> hs_distance(rescaled_bgg(t), c_n theta^{-1} g, p)
    double sup_diag = 0.0;                    // sup_x t^{(n+2)/2} p(x, x, t)
};

struct ConvergenceStudy {
    int n = 1;
    double c_n = 0.0;
    std::vector<double> p_list;
    std::vector<ConvergencePoint> points;
    std::vector<std::string> warnings;        // dropped points
    std::map<double, double> slope_hs_ball;   // fitted log-log slopes over in-regime points
    std::map<double, double> slope_hs_bgg;
    double slope_sup_diag = 0.0;
};

template <class Backend>
ConvergenceStudy convergence_study(const SpectralBasis<Backend>& basis, const std::vector<double>& t_grid,
                                   const std::vector<double>& p_list, double tolerance = default_tail_tolerance) {
    if (t_grid.empty()) throw invalid_parameter("t_grid must not be empty");
    if (p_list.empty()) throw invalid_parameter("p_list must not be empty");
    const auto& be = basis.backend();
    ConvergenceStudy s;
    s.n = be.metadata().n;
    s.c_n = constants(s.n).c;
    s.p_list = p_list;
    const TensorField target = s.c_n * be.canonical_metric();
    const TensorField target_bgg = scale_pointwise(target, be.density_field().cwiseInverse());
    const double diam2 = be.metadata().diameter * be.metadata().diameter;
    for (double t : t_grid) {
        if (!(t > 0.0) || !std::isfinite(t)) throw invalid_parameter("t_grid entries must be positive");
        try {
            basis.truncation().require(2.0 * t, 1.0, tolerance, "convergence_study");
            basis.truncation().require(t, 0.0, tolerance, "convergence_study");
        } catch (const truncation_error& e) {
            std::ostringstream msg;
            msg << "dropped t=" << t << ": " << e.what();
            s.warnings.push_back(msg.str());
            continue;
        }
        ConvergencePoint pt;
        pt.t = t;
        pt.out_of_regime = t >= diam2;
        const TensorField g = pullback_metric(basis, t, tolerance);
        const double bgg_scale = constants(s.n).omega * std::pow(t, 0.5 * (s.n + 2));
        const TensorField bgg = bgg_scale * g;
        const Eigen::VectorXd vol = node_ball_volumes(be, std::vector<double>{std::sqrt(t)}).col(0);
        const TensorField ball = scale_pointwise(t * g, vol);
        for (double p : p_list) {
            pt.hs_ball[p] = hs_distance(ball, target, p);
            pt.hs_bgg[p] = hs_distance(bgg, target_bgg, p);
        }
        pt.sup_diag = std::pow(t, 0.5 * (s.n + 2)) * diag_heat_field(basis, t, tolerance).maxCoeff();
        s.points.push_back(pt);
    }
    std::vector<double> ts, sup;
    for (const auto& pt : s.points)
        if (!pt.out_of_regime) {
            ts.push_back(pt.t);
            sup.push_back(pt.sup_diag);
        }
    s.slope_sup_diag = loglog_slope(ts, sup);
    for (double p : p_list) {
        std::vector<double> a, b;
        for (const auto& pt : s.points)
            if (!pt.out_of_regime) {
                a.push_back(pt.hs_ball.at(p));
                b.push_back(pt.hs_bgg.at(p));
            }
        s.slope_hs_ball[p] = loglog_slope(ts, a);
        s.slope_hs_bgg[p] = loglog_slope(ts, b);
    }
    return s;
}

}  // namespace heatlens
