#pragma once

#include "heatlens/discrete_backend.hpp"
#include "heatlens/eigensolver.hpp"
#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/model_backend.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace heatlens {

inline constexpr double default_tail_tolerance = 1e-10;

// Weyl-law estimate of the discarded part of sum_i lambda_i^p e^{-lambda_i t},
// relative to the retained part. Eigenvalues beyond the last retained one are
// modelled as lambda(s) = lambda_{K-1} (s / (K-1))^{2/n}.
class TruncationPolicy {
public:
    TruncationPolicy() = default;
    TruncationPolicy(std::vector<double> eigenvalues, int n) : eigenvalues_(std::move(eigenvalues)), n_(n) {}

    std::size_t mode_count() const { return eigenvalues_.size(); }

    double tail_bound(double t, double power = 0.0) const {
        if (!(t > 0.0)) throw invalid_parameter("tail bound needs t > 0");
        const std::size_t K = eigenvalues_.size();
        if (K < 2) return std::numeric_limits<double>::infinity();
        const double last = eigenvalues_.back();
        if (!(last > 0.0)) return std::numeric_limits<double>::infinity();
        double head = 0.0;
        for (double l : eigenvalues_) {
            if (power > 0.0 && l <= 0.0) continue;
            head += (power > 0.0 ? std::pow(l, power) : 1.0) * std::exp(-l * t);
        }
        if (!(head > 0.0)) return std::numeric_limits<double>::infinity();
        const double s_last = static_cast<double>(K - 1);
        const double half_n = 0.5 * n_;
        const double x = last * t;
        const double tail = s_last * half_n * std::pow(x, -half_n) * std::pow(t, -power) *
                            boost::math::tgamma(power + half_n, x);
        return tail / head;
    }

    void require(double t, double power, double tolerance, const char* what) const {
        double b = tail_bound(t, power);
        if (!(b <= tolerance)) {
            std::ostringstream msg;
            msg << what << ": truncation tail bound " << b << " at t=" << t << " exceeds tolerance " << tolerance
                << " with " << mode_count() << " modes; increase mode_count or t";
            throw truncation_error(msg.str(), b, tolerance);
        }
    }

private:
    std::vector<double> eigenvalues_;
    int n_ = 1;
};

// First K eigenpairs of the Dirichlet-form generator, ascending, with
// eigenfunctions orthonormal in L^2(m). Immutable after construction.
template <class Backend>
class SpectralBasis {
public:
    using Mode = typename Backend::Mode;

    SpectralBasis(std::shared_ptr<const Backend> backend, std::vector<double> eigenvalues, std::vector<Mode> modes)
        : backend_(std::move(backend)), eigenvalues_(std::move(eigenvalues)), modes_(std::move(modes)),
          truncation_(eigenvalues_, backend_->metadata().n) {
        if (eigenvalues_.size() != modes_.size()) throw shape_error("eigenvalue and mode counts differ");
    }

    const Backend& backend() const { return *backend_; }
    const std::shared_ptr<const Backend>& backend_ptr() const { return backend_; }
    std::size_t size() const { return modes_.size(); }
    double eigenvalue(std::size_t i) const { return eigenvalues_.at(i); }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    const Mode& mode(std::size_t i) const { return modes_.at(i); }
    const std::vector<Mode>& modes() const { return modes_; }
    const TruncationPolicy& truncation() const { return truncation_; }
    ScalarField values(std::size_t i) const { return backend_->values(mode(i)); }

    SpectralBasis truncated(std::size_t count) const {
        if (count == 0 || count > size()) throw invalid_parameter("truncation count out of range");
        return SpectralBasis(backend_, std::vector<double>(eigenvalues_.begin(), eigenvalues_.begin() + count),
                             std::vector<Mode>(modes_.begin(), modes_.begin() + count));
    }

private:
    std::shared_ptr<const Backend> backend_;
    std::vector<double> eigenvalues_;
    std::vector<Mode> modes_;
    TruncationPolicy truncation_;
};

using ModelBasis = SpectralBasis<ModelBackend>;
using DiscreteBasis = SpectralBasis<DiscreteBackend>;

struct ModelBasisOptions {
    std::size_t grid_points = 0;     // per axis; 0 selects max(16, 4 kmax + 4)
    std::size_t galerkin_order = 0;  // weighted circle only; 0 selects max(32, mode_count)
};

namespace detail {

struct FlatMode {
    double lambda;
    std::vector<int> k;
    bool is_sin;
};

// Representative of ±k: first nonzero component positive.
inline bool half_space(const std::vector<int>& k) {
    for (int v : k)
        if (v != 0) return v > 0;
    return true;
}

// First `count` Laplace eigenmodes of a flat torus: ascending lambda, ties
// broken lexicographically on the frequency, cos before sin.
inline std::vector<FlatMode> flat_modes(const std::vector<double>& lengths, std::size_t count) {
    const int n = static_cast<int>(lengths.size());
    std::vector<double> w2(n);
    for (int j = 0; j < n; ++j) w2[j] = std::pow(2.0 * std::numbers::pi / lengths[j], 2);
    for (int bound = 2;; bound *= 2) {
        std::vector<FlatMode> modes;
        std::vector<int> k(n, -bound);
        while (true) {
            if (half_space(k)) {
                double lam = 0.0;
                for (int j = 0; j < n; ++j) lam += w2[j] * k[j] * k[j];
                bool zero = std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
                modes.push_back({lam, k, false});
                if (!zero) modes.push_back({lam, k, true});
            }
            int j = n - 1;
            while (j >= 0 && k[j] == bound) k[j--] = -bound;
            if (j < 0) break;
            ++k[j];
        }
        std::sort(modes.begin(), modes.end(), [](const FlatMode& a, const FlatMode& b) {
            if (std::abs(a.lambda - b.lambda) > 1e-12 * std::max(a.lambda, b.lambda)) return a.lambda < b.lambda;
            if (a.k != b.k) return a.k < b.k;
            return !a.is_sin && b.is_sin;
        });
        double outside = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) outside = std::min(outside, w2[j] * (bound + 1.0) * (bound + 1.0));
        if (modes.size() > count && modes[count].lambda < outside * (1 - 1e-12)) {
            modes.resize(count);
            return modes;
        }
    }
}

inline std::size_t grid_for(int kmax) { return std::max<std::size_t>(16, 4 * static_cast<std::size_t>(kmax) + 4); }

// Fixes the basis inside each cluster of numerically equal eigenvalues so it
// depends only on the eigenspace: column j of a cluster is rotated to carry
// the whole weight of the first row (in coefficient order) the remaining
// columns still touch. Rotations keep M-orthonormality.
inline void canonicalize_clusters(const Eigen::VectorXd& values, Eigen::MatrixXd& vectors, std::size_t count,
                                  double rel_gap = 1e-9) {
    std::size_t begin = 0;
    while (begin < count) {
        std::size_t end = begin + 1;
        const double scale = std::max(std::abs(values(Eigen::Index(begin))), 1.0);
        while (end < count && values(Eigen::Index(end)) - values(Eigen::Index(end - 1)) <= rel_gap * scale) ++end;
        for (std::size_t j = begin; j + 1 < end; ++j) {
            auto sub = vectors.middleCols(Eigen::Index(j), Eigen::Index(end - j));
            const double top = sub.rowwise().norm().maxCoeff();
            Eigen::Index r = 0;
            while (sub.row(r).norm() < 0.1 * top) ++r;
            const Eigen::VectorXd v = sub.row(r).transpose().normalized();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
            Eigen::MatrixXd Q = qr.householderQ();
            if (Q.col(0).dot(v) < 0) Q = -Q;
            sub = (sub * Q).eval();
        }
        begin = end;
    }
}

}  // namespace detail

// Eigenbasis of a model space. Circles and tori use closed-form modes;
// weighted circles use a trigonometric Galerkin method.
inline ModelBasis compute_basis(const ModelSpace& space, std::size_t mode_count, const ModelBasisOptions& opt = {}) {
    if (mode_count == 0) throw invalid_parameter("mode_count must be positive");
    const double scale = space.measure_scale();
    double volume = scale;
    for (double l : space.lengths()) volume *= l;
    std::vector<double> lambdas;
    std::vector<TrigMode> modes;

    if (!space.weighted()) {
        auto flat = detail::flat_modes(space.lengths(), mode_count);
        int kmax = 0;
        for (const auto& m : flat) {
            TrigTerm term;
            term.frequency = m.k;
            bool zero = std::all_of(m.k.begin(), m.k.end(), [](int v) { return v == 0; });
            double c = zero ? 1.0 / std::sqrt(volume) : std::sqrt(2.0 / volume);
            (m.is_sin ? term.sin_coeff : term.cos_coeff) = c;
            for (int v : m.k) kmax = std::max(kmax, std::abs(v));
            lambdas.push_back(m.lambda);
            modes.push_back(TrigMode{{term}});
        }
        std::size_t M = opt.grid_points ? opt.grid_points : detail::grid_for(kmax);
        auto backend = std::make_shared<const ModelBackend>(space, M);
        return ModelBasis(backend, std::move(lambdas), std::move(modes));
    }

    const std::size_t K = opt.galerkin_order ? opt.galerkin_order : std::max<std::size_t>(32, mode_count);
    if (mode_count > 2 * K + 1)
        throw invalid_parameter("mode_count exceeds the Galerkin space dimension 2K+1");
    std::size_t M = opt.grid_points ? opt.grid_points : detail::grid_for(static_cast<int>(K) + static_cast<int>(space.log_density().degree()) * 4);
    auto backend = std::make_shared<const ModelBackend>(space, M);
    const auto& grid = backend->grid();
    const double w = 2.0 * std::numbers::pi / space.lengths()[0];
    const Eigen::Index dimg = static_cast<Eigen::Index>(2 * K + 1);
    Eigen::MatrixXd B(grid.node_count(), dimg), D(grid.node_count(), dimg);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        double x = grid.nodes(i, 0);
        B(i, 0) = 1.0;
        D(i, 0) = 0.0;
        for (std::size_t k = 1; k <= K; ++k) {
            double a = w * static_cast<double>(k) * x;
            B(i, 2 * k - 1) = std::cos(a);
            B(i, 2 * k) = std::sin(a);
            D(i, 2 * k - 1) = -w * static_cast<double>(k) * std::sin(a);
            D(i, 2 * k) = w * static_cast<double>(k) * std::cos(a);
        }
    }
    Eigen::MatrixXd mass = B.transpose() * grid.weights.asDiagonal() * B;
    Eigen::MatrixXd stiff = D.transpose() * grid.weights.asDiagonal() * D;
    mass = 0.5 * (mass + mass.transpose()).eval();
    stiff = 0.5 * (stiff + stiff.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(stiff, mass);
    if (es.info() != Eigen::Success) throw solver_error("Galerkin eigenproblem failed", INFINITY);
    Eigen::MatrixXd vectors = es.eigenvectors();
    detail::canonicalize_clusters(es.eigenvalues(), vectors, std::min<std::size_t>(2 * K + 1, mode_count + 2));
    for (std::size_t i = 0; i < mode_count; ++i) {
        Eigen::VectorXd c = vectors.col(static_cast<Eigen::Index>(i));
        Eigen::Index arg;
        c.cwiseAbs().maxCoeff(&arg);
        if (c(arg) < 0) c = -c;
        TrigMode mode;
        mode.terms.push_back({{0}, c(0), 0.0});
        for (std::size_t k = 1; k <= K; ++k) mode.terms.push_back({{static_cast<int>(k)}, c(2 * k - 1), c(2 * k)});
        lambdas.push_back(i == 0 ? std::max(0.0, es.eigenvalues()(0)) : es.eigenvalues()(static_cast<Eigen::Index>(i)));
        modes.push_back(std::move(mode));
    }
    return ModelBasis(backend, std::move(lambdas), std::move(modes));
}

// Eigenbasis of a discrete space from the generalized problem S v = λ M v.
inline DiscreteBasis compute_basis(std::shared_ptr<const DiscreteSpace> space, std::size_t mode_count,
                                   const EigenSolverOptions& opt = {}) {
    if (mode_count == 0) throw invalid_parameter("mode_count must be positive");
    EigenResult r = smallest_eigenpairs(space->stiffness, space->mass, mode_count, opt);
    std::vector<double> lambdas(mode_count);
    std::vector<Eigen::VectorXd> modes(mode_count);
    for (std::size_t i = 0; i < mode_count; ++i) {
        lambdas[i] = i == 0 ? std::max(0.0, r.values(0)) : r.values(static_cast<Eigen::Index>(i));
        modes[i] = r.vectors.col(static_cast<Eigen::Index>(i));
    }
    auto backend = std::make_shared<const DiscreteBackend>(std::move(space));
    return DiscreteBasis(backend, std::move(lambdas), std::move(modes));
}

inline DiscreteBasis compute_basis(const DiscreteSpace& space, std::size_t mode_count, const EigenSolverOptions& opt = {}) {
    return compute_basis(std::make_shared<const DiscreteSpace>(space), mode_count, opt);
}

// Number of modes with e^{-lambda t_min} >= cutoff on a model space.
inline std::size_t default_mode_count(const ModelSpace& space, double t_min, double cutoff = 1e-14) {
    if (!(t_min > 0.0)) throw invalid_parameter("t_min must be positive");
    const double lam_max = -std::log(cutoff) / t_min;
    std::vector<double> w2;
    for (double l : space.lengths()) w2.push_back(std::pow(2.0 * std::numbers::pi / l, 2));
    // Count lattice points with sum w2_j k_j^2 <= lam_max.
    std::size_t count = 0;
    const int n = static_cast<int>(w2.size());
    std::vector<int> bound(n);
    for (int j = 0; j < n; ++j) bound[j] = static_cast<int>(std::floor(std::sqrt(lam_max / w2[j])));
    std::vector<int> k(n);
    for (int j = 0; j < n; ++j) k[j] = -bound[j];
    while (true) {
        double lam = 0.0;
        for (int j = 0; j < n; ++j) lam += w2[j] * k[j] * k[j];
        if (lam <= lam_max) ++count;
        int j = n - 1;
        while (j >= 0 && k[j] == bound[j]) { k[j] = -bound[j]; --j; }
        if (j < 0) break;
        ++k[j];
    }
    // The weight perturbs eigenvalues by O(sup |phi'|^2); keep a margin.
    if (space.weighted()) count += 8;
    return count;
}

// ---- heat kernel series -------------------------------------------------

template <class Backend>
double heat_kernel(const SpectralBasis<Backend>& basis, std::size_t x, std::size_t y, double t,
                   double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 0.0, tolerance, "heat_kernel");
    if (x >= basis.backend().node_count() || y >= basis.backend().node_count())
        throw invalid_parameter("node index out of range");
    double p = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i)
        p += std::exp(-basis.eigenvalue(i) * t) *
             (basis.backend().value_at(basis.mode(i), x) * basis.backend().value_at(basis.mode(i), y));
    return p;
}

// p(x, y, t) at arbitrary coordinates; the product phi(x) phi(y) is formed
// first so swapping x and y gives a bit-identical sum. of a model space.
inline double heat_kernel_at(const ModelBasis& basis, const double* x, const double* y, double t,
                             double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 0.0, tolerance, "heat_kernel");
    double p = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i)
        p += std::exp(-basis.eigenvalue(i) * t) *
             (basis.backend().value_at(basis.mode(i), x) * basis.backend().value_at(basis.mode(i), y));
    return p;
}

// x -> p(x, y, t) sampled on all nodes.
template <class Backend>
ScalarField heat_kernel_column(const SpectralBasis<Backend>& basis, std::size_t y, double t,
                               double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 0.0, tolerance, "heat_kernel");
    ScalarField p = ScalarField::Zero(basis.backend().node_count());
    for (std::size_t i = 0; i < basis.size(); ++i)
        p += std::exp(-basis.eigenvalue(i) * t) * basis.backend().value_at(basis.mode(i), y) * basis.values(i);
    return p;
}

// p(x, x, t) at every node.
template <class Backend>
ScalarField diag_heat_field(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 0.0, tolerance, "diag_heat");
    ScalarField p = ScalarField::Zero(basis.backend().node_count());
    for (std::size_t i = 0; i < basis.size(); ++i)
        p += std::exp(-basis.eigenvalue(i) * t) * basis.values(i).array().square().matrix();
    return p;
}

template <class Backend>
double diag_heat(const SpectralBasis<Backend>& basis, std::size_t x, double t, double tolerance = default_tail_tolerance) {
    return heat_kernel(basis, x, x, t, tolerance);
}

// d/dt p(x, x, t) = -sum lambda_i e^{-lambda_i t} phi_i(x)^2 at every node.
template <class Backend>
ScalarField diag_heat_time_derivative_field(const SpectralBasis<Backend>& basis, double t,
                                            double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 1.0, tolerance, "diag_heat_time_derivative");
    ScalarField p = ScalarField::Zero(basis.backend().node_count());
    for (std::size_t i = 0; i < basis.size(); ++i)
        p -= basis.eigenvalue(i) * std::exp(-basis.eigenvalue(i) * t) * basis.values(i).array().square().matrix();
    return p;
}

template <class Backend>
double diag_heat_time_derivative(const SpectralBasis<Backend>& basis, std::size_t x, double t,
                                 double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 1.0, tolerance, "diag_heat_time_derivative");
    double p = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double v = basis.backend().value_at(basis.mode(i), x);
        p -= basis.eigenvalue(i) * std::exp(-basis.eigenvalue(i) * t) * v * v;
    }
    return p;
}

// Delta_x p(x, y, t) restricted to y = x:
//   2 sum e^{-lambda t} (-lambda phi^2 + |grad phi|^2).
inline ScalarField diag_laplacian_field(const ModelBasis& basis, double t, double tolerance = default_tail_tolerance) {
    basis.truncation().require(t, 1.0, tolerance, "diag_laplacian");
    ScalarField out = ScalarField::Zero(basis.backend().node_count());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const double e = std::exp(-basis.eigenvalue(i) * t);
        ScalarField v = basis.values(i);
        CovectorField g = basis.backend().gradient(basis.mode(i));
        out += 2.0 * e * (-basis.eigenvalue(i) * v.array().square().matrix() + g.rowwise().squaredNorm());
    }
    return out;
}

inline double diag_laplacian(const ModelBasis& basis, std::size_t x, double t, double tolerance = default_tail_tolerance) {
    if (x >= basis.backend().node_count()) throw invalid_parameter("node index out of range");
    return diag_laplacian_field(basis, t, tolerance)(static_cast<Eigen::Index>(x));
}

// Truncated spectral embedding x -> (e^{-lambda_i t} phi_i(x))_{i=1..dims}.
// With all modes, its Euclidean pullback is g_t.
template <class Backend>
Eigen::MatrixXd diffusion_coordinates(const SpectralBasis<Backend>& basis, double t, std::size_t dims) {
    if (dims + 1 > basis.size()) throw invalid_parameter("not enough modes for the requested embedding dimension");
    Eigen::MatrixXd out(basis.backend().node_count(), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 1; i <= dims; ++i)
        out.col(static_cast<Eigen::Index>(i - 1)) = std::exp(-basis.eigenvalue(i) * t) * basis.values(i);
    return out;
}

namespace detail {

inline TrigMode combine_modes(const std::vector<const TrigMode*>& modes, const Eigen::VectorXd& c) {
    TrigMode out;
    for (std::size_t j = 0; j < modes.size(); ++j)
        for (const auto& term : modes[j]->terms) {
            auto it = std::find_if(out.terms.begin(), out.terms.end(),
                                   [&](const TrigTerm& o) { return o.frequency == term.frequency; });
            if (it == out.terms.end()) {
                out.terms.push_back({term.frequency, 0.0, 0.0});
                it = out.terms.end() - 1;
            }
            it->cos_coeff += c(static_cast<Eigen::Index>(j)) * term.cos_coeff;
            it->sin_coeff += c(static_cast<Eigen::Index>(j)) * term.sin_coeff;
        }
    return out;
}

inline Eigen::VectorXd combine_modes(const std::vector<const Eigen::VectorXd*>& modes, const Eigen::VectorXd& c) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(modes.front()->size());
    for (std::size_t j = 0; j < modes.size(); ++j) out += c(static_cast<Eigen::Index>(j)) * *modes[j];
    return out;
}

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Eigen::MatrixXd random_orthogonal(Eigen::Index m, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < m; ++i) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < m; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace detail

// Same spectral data with each cluster of (numerically) equal eigenvalues
// replaced by a random orthonormal recombination. Quantities that depend
// only on spectral projectors must not change.
template <class Backend>
SpectralBasis<Backend> remix_eigenspaces(const SpectralBasis<Backend>& basis, std::uint64_t seed, double rel_gap = 1e-10) {
    using Mode = typename Backend::Mode;
    std::mt19937_64 rng(seed);
    std::vector<Mode> modes;
    std::vector<double> lambdas = basis.eigenvalues();
    std::size_t i = 0;
    while (i < basis.size()) {
        std::size_t j = i + 1;
        while (j < basis.size() && basis.eigenvalue(j) - basis.eigenvalue(i) <= rel_gap * std::max(1.0, basis.eigenvalue(i))) ++j;
        const auto m = static_cast<Eigen::Index>(j - i);
        if (m == 1) {
            modes.push_back(basis.mode(i));
        } else {
            std::vector<const Mode*> block;
            for (std::size_t k = i; k < j; ++k) block.push_back(&basis.mode(k));
            const Eigen::MatrixXd q = detail::random_orthogonal(m, rng);
            for (Eigen::Index c = 0; c < m; ++c) modes.push_back(detail::combine_modes(block, q.col(c)));
        }
        i = j;
    }
    return SpectralBasis<Backend>(basis.backend_ptr(), std::move(lambdas), std::move(modes));
}

}  // namespace heatlens
