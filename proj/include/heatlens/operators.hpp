#pragma once

#include "heatlens/discrete_space.hpp"
#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/metric.hpp"
#include "heatlens/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace heatlens {

// Two sides of an identity evaluated by independent routes.
struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual() const { return std::abs(lhs - rhs); }
    double scale() const { return std::abs(lhs) + std::abs(rhs) + 1.0; }
    bool passes(double tolerance) const { return residual() <= tolerance * scale(); }
};

namespace detail {

template <class Backend>
void require_pointwise(const char* what) {
    if constexpr (!Backend::pointwise_calculus)
        throw capability_error(std::string(what) + " needs pointwise Hessians, which this backend does not provide");
}

}  // namespace detail

// <grad f1, grad f2> at every node.
inline ScalarField carre_du_champ(const ModelBackend& be, const ScalarField& f1, const ScalarField& f2) {
    return (be.gradient_of(f1).cwiseProduct(be.gradient_of(f2))).rowwise().sum();
}

// <Hess_f, eta1 ⊗ eta2> by polarization:
//   1/2 (<eta1, grad<grad f, eta2>> + <eta2, grad<grad f, eta1>> - <grad f, grad<eta1, eta2>>).
// Exact for closed eta (gradients or constant frame covectors).
inline ScalarField hessian_pairing(const ModelBackend& be, const ScalarField& f, const CovectorField& eta1,
                                   const CovectorField& eta2) {
    be.check(f);
    if (eta1.rows() != static_cast<Eigen::Index>(be.node_count()) || eta2.rows() != eta1.rows())
        throw shape_error("covector fields do not match the grid");
    const CovectorField df = be.gradient_of(f);
    auto pair = [](const CovectorField& a, const CovectorField& b) -> ScalarField { return a.cwiseProduct(b).rowwise().sum(); };
    const ScalarField a = pair(eta1, be.gradient_of(pair(df, eta2)));
    const ScalarField b = pair(eta2, be.gradient_of(pair(df, eta1)));
    const ScalarField c = pair(df, be.gradient_of(pair(eta1, eta2)));
    return 0.5 * (a + b - c);
}

// Hess_f in the coordinate frame, via polarization against frame covectors.
inline TensorField hessian(const ModelBackend& be, const ScalarField& f) {
    const int n = be.dim();
    TensorField h = make_tensor_field(n, be.weights());
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            h.entries.col(sym_index(i, j, n)) = hessian_pairing(be, f, be.frame_covector(i), be.frame_covector(j));
    return h;
}

// tr Hess_f = <Hess_f, g>.
inline ScalarField trace_hessian(const ModelBackend& be, const ScalarField& f) {
    return contract(hessian(be, f), be.canonical_metric());
}

template <class Backend>
TensorField hessian(const SpectralBasis<Backend>& basis, const ScalarField& f) {
    detail::require_pointwise<Backend>("hessian");
    if constexpr (Backend::pointwise_calculus) return hessian(basis.backend(), f);
}

// sum_i e^{-2 lambda_i t} (Hess phi_i - lambda_i phi_i g)(grad phi_i),
// equal to (1/4) grad_x [Delta_x p(x, x, 2t)].
template <class Backend>
CovectorField drift_field(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    detail::require_pointwise<Backend>("drift_field");
    if constexpr (Backend::pointwise_calculus) {
        basis.truncation().require(2.0 * t, 1.5, tolerance, "drift_field");
        const auto& be = basis.backend();
        const int n = be.dim();
        CovectorField out = CovectorField::Zero(be.node_count(), n);
        for (std::size_t i = 1; i < basis.size(); ++i) {
            const double lam = basis.eigenvalue(i);
            const double c = std::exp(-2.0 * lam * t);
            if (c == 0.0) continue;
            const CovectorField d = be.gradient(basis.mode(i));
            const Eigen::MatrixXd H = be.hessian(basis.mode(i));
            const ScalarField v = basis.values(i);
            for (int a = 0; a < n; ++a) {
                ScalarField col = -lam * v.cwiseProduct(d.col(a));
                for (int b = 0; b < n; ++b) col += H.col(sym_index(a, b, n)).cwiseProduct(d.col(b));
                out.col(a) += c * col;
            }
        }
        return out;
    }
}

// g_t and the drift at one time, reused across many operator applications.
struct HeatGeometry {
    double t = 0.0;
    TensorField metric;
    CovectorField drift;
};

template <class Backend>
HeatGeometry heat_geometry(const SpectralBasis<Backend>& basis, double t, double tolerance = default_tail_tolerance) {
    detail::require_pointwise<Backend>("heat_geometry");
    return HeatGeometry{t, pullback_metric(basis, t, tolerance), drift_field(basis, t, tolerance)};
}

// Delta^t f = <Hess_f, g_t> + (1/4) <grad_x Delta_x p(x, x, 2t), grad f>.
inline ScalarField delta_t(const ModelBackend& be, const HeatGeometry& geo, const ScalarField& f) {
    return contract(hessian(be, f), geo.metric) + be.gradient_of(f).cwiseProduct(geo.drift).rowwise().sum();
}

template <class Backend>
ScalarField delta_t(const SpectralBasis<Backend>& basis, const ScalarField& f, double t,
                    double tolerance = default_tail_tolerance) {
    detail::require_pointwise<Backend>("delta_t");
    if constexpr (Backend::pointwise_calculus) return delta_t(basis.backend(), heat_geometry(basis, t, tolerance), f);
}

// lhs = integral <g_t, d psi ⊗ d f> dm, rhs = -integral psi Delta^t f dm.
inline IdentityCheck ibp_check(const ModelBackend& be, const HeatGeometry& geo, const ScalarField& f, const ScalarField& psi) {
    be.check(f);
    be.check(psi);
    IdentityCheck r;
    r.lhs = be.integrate(contract(geo.metric, be.gradient_of(psi), be.gradient_of(f)));
    r.rhs = -be.integrate(psi.cwiseProduct(delta_t(be, geo, f)));
    return r;
}

template <class Backend>
IdentityCheck ibp_residual(const SpectralBasis<Backend>& basis, const ScalarField& f, const ScalarField& psi, double t,
                           double tolerance = default_tail_tolerance) {
    detail::require_pointwise<Backend>("ibp_residual");
    if constexpr (Backend::pointwise_calculus) return ibp_check(basis.backend(), heat_geometry(basis, t, tolerance), f, psi);
}

namespace detail {

// Kernel data at time t on the grid: P(x, y) and grad_x P(x, y) per axis.
struct KernelMatrices {
    Eigen::MatrixXd p;
    std::vector<Eigen::MatrixXd> grad;  // grad[a](x, y) = d/dx_a p(x, y, t)
};

inline KernelMatrices kernel_matrices(const ModelBasis& basis, double t) {
    const auto& be = basis.backend();
    const Eigen::Index N = static_cast<Eigen::Index>(be.node_count()), K = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd phi(N, K);
    std::vector<Eigen::MatrixXd> dphi(be.dim(), Eigen::MatrixXd(N, K));
    Eigen::VectorXd e(K);
    for (Eigen::Index i = 0; i < K; ++i) {
        phi.col(i) = basis.values(static_cast<std::size_t>(i));
        CovectorField d = be.gradient(basis.mode(static_cast<std::size_t>(i)));
        for (int a = 0; a < be.dim(); ++a) dphi[a].col(i) = d.col(a);
        e(i) = std::exp(-basis.eigenvalue(static_cast<std::size_t>(i)) * t);
    }
    KernelMatrices km;
    km.p = phi * e.asDiagonal() * phi.transpose();
    for (int a = 0; a < be.dim(); ++a) km.grad.push_back(dphi[a] * e.asDiagonal() * phi.transpose());
    return km;
}

inline ScalarField pair_fields(const CovectorField& a, const CovectorField& b) { return a.cwiseProduct(b).rowwise().sum(); }

}  // namespace detail

// Per-time data shared by the two heat-kernel identities.
struct KernelIdentityData {
    const ModelBasis* basis = nullptr;
    double t = 0.0;
    detail::KernelMatrices km;
    TensorField metric;
    ScalarField ddt;  // d/dt [p(x, x, 2t)]
    ScalarField lap;  // Delta_x p(x, x, 2t)
};

inline KernelIdentityData kernel_identity_data(const ModelBasis& basis, double t, double tolerance = default_tail_tolerance) {
    basis.truncation().require(2.0 * t, 1.0, tolerance, "kernel identities");
    KernelIdentityData d;
    d.basis = &basis;
    d.t = t;
    d.km = detail::kernel_matrices(basis, t);
    d.metric = pullback_metric(basis, t, tolerance);
    d.ddt = 2.0 * diag_heat_time_derivative_field(basis, 2.0 * t, tolerance);
    d.lap = diag_laplacian_field(basis, 2.0 * t, tolerance);
    return d;
}

namespace detail {

// grad_x p(., y, t) at every x for a fixed grid node y.
inline CovectorField kernel_gradient(const KernelIdentityData& d, Eigen::Index y) {
    CovectorField gp(d.km.p.rows(), static_cast<Eigen::Index>(d.km.grad.size()));
    for (std::size_t a = 0; a < d.km.grad.size(); ++a) gp.col(static_cast<Eigen::Index>(a)) = d.km.grad[a].col(y);
    return gp;
}

}  // namespace detail

// First heat-kernel identity behind the integration by parts formula:
//   lhs = ∫∫ psi(x) <grad_x p, grad_x <grad_x p, grad f>> dm(x) dm(y)
//   rhs = -∫ <g_t, df ⊗ dpsi> dm + 1/4 ∫ div(psi grad f) d/dt[p(x, x, 2t)] dm.
// The left side is a literal double quadrature over the grid; the y-sum is
// done first so one pass serves every psi.
inline std::vector<IdentityCheck> kernel_identity_first(const KernelIdentityData& d, const ScalarField& f,
                                                        const std::vector<ScalarField>& psis) {
    const auto& be = d.basis->backend();
    const CovectorField df = be.gradient_of(f);
    const Eigen::VectorXd& w = *be.weights();
    ScalarField inner = ScalarField::Zero(d.km.p.rows());
    for (Eigen::Index y = 0; y < d.km.p.rows(); ++y) {
        const CovectorField gp = detail::kernel_gradient(d, y);
        inner += w(y) * detail::pair_fields(gp, be.gradient_of(detail::pair_fields(gp, df)));
    }
    std::vector<IdentityCheck> out;
    for (const auto& psi : psis) {
        IdentityCheck r;
        r.lhs = be.integrate(psi.cwiseProduct(inner));
        const ScalarField div = be.divergence(psi.asDiagonal() * df);
        r.rhs = -be.integrate(contract(d.metric, df, be.gradient_of(psi))) + 0.25 * be.integrate(div.cwiseProduct(d.ddt));
        out.push_back(r);
    }
    return out;
}

// Second heat-kernel identity:
//   lhs = -1/2 ∫∫ psi(x) <grad f, grad_x |grad_x p|^2> dm(x) dm(y)
//   rhs = -1/4 ∫ div(psi grad f) d/dt[p(x, x, 2t)] dm + 1/4 ∫ div(psi grad f) Delta_x p(x, x, 2t) dm.
inline std::vector<IdentityCheck> kernel_identity_second(const KernelIdentityData& d, const ScalarField& f,
                                                         const std::vector<ScalarField>& psis) {
    const auto& be = d.basis->backend();
    const CovectorField df = be.gradient_of(f);
    const Eigen::VectorXd& w = *be.weights();
    ScalarField inner = ScalarField::Zero(d.km.p.rows());
    for (Eigen::Index y = 0; y < d.km.p.rows(); ++y) {
        const CovectorField gp = detail::kernel_gradient(d, y);
        inner += -0.5 * w(y) * detail::pair_fields(df, be.gradient_of(gp.rowwise().squaredNorm()));
    }
    std::vector<IdentityCheck> out;
    for (const auto& psi : psis) {
        IdentityCheck r;
        r.lhs = be.integrate(psi.cwiseProduct(inner));
        const ScalarField div = be.divergence(psi.asDiagonal() * df);
        r.rhs = -0.25 * be.integrate(div.cwiseProduct(d.ddt)) + 0.25 * be.integrate(div.cwiseProduct(d.lap));
        out.push_back(r);
    }
    return out;
}

inline IdentityCheck kernel_identity_first(const ModelBasis& basis, const ScalarField& f, const ScalarField& psi, double t,
                                           double tolerance = default_tail_tolerance) {
    return kernel_identity_first(kernel_identity_data(basis, t, tolerance), f, {psi}).front();
}

inline IdentityCheck kernel_identity_second(const ModelBasis& basis, const ScalarField& f, const ScalarField& psi, double t,
                                            double tolerance = default_tail_tolerance) {
    return kernel_identity_second(kernel_identity_data(basis, t, tolerance), f, {psi}).front();
}

// Relative L^2(m) residual of Delta f = tr Hess f for an eigenfunction,
// with Delta phi_i = -lambda_i phi_i from the Dirichlet form.
inline double trace_residual(const ModelBasis& basis, std::size_t i) {
    const auto& be = basis.backend();
    const ScalarField v = basis.values(i);
    const ScalarField lap = -basis.eigenvalue(i) * v;
    const ScalarField tr = trace_hessian(be, v);
    const double den = std::sqrt(be.integrate(lap.array().square().matrix()));
    const double num = std::sqrt(be.integrate((lap - tr).array().square().matrix()));
    if (den <= 1e-300) return num <= 1e-300 ? 0.0 : num;
    return num / den;
}

// Relative L^2(m) residual of Delta f = tr Hess f - <grad phi, grad f> on a
// periodic path discretization of a (weighted) circle. Delta comes from the
// discrete Dirichlet form; tr Hess from polarization with staggered
// differences against the unit frame; grad phi is analytic.
inline double witten_residual(const DiscreteSpace& path, const ScalarField& f) {
    if (path.kind != DiscreteKind::periodic_path || !path.source_model)
        throw invalid_parameter("witten_residual needs a periodic path discretization of a circle");
    if (static_cast<std::size_t>(f.size()) != path.node_count()) throw shape_error("field does not match the path");
    const auto& G = path.gradient;                    // nodes -> edges
    const Eigen::SparseMatrix<double> D = -Eigen::SparseMatrix<double>(G.transpose());  // edges -> nodes
    const Eigen::Index n = static_cast<Eigen::Index>(path.node_count());
    const ScalarField gf = G * f;
    // Constant fields: every term vanishes, but the assembled Laplacian keeps roundoff.
    if (gf.cwiseAbs().maxCoeff() <= 1e-14 * std::max(f.cwiseAbs().maxCoeff(), 1e-300)) return 0.0;
    const ScalarField lap = -(path.stiffness * f).cwiseQuotient(path.mass);
    const ScalarField e_edge = ScalarField::Ones(n), e_node = ScalarField::Ones(n);
    // Polarization with eta1 = eta2 = e: <e, grad<grad f, e>> twice minus <grad f, grad<e, e>>.
    const ScalarField first = e_node.cwiseProduct(D * gf.cwiseProduct(e_edge));
    const ScalarField third = ((G * e_node.cwiseProduct(e_node)).cwiseProduct(gf));
    ScalarField third_nodes(n);
    for (Eigen::Index j = 0; j < n; ++j) third_nodes(j) = 0.5 * (third(j) + third((j + n - 1) % n));
    const ScalarField tr = 0.5 * (2.0 * first - third_nodes);
    ScalarField drift(n);
    const auto& model = *path.source_model;
    for (Eigen::Index j = 0; j < n; ++j) {
        double dphi = model.log_density_derivative(path.positions(j, 0), 1);
        drift(j) = dphi * 0.5 * (gf(j) + gf((j + n - 1) % n));
    }
    const ScalarField r = lap - (tr - drift);
    const double num = std::sqrt(r.dot(path.mass.asDiagonal() * r));
    const double den = std::sqrt(lap.dot(path.mass.asDiagonal() * lap));
    if (den <= 1e-300 * std::max(1.0, std::sqrt(f.dot(path.mass.asDiagonal() * f)))) return num <= 1e-12 ? 0.0 : num;
    return num / den;
}

// Witten residual of the eigenfunction with index `mode` (>= 1) of a grid
// discretization with `grid_points` nodes. On a flat torus the drift term
// vanishes and the spectral trace residual on the default grid is returned.
inline double witten_residual(const ModelSpace& space, std::size_t grid_points, std::size_t mode) {
    if (mode == 0) throw invalid_parameter("mode index must be at least 1");
    if (space.kind() == ModelKind::flat_torus) {
        return trace_residual(compute_basis(space, mode + 1), mode);
    }
    auto path = std::make_shared<const DiscreteSpace>(make_periodic_path(space, grid_points));
    auto basis = compute_basis(path, mode + 1);
    return witten_residual(*path, basis.values(mode));
}

}  // namespace heatlens
