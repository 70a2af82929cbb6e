#include "heatlens/operators.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace heatlens;
using oracle::pi;

namespace {

ModelSpace cos_weighted(double a = 0.5) { return ModelSpace::weighted_circle(2 * pi, TrigSeries{{0.0, a}, {}}); }

template <class F>
ScalarField sample(const ModelBackend& be, F f) {
    const auto& x = be.grid().nodes;
    ScalarField out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = f(x.row(i));
    return out;
}

double sup(const ScalarField& f) { return f.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(CarreDuChamp, ClosedForms) {
    ModelBackend be(ModelSpace::circle(2 * pi), 64);
    const ScalarField s = sample(be, [](const auto& x) { return std::sin(x(0)); });
    const ScalarField c = sample(be, [](const auto& x) { return std::cos(x(0)); });
    const ScalarField ref = sample(be, [](const auto& x) { return -std::sin(x(0)) * std::cos(x(0)); });
    EXPECT_LE(sup(carre_du_champ(be, s, c) - ref), 1e-13);
    // |grad sin|^2 + |grad cos|^2 is identically 1.
    EXPECT_LE(sup((carre_du_champ(be, s, s) + carre_du_champ(be, c, c)).array() - 1.0), 1e-13);

    ModelBackend tb(ModelSpace::flat_torus({2 * pi, pi}), 32);
    const ScalarField f = sample(tb, [](const auto& x) { return std::sin(x(0)) * std::cos(2 * x(1)); });
    const ScalarField g = sample(tb, [](const auto& x) { return std::cos(4 * x(1)); });
    const ScalarField ref2 = sample(tb, [](const auto& x) {
        return -2 * std::sin(x(0)) * std::sin(2 * x(1)) * (-4 * std::sin(4 * x(1)));
    });
    EXPECT_LE(sup(carre_du_champ(tb, f, g) - ref2), 1e-12);
}

TEST(CarreDuChamp, LeibnizRule) {
    ModelBackend be(cos_weighted(), 96);
    const ScalarField f1 = sample(be, [](const auto& x) { return std::sin(2 * x(0)) + 0.3; });
    const ScalarField f2 = sample(be, [](const auto& x) { return std::cos(3 * x(0)); });
    const ScalarField h = sample(be, [](const auto& x) { return std::sin(x(0)) * std::cos(5 * x(0)); });
    const ScalarField lhs = carre_du_champ(be, f1.cwiseProduct(f2), h);
    const ScalarField rhs = f1.cwiseProduct(carre_du_champ(be, f2, h)) + f2.cwiseProduct(carre_du_champ(be, f1, h));
    EXPECT_LE(sup(lhs - rhs), 1e-9 * std::max(1.0, sup(lhs)));
}

TEST(Hessian, CircleCosine) {
    ModelBackend be(ModelSpace::circle(2 * pi), 64);
    const ScalarField c = sample(be, [](const auto& x) { return std::cos(x(0)); });
    const TensorField h = hessian(be, c);
    EXPECT_LE(sup(h.entries.col(0) + c), 1e-10);
    EXPECT_LE(sup(trace_hessian(be, c) + c), 1e-10);
}

TEST(Hessian, TorusMixedTerms) {
    ModelBackend be(ModelSpace::flat_torus({2 * pi, 2 * pi}), 32);
    const ScalarField f = sample(be, [](const auto& x) { return std::sin(x(0)) * std::cos(2 * x(1)); });
    const TensorField h = hessian(be, f);
    const ScalarField hxx = sample(be, [](const auto& x) { return -std::sin(x(0)) * std::cos(2 * x(1)); });
    const ScalarField hxy = sample(be, [](const auto& x) { return -2 * std::cos(x(0)) * std::sin(2 * x(1)); });
    const ScalarField hyy = sample(be, [](const auto& x) { return -4 * std::sin(x(0)) * std::cos(2 * x(1)); });
    EXPECT_LE(sup(h.entries.col(sym_index(0, 0, 2)) - hxx), 1e-10);
    EXPECT_LE(sup(h.entries.col(sym_index(0, 1, 2)) - hxy), 1e-10);
    EXPECT_LE(sup(h.entries.col(sym_index(1, 1, 2)) - hyy), 1e-10);
}

TEST(Hessian, Linearity) {
    ModelBackend be(ModelSpace::flat_torus({1.0, 2.0}), 32);
    const ScalarField f = sample(be, [](const auto& x) { return std::sin(2 * pi * x(0)) * std::cos(pi * x(1)); });
    const ScalarField g = sample(be, [](const auto& x) { return std::cos(4 * pi * x(0) + 2 * pi * x(1)); });
    const TensorField lhs = hessian(be, 2.5 * f - 0.5 * g);
    TensorField rhs = 2.5 * hessian(be, f);
    rhs.entries -= 0.5 * hessian(be, g).entries;
    EXPECT_LE(std::sqrt(hs_norm_squared(lhs - rhs).maxCoeff()), 1e-9 * std::sqrt(hs_norm_squared(lhs).maxCoeff()));
}

TEST(Hessian, FlatBochnerFormula) {
    // (1/2) Delta |grad f|^2 = |Hess f|^2 + <grad f, grad Delta f> on a flat torus.
    ModelBackend be(ModelSpace::flat_torus({2 * pi, 2 * pi}), 48);
    const ScalarField f = sample(be, [](const auto& x) { return std::sin(x(0) + 2 * x(1)) + 0.5 * std::cos(3 * x(0)); });
    const ScalarField lhs = 0.5 * trace_hessian(be, carre_du_champ(be, f, f));
    const ScalarField rhs = hs_norm_squared(hessian(be, f)) + carre_du_champ(be, f, trace_hessian(be, f));
    EXPECT_LE(sup(lhs - rhs), 1e-9 * sup(lhs));
}

TEST(Hessian, WeightedCircleIgnoresDensity) {
    ModelBackend be(cos_weighted(0.7), 64);
    const ScalarField f = sample(be, [](const auto& x) { return std::cos(2 * x(0)); });
    EXPECT_LE(sup(trace_hessian(be, f) + 4.0 * f), 1e-10);
}

TEST(Hessian, MeshRaisesCapabilityError) {
    const auto b = compute_basis(make_mesh_space(octahedron()), 4);
    EXPECT_THROW(hessian(b, b.values(1)), capability_error);
    EXPECT_THROW(drift_field(b, 1.0, 1.0), capability_error);
    EXPECT_THROW(delta_t(b, b.values(1), 1.0, 1.0), capability_error);
    EXPECT_THROW(ibp_residual(b, b.values(1), b.values(2), 1.0, 1.0), capability_error);
}

TEST(TraceResidual, FlatEigenfunctions) {
    for (const auto& s : {ModelSpace::circle(2 * pi), ModelSpace::flat_torus({1.0, 1.3})}) {
        const auto b = compute_basis(s, 21);
        for (std::size_t i = 1; i < 21; ++i) EXPECT_LE(trace_residual(b, i), 1e-8) << i;
        EXPECT_LE(trace_residual(b, 0), 1e-12);
    }
}

TEST(TraceResidual, WeightedCircleDetectsDrift) {
    // For the weighted Laplacian Delta f = f'' - phi' f', so the residual is |phi' f'| / |lambda f|.
    const auto s = cos_weighted();
    const auto b = compute_basis(s, 8);
    const auto& be = b.backend();
    for (std::size_t i = 1; i < 4; ++i) {
        const ScalarField v = b.values(i);
        const ScalarField pf = be.gradient_of(v).col(0).cwiseProduct(be.log_density_gradient().col(0));
        const double ref = std::sqrt(be.integrate(pf.array().square().matrix())) / b.eigenvalue(i);
        EXPECT_NEAR(trace_residual(b, i), ref, 1e-8 * ref);
        EXPECT_GT(trace_residual(b, i), 0.1);
    }
}

TEST(Drift, VanishesOnHomogeneousSpaces) {
    for (const auto& s : {ModelSpace::circle(2 * pi), ModelSpace::flat_torus({2 * pi, 3.0})}) {
        const auto b = compute_basis(s, default_mode_count(s, 0.05));
        const CovectorField d = drift_field(b, 0.05);
        const double scale = pullback_metric(b, 0.05).entries.cwiseAbs().maxCoeff();
        EXPECT_LE(d.cwiseAbs().maxCoeff(), 1e-10 * scale);
    }
}

TEST(Drift, WeightedCircleMatchesFiniteDifferences) {
    // drift = (1/4) d/dx [Delta D], D(x) = p(x, x, 2t), Delta u = u'' - phi' u', by pointwise kernel evaluation.
    const auto s = cos_weighted();
    const double t = 0.05;
    const auto b = compute_basis(s, default_mode_count(s, t));
    const CovectorField d = drift_field(b, t);
    auto D = [&](double x) { return heat_kernel_at(b, &x, &x, 2 * t); };
    const double h = 1e-3, h2 = 1e-2;
    auto E = [&](double x) {
        const double d1 = (D(x + h) - D(x - h)) / (2 * h);
        const double d2 = (D(x + h) - 2 * D(x) + D(x - h)) / (h * h);
        return d2 - s.log_density_derivative(x, 1) * d1;
    };
    const auto& nodes = b.backend().grid().nodes;
    double worst = 0.0;
    const double scale = d.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < nodes.rows(); i += 7) {
        const double x = nodes(i, 0);
        const double ref = 0.25 * (-E(x + 2 * h2) + 8 * E(x + h2) - 8 * E(x - h2) + E(x - 2 * h2)) / (12 * h2);
        worst = std::max(worst, std::abs(d(i, 0) - ref));
    }
    EXPECT_GT(scale, 1e-3);
    EXPECT_LE(worst, 1e-4 * scale);
}

TEST(DeltaT, CircleIsScaledSecondDerivative) {
    const auto s = ModelSpace::circle(2 * pi);
    const auto b = compute_basis(s, default_mode_count(s, 0.02));
    for (double t : {0.02, 0.2}) {
        const double gt = oracle::circle_metric(t, 400);
        const ScalarField f = b.values(5);  // frequency 3
        EXPECT_LE(sup(delta_t(b, f, t) + 9.0 * gt * f), 1e-10 * 9.0 * gt * sup(f));
    }
}

TEST(DeltaT, KillsConstants) {
    const auto s = cos_weighted();
    const auto b = compute_basis(s, default_mode_count(s, 0.05));
    const ScalarField one = ScalarField::Ones(b.backend().node_count());
    EXPECT_LE(sup(delta_t(b, one, 0.05)), 1e-10);
}

TEST(Ibp, ModelSpacesAtTightTolerance) {
    for (const auto& s : {ModelSpace::circle(2 * pi), ModelSpace::flat_torus({2 * pi, 2 * pi})}) {
        const double t = 0.05;
        const auto b = compute_basis(s, default_mode_count(s, t));
        const HeatGeometry geo = heat_geometry(b, t);
        for (std::size_t i : {1u, 3u, 6u})
            for (std::size_t j : {2u, 3u, 8u}) {
                const auto r = ibp_check(b.backend(), geo, b.values(i), b.values(j));
                EXPECT_TRUE(r.passes(1e-10)) << i << " " << j << " residual " << r.residual();
            }
    }
}

TEST(Ibp, ConstantTestFunction) {
    const auto s = cos_weighted();
    const auto b = compute_basis(s, default_mode_count(s, 0.05));
    const ScalarField one = ScalarField::Ones(b.backend().node_count());
    const auto r = ibp_residual(b, b.values(3), one, 0.05);
    EXPECT_NEAR(r.lhs, 0.0, 1e-12);
    EXPECT_NEAR(r.rhs, 0.0, 1e-8);
}

TEST(Ibp, WeightedCircleNonEigenfunctions) {
    const auto s = cos_weighted();
    const double t = 0.05;
    const auto b = compute_basis(s, default_mode_count(s, t));
    const auto& be = b.backend();
    const ScalarField f = sample(be, [](const auto& x) { return std::sin(2 * x(0)) + 0.2 * std::cos(x(0)); });
    const ScalarField psi = sample(be, [](const auto& x) { return std::cos(3 * x(0)); });
    const auto r = ibp_residual(b, f, psi, t);
    EXPECT_GT(std::abs(r.lhs), 1e-3);
    EXPECT_TRUE(r.passes(1e-6)) << r.residual();
}

TEST(Enrichment, EnergyDecreasesWithTime) {
    // integral g_t(df, df) dm is a sum of nonnegative terms times e^{-2 lambda t}.
    const auto s = cos_weighted(0.8);
    const auto b = compute_basis(s, default_mode_count(s, 0.01));
    const auto& be = b.backend();
    const ScalarField f = sample(be, [](const auto& x) { return std::sin(x(0)) + std::cos(4 * x(0)); });
    const CovectorField df = be.gradient_of(f);
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.01, 0.02, 0.05, 0.1, 0.5}) {
        const double e = be.integrate(contract(pullback_metric(b, t), df, df));
        EXPECT_GE(e, 0.0);
        EXPECT_LT(e, prev);
        prev = e;
    }
}

TEST(KernelIdentities, CircleAndWeightedCircle) {
    for (const auto& s : {ModelSpace::circle(2 * pi), cos_weighted()}) {
        const double t = 0.05;
        const auto b = compute_basis(s, default_mode_count(s, t));
        const auto& be = b.backend();
        const ScalarField f = sample(be, [](const auto& x) { return std::sin(2 * x(0)) + 0.5 * std::cos(x(0)); });
        const std::vector<ScalarField> psis = {b.values(1), b.values(4),
                                               sample(be, [](const auto& x) { return std::cos(3 * x(0)); })};
        const auto data = kernel_identity_data(b, t);
        const auto first = kernel_identity_first(data, f, psis);
        const auto second = kernel_identity_second(data, f, psis);
        ASSERT_EQ(first.size(), 3u);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_TRUE(first[k].passes(1e-10)) << first[k].residual();
            EXPECT_TRUE(second[k].passes(1e-10)) << second[k].residual();
        }
        EXPECT_GT(std::abs(first[0].lhs), 1e-3);
        const auto single = kernel_identity_first(b, f, psis[0], t);
        EXPECT_NEAR(single.lhs, first[0].lhs, 1e-12 * std::abs(first[0].lhs));
    }
}

TEST(Witten, ConstantFieldHasZeroResidual) {
    const auto path = make_periodic_path(cos_weighted(), 512);
    EXPECT_EQ(witten_residual(path, ScalarField::Constant(512, 2.0)), 0.0);
}

TEST(Witten, ConvergesUnderRefinement) {
    const auto s = cos_weighted();
    for (std::size_t mode = 1; mode <= 3; ++mode) {
        const double coarse = witten_residual(s, 1024, mode);
        const double fine = witten_residual(s, 2048, mode);
        EXPECT_LT(fine, coarse / 3.0) << mode;
        EXPECT_LT(fine, 1e-3);
    }
}

TEST(Witten, Errors) {
    EXPECT_THROW(witten_residual(cos_weighted(), 256, 0), invalid_parameter);
    const auto mesh = make_mesh_space(octahedron());
    EXPECT_THROW(witten_residual(mesh, ScalarField::Ones(6)), invalid_parameter);
    const auto path = make_periodic_path(cos_weighted(), 64);
    EXPECT_THROW(witten_residual(path, ScalarField::Ones(63)), shape_error);
}

TEST(Witten, FlatTorusUsesTraceResidual) {
    const auto s = ModelSpace::flat_torus({2 * pi, 2 * pi});
    EXPECT_LE(witten_residual(s, 2048, 3), 1e-8);
}
