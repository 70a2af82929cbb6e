#include "heatlens/diagnostics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace heatlens;
using oracle::pi;

namespace {

ModelSpace cos_weighted(double a = 0.5) { return ModelSpace::weighted_circle(2 * pi, TrigSeries{{0.0, a}, {}}); }

std::vector<double> geometric(double hi, double lo, std::size_t count) {
    std::vector<double> r;
    for (std::size_t k = 0; k < count; ++k) r.push_back(hi * std::pow(lo / hi, double(k) / double(count - 1)));
    return r;
}

ModelBackend backend(const ModelSpace& s, std::size_t points = 64) { return ModelBackend(s, points); }

double max_rel_theta_error(const ModelBackend& be, const DensityEstimate& d) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d.theta.size(); ++i) {
        const double ref = be.space().density(be.grid().nodes(i, 0));
        worst = std::max(worst, std::abs(d.theta(i) - ref) / ref);
    }
    return worst;
}

}  // namespace

TEST(LineFit, ExactLine) {
    const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    EXPECT_NEAR(loglog_slope({1, 10, 100}, {2, 200, 20000}), 2.0, 1e-12);
}

TEST(VolumeDensity, FlatTorusIsConstantOne) {
    const auto be = backend(ModelSpace::flat_torus({2 * pi, 2 * pi}), 16);
    const auto d = volume_density(be, 2, geometric(0.5, 0.05, 5));
    EXPECT_LE(d.coefficient_of_variation, 1e-8);
    EXPECT_NEAR(d.mean, 1.0, 1e-12);
    EXPECT_EQ(d.points_used, 5u);
}

TEST(VolumeDensity, WeightedCircleRecoversDensity) {
    const auto be = backend(cos_weighted());
    const auto d = volume_density(be, 1, geometric(0.05, 0.005, 7));
    EXPECT_LE(max_rel_theta_error(be, d), 1e-3);
    EXPECT_GT(d.coefficient_of_variation, 0.1);
}

TEST(VolumeDensity, ExtrapolationImprovesUnderRefinement) {
    const auto be = backend(cos_weighted());
    const double coarse = max_rel_theta_error(be, volume_density(be, 1, geometric(0.8, 0.08, 7)));
    const double fine = max_rel_theta_error(be, volume_density(be, 1, geometric(0.2, 0.02, 7)));
    EXPECT_LT(fine, coarse);
}

TEST(VolumeDensity, MeasureScaleMultipliesTheta) {
    const auto a = volume_density(backend(ModelSpace::circle(2 * pi)), 1, geometric(0.5, 0.05, 4));
    const auto b = volume_density(backend(ModelSpace::circle(2 * pi, 3.0)), 1, geometric(0.5, 0.05, 4));
    EXPECT_NEAR(b.mean, 3.0 * a.mean, 1e-12);
    EXPECT_NEAR(b.coefficient_of_variation, a.coefficient_of_variation, 1e-12);
}

TEST(VolumeDensity, IcosphereNearOne) {
    auto space = std::make_shared<const DiscreteSpace>(make_mesh_space(icosphere(5)));
    DiscreteBackend be(space);
    const auto d = volume_density(be, 2, geometric(0.4, 0.1, 4));
    EXPECT_NEAR(d.mean, 1.0, 0.02);
    EXPECT_LE(d.theta.maxCoeff(), 1.02);
    EXPECT_GE(d.theta.minCoeff(), 0.98);
}

TEST(VolumeDensity, RadiusGridValidation) {
    const auto be = backend(ModelSpace::circle(2 * pi));
    EXPECT_THROW(volume_density(be, 1, {0.2, 0.1}), invalid_parameter);
    EXPECT_THROW(volume_density(be, 1, {0.1, 0.2, 0.05}), invalid_parameter);
    EXPECT_THROW(volume_density(be, 1, {0.3, 0.3, 0.1}), invalid_parameter);
    EXPECT_THROW(volume_density(be, 1, {2.0, 0.2, 0.1}), invalid_parameter);
    EXPECT_THROW(volume_density(be, 1, {0.3, 0.2, -0.1}), invalid_parameter);
}

TEST(Noncollapse, CircleArcsGiveTwo) {
    const auto be = backend(ModelSpace::circle(2 * pi));
    EXPECT_NEAR(noncollapse_constant(be, 1, geometric(1.5, 0.01, 9)), 2.0, 1e-12);
}

TEST(Noncollapse, ThinToriDecreaseAndMatchStripArea) {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto be = backend(ModelSpace::flat_torus({2 * pi, 2 * pi * eps}), 16);
        const auto p = noncollapse_profile(be, 2, geometric(1.0, 0.02, 8));
        EXPECT_LT(p.constant, prev) << eps;
        prev = p.constant;
        const double strip = 2.0 * 2 * pi * eps;
        EXPECT_NEAR(p.min_ratio.front(), strip, 0.25 * strip) << eps;
        EXPECT_GE(p.constant, 0.0);
    }
}

TEST(Noncollapse, DimensionMismatchShowsInRadiusScaling) {
    // Too small an n: m(B_r) / r^n ~ r^{true - n} -> 0 as the grid refines.
    const auto torus = backend(ModelSpace::flat_torus({2 * pi, 2 * pi}), 16);
    const double coarse = noncollapse_constant(torus, 1, geometric(1.0, 0.1, 4));
    const double fine = noncollapse_constant(torus, 1, geometric(1.0, 0.001, 7));
    EXPECT_LT(fine, 0.02 * coarse);
    // Too large an n: the ratio diverges as r -> 0, visible as a negative slope.
    const auto circle = backend(ModelSpace::circle(2 * pi));
    const auto p = noncollapse_profile(circle, 2, geometric(1.0, 0.01, 5));
    EXPECT_NEAR(p.slope, -1.0, 1e-10);
}

TEST(EstimateDimension, ModelSpaces) {
    EXPECT_NEAR(estimate_dimension(backend(ModelSpace::circle(2 * pi)), geometric(0.5, 0.01, 5)), 1.0, 1e-10);
    EXPECT_NEAR(estimate_dimension(backend(ModelSpace::flat_torus({2 * pi, 2 * pi}), 16), geometric(0.5, 0.01, 5)), 2.0, 1e-10);
}

TEST(Classify, Verdicts) {
    const auto r = geometric(0.5, 0.05, 5);
    {
        const auto b = compute_basis(ModelSpace::circle(2 * pi), 41);
        const auto rep = classify(b, 1, r);
        EXPECT_EQ(rep.verdict, Verdict::consistent_with_noncollapsed);
        for (double v : rep.trace_residuals) EXPECT_LE(v, 1e-8);
        EXPECT_EQ(rep.modes.size(), 20u);
        EXPECT_TRUE(rep.density_ok);
    }
    {
        const auto b = compute_basis(ModelSpace::flat_torus({2 * pi, 2 * pi}), 41);
        EXPECT_EQ(classify(b, 2, r).verdict, Verdict::consistent_with_noncollapsed);
    }
    {
        const auto b = compute_basis(cos_weighted(), 41);
        const auto rep = classify(b, 1, r);
        EXPECT_EQ(rep.verdict, Verdict::collapsed_or_weighted);
        EXPECT_FALSE(rep.trace_ok);
        EXPECT_FALSE(rep.density_ok);
        EXPECT_TRUE(rep.noncollapse_ok);
        for (double v : rep.trace_residuals) EXPECT_GT(v, 1e-2);
    }
}

TEST(Classify, WeightedResidualMatchesDriftNorm) {
    // Delta f - tr Hess f = -<grad phi, grad f>, so the relative residual is |phi' f'| / (lambda |f|).
    const auto b = compute_basis(cos_weighted(), 41);
    const auto& be = b.backend();
    const auto rep = classify(b, 1, geometric(0.5, 0.05, 5));
    for (std::size_t k = 0; k < rep.modes.size(); ++k) {
        const std::size_t i = rep.modes[k];
        const ScalarField pf = be.gradient_of(b.values(i)).col(0).cwiseProduct(be.log_density_gradient().col(0));
        const double ref = std::sqrt(be.integrate(pf.array().square().matrix())) / b.eigenvalue(i);
        EXPECT_NEAR(rep.trace_residuals[k], ref, 1e-8 * ref) << i;
    }
}

TEST(Classify, InvariantUnderMeasureScaling) {
    const auto r = geometric(0.5, 0.05, 5);
    for (double a : {0.0, 0.5}) {
        const auto one = classify(compute_basis(ModelSpace::weighted_circle(2 * pi, TrigSeries{{0.0, a}, {}}), 30), 1, r);
        const auto three = classify(compute_basis(ModelSpace::weighted_circle(2 * pi, TrigSeries{{0.0, a}, {}}, 3.0), 30), 1, r);
        EXPECT_EQ(one.verdict, three.verdict);
        ASSERT_EQ(one.trace_residuals.size(), three.trace_residuals.size());
        for (std::size_t k = 0; k < one.trace_residuals.size(); ++k)
            EXPECT_NEAR(one.trace_residuals[k], three.trace_residuals[k], 1e-10 + 1e-8 * one.trace_residuals[k]);
        EXPECT_NEAR(one.density.coefficient_of_variation, three.density.coefficient_of_variation, 1e-10);
        EXPECT_NEAR(three.noncollapse.constant, 3.0 * one.noncollapse.constant, 1e-10 * three.noncollapse.constant);
    }
}

TEST(Classify, HausdorffOrthogonalityOnFlatSpaces) {
    const auto r = geometric(0.5, 0.05, 5);
    for (const auto& s : {ModelSpace::circle(2 * pi), ModelSpace::flat_torus({2 * pi, 3.0})}) {
        const auto rep = classify(compute_basis(s, 30), s.dimension(), r);
        for (double v : rep.hausdorff_pairings) EXPECT_LE(v, 1e-8);
    }
}

TEST(Classify, FailedSelfCheckIsInconclusive) {
    ClassificationThresholds th;
    th.orthonormality = -1.0;
    const auto rep = classify(compute_basis(ModelSpace::circle(2 * pi), 21), 1, geometric(0.5, 0.05, 5), th);
    EXPECT_EQ(rep.verdict, Verdict::inconclusive);
    EXPECT_FALSE(rep.notes.empty());
}

TEST(Classify, DecideIsPure) {
    ClassificationReport r;
    r.self_checks_ok = true;
    r.trace_ok = r.noncollapse_ok = r.density_ok = true;
    EXPECT_EQ(decide(r), Verdict::consistent_with_noncollapsed);
    r.density_ok = false;
    EXPECT_EQ(decide(r), Verdict::collapsed_or_weighted);
    r.self_checks_ok = false;
    EXPECT_EQ(decide(r), Verdict::inconclusive);
    EXPECT_EQ(to_string(Verdict::collapsed_or_weighted), "collapsed-or-weighted");
}

TEST(Classify, MeshRaisesCapabilityError) {
    const auto b = compute_basis(make_mesh_space(icosphere(1)), 10);
    EXPECT_THROW(classify(b, 2, geometric(0.3, 0.1, 3)), capability_error);
}

TEST(SpectrumChecks, SupNormConstant) {
    // Circle modes are cos(kx)/sqrt(pi): C = max_k (1/sqrt(pi)) / k^{1/2} at k = 1.
    const auto b = compute_basis(ModelSpace::circle(2 * pi), 21);
    EXPECT_NEAR(supnorm_constant(b), 1.0 / std::sqrt(pi), 1e-12);
    // Least squares through the origin of lambda_i against i^2 over (1, 1): 5/17.
    EXPECT_NEAR(weyl_fit(compute_basis(ModelSpace::circle(2 * pi), 3)), 5.0 / 17.0, 1e-12);
}

TEST(ConvergenceStudy, CircleSlopesAndLimit) {
    const auto s = ModelSpace::circle(2 * pi);
    const auto b = compute_basis(s, default_mode_count(s, 1e-3));
    const std::vector<double> ts = {0.1, 0.03, 0.01, 3e-3, 1e-3};
    const auto study = convergence_study(b, ts, {1.0, 2.0});
    ASSERT_EQ(study.points.size(), ts.size());
    EXPECT_NEAR(study.slope_sup_diag, 1.0, 0.05);
    for (const auto& pt : study.points) {
        EXPECT_LE(pt.hs_ball.at(2.0), 1e-6 * study.c_n);
        EXPECT_LE(pt.hs_bgg.at(1.0), 1e-6 * study.c_n);
        EXPECT_NEAR(pt.sup_diag, pt.t / std::sqrt(4 * pi), 1e-12 * pt.t);
        EXPECT_FALSE(pt.out_of_regime);
    }
}

TEST(ConvergenceStudy, FlagsAndDrops) {
    const auto s = ModelSpace::circle(2 * pi);
    const auto b = compute_basis(s, 41);
    const auto study = convergence_study(b, {20.0, 0.1, 1e-4}, {2.0});
    ASSERT_EQ(study.points.size(), 2u);
    EXPECT_TRUE(study.points[0].out_of_regime);
    EXPECT_FALSE(study.points[1].out_of_regime);
    ASSERT_EQ(study.warnings.size(), 1u);
    EXPECT_NE(study.warnings[0].find("t=0.0001"), std::string::npos);
    EXPECT_THROW(convergence_study(b, {}, {2.0}), invalid_parameter);
    EXPECT_THROW(convergence_study(b, {0.1}, {}), invalid_parameter);
    EXPECT_THROW(convergence_study(b, {-0.1}, {2.0}), invalid_parameter);
}

TEST(ConvergenceStudy, WeightedCircleDensityCorrection) {
    // With theta = e^{-phi}, the Gaussian normalization converges to c_1 theta^{-1} g.
    const auto s = cos_weighted();
    const auto b = compute_basis(s, default_mode_count(s, 1e-3));
    const auto study = convergence_study(b, {1e-2, 3e-3, 1e-3}, {2.0});
    EXPECT_LT(study.points[2].hs_bgg.at(2.0), study.points[0].hs_bgg.at(2.0));
    EXPECT_LT(study.points[2].hs_ball.at(2.0), study.points[0].hs_ball.at(2.0));
    EXPECT_GT(study.slope_hs_ball.at(2.0), 0.5);
}
