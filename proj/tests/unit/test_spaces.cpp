#include "heatlens/discrete_space.hpp"
#include "heatlens/mesh.hpp"
#include "heatlens/spaces.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>
#include <sstream>

using namespace heatlens;
using oracle::pi;

namespace {

ModelSpace cos_weighted(double a = 0.5) { return ModelSpace::weighted_circle(2 * pi, TrigSeries{{0.0, a}, {}}); }

}  // namespace

TEST(ModelSpace, CircleMeasureAndMetadata) {
    auto s = ModelSpace::circle(2 * pi);
    EXPECT_NEAR(s.total_measure(), 2 * pi, 1e-14);
    EXPECT_EQ(s.metadata().n, 1);
    EXPECT_NEAR(s.metadata().diameter, pi, 1e-15);
    EXPECT_LE(s.metadata().n, s.metadata().dimension_upper);
}

TEST(ModelSpace, FlatTorusMeasureIsProduct) {
    auto s = ModelSpace::flat_torus({2 * pi, 2 * pi});
    EXPECT_NEAR(s.total_measure(), 4 * pi * pi, 1e-12);
    EXPECT_EQ(s.metadata().n, 2);
    EXPECT_NEAR(s.metadata().diameter, 0.5 * std::sqrt(2.0) * 2 * pi, 1e-12);
}

TEST(ModelSpace, WeightedCircleMeasureMatchesQuadratureAndBessel) {
    auto s = cos_weighted();
    const double trap = oracle::periodic_trapezoid([](double x) { return std::exp(-0.5 * std::cos(x)); }, 0.0, 2 * pi);
    EXPECT_NEAR(s.total_measure(), trap, 1e-12 * trap);
    EXPECT_NEAR(trap, 2 * pi * boost::math::cyl_bessel_i(0, 0.5), 1e-12);
    EXPECT_GT(s.density(0.3), 0.0);
}

TEST(ModelSpace, InvalidParameters) {
    EXPECT_THROW(ModelSpace::circle(0.0), invalid_parameter);
    EXPECT_THROW(ModelSpace::circle(-1.0), invalid_parameter);
    EXPECT_THROW(ModelSpace::flat_torus({}), invalid_parameter);
    EXPECT_THROW(ModelSpace::flat_torus({1.0, -2.0}), invalid_parameter);
    EXPECT_THROW(ModelSpace::circle(1.0, 0.0), invalid_parameter);
}

TEST(BallVolume, CircleArc) {
    auto s = ModelSpace::circle(2 * pi);
    EXPECT_NEAR(ball_volume(s, 1.234, 0.3), 0.6, 1e-15);
    EXPECT_THROW(ball_volume(s, 0.0, 0.0), invalid_parameter);
    EXPECT_THROW(ball_volume(s, 0.0, -0.1), invalid_parameter);
}

TEST(BallVolume, FlatTorusEuclideanBelowHalfPeriod) {
    auto s2 = ModelSpace::flat_torus({2 * pi, 2 * pi});
    const double x[2] = {0.1, 0.2};
    EXPECT_NEAR(ball_volume(s2, x, 0.5), pi * 0.25, 1e-12 * pi * 0.25);
    for (double r : {0.1, 1.0, 3.0})
        EXPECT_NEAR(ball_volume(s2, x, r), pi * r * r, 1e-12 * pi * r * r);
    auto s3 = ModelSpace::flat_torus({2.0, 2.5, 3.0});
    const double y[3] = {0, 0, 0};
    for (double r : {0.2, 0.9})
        EXPECT_NEAR(ball_volume(s3, y, r), 4.0 / 3.0 * pi * r * r * r, 1e-12 * r * r * r);
}

TEST(BallVolume, TorusBeyondInjectivityRadiusMatchesGridCount) {
    // Ball of radius 0.7 on the torus [0,1]^2 overlaps itself; compare with a fine cell count.
    auto s = ModelSpace::flat_torus({1.0, 1.0});
    const double x[2] = {0, 0};
    const int M = 2000;
    long inside = 0;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            double a = (i + 0.5) / M, b = (j + 0.5) / M;
            a = std::min(a, 1 - a);
            b = std::min(b, 1 - b);
            inside += (a * a + b * b <= 0.49);
        }
    EXPECT_NEAR(ball_volume(s, x, 0.7), double(inside) / (double(M) * M), 2e-3);
}

TEST(BallVolume, WeightedCircleMatchesBesselOracle) {
    auto s = cos_weighted();
    EXPECT_NEAR(ball_volume(s, 0.0, 0.1), oracle::weighted_arc(0.5, 0.0, 0.1), 1e-13);
    for (double x : {0.0, 1.0, 2.5})
        for (double r : {0.05, 0.5, 2.0})
            EXPECT_NEAR(ball_volume(s, x, r), oracle::weighted_arc(0.5, x, r), 1e-12);
}

TEST(BallVolume, MonotoneAndSaturates) {
    for (const auto& s : {ModelSpace::circle(3.0), ModelSpace::flat_torus({1.0, 1.7}), cos_weighted()}) {
        std::vector<double> x(s.dimension(), 0.3);
        double prev = 0.0;
        for (double r = 0.01; r < 1.2 * s.metadata().diameter; r *= 1.3) {
            const double v = ball_volume(s, x.data(), r);
            EXPECT_GE(v, prev - 1e-12);
            prev = v;
        }
        EXPECT_NEAR(ball_volume(s, x.data(), s.metadata().diameter * 1.0001), s.total_measure(), 1e-9 * s.total_measure());
    }
}

TEST(QuadratureGrid, WeightsSumToMeasureAndIntegrateTrigExactly) {
    auto s = ModelSpace::flat_torus({2.0, 3.0});
    auto g = make_grid(s, 24);
    EXPECT_NEAR(g.weights.sum(), 6.0, 1e-12);
    // cos(2 pi (5 x / 2 + 7 y / 3))^2 integrates to 3 exactly: product orders stay below Nyquist.
    double v = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        double c = std::cos(2 * pi * (5 * g.nodes(i, 0) / 2.0 + 7 * g.nodes(i, 1) / 3.0));
        v += g.weights(i) * c * c;
    }
    EXPECT_NEAR(v, 3.0, 1e-12 * 3.0);
    EXPECT_THROW(make_grid(s, 1), invalid_parameter);
}

TEST(Mesh, OctahedronFromFile) {
    auto s = load_mesh(std::string(HEATLENS_TEST_DATA) + "/octahedron.off", MeshFormat::off);
    EXPECT_EQ(s.node_count(), 6u);
    EXPECT_EQ(s.cell_count(), 8u);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
    EXPECT_LE((s.stiffness * ones).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mesh, MassesPartitionArea) {
    const auto m = icosphere(4);
    const auto s = make_mesh_space(m);
    double area = 0.0;
    for (Eigen::Index f = 0; f < m.faces.rows(); ++f) {
        Eigen::Vector3d a = m.vertices.row(m.faces(f, 0)), b = m.vertices.row(m.faces(f, 1)), c = m.vertices.row(m.faces(f, 2));
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    EXPECT_NEAR(s.mass.sum(), area, 1e-12 * area);
    EXPECT_GT(s.mass.minCoeff(), 0.0);
    EXPECT_EQ(s.node_count(), 10u * 256u + 2u);
}

TEST(Mesh, StiffnessSymmetricPsdAndConsistentWithGradient) {
    const auto s = make_mesh_space(icosphere(2));
    const Eigen::MatrixXd S(s.stiffness);
    EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-14 * S.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * es.eigenvalues().cwiseAbs().maxCoeff());
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Eigen::VectorXd f(s.node_count());
    for (auto& v : f) v = nd(rng);
    const double form = f.dot(s.stiffness * f);
    const Eigen::VectorXd g = s.gradient * f;
    double cells = 0.0;
    for (std::size_t c = 0; c < s.cell_count(); ++c)
        cells += s.cell_weights(c) * g.segment(3 * c, 3).squaredNorm();
    EXPECT_NEAR(form, cells, 1e-10 * form);
}

TEST(Mesh, BallVolumeMatchesSphericalCap) {
    const auto s = make_mesh_space(icosphere(4));
    for (double r : {0.1, 0.2, 0.4}) {
        const double cap = 2 * pi * (1 - std::cos(r));
        EXPECT_NEAR(ball_volume(s, 0, r), cap, 0.01 * cap) << "r=" << r;
        // Edge paths zigzag, so graph distances overshoot and the ball comes out small.
        const double graph = ball_volume(s, 0, r, DistanceMethod::edge_graph);
        EXPECT_LE(graph, 1.01 * cap) << "r=" << r;
        EXPECT_GE(graph, 0.6 * cap) << "r=" << r;
    }
    EXPECT_THROW(ball_volume(s, 0, 0.0), invalid_parameter);
    EXPECT_NEAR(ball_volume(s, 5, 4.0), s.total_measure(), 1e-12);
}

TEST(Mesh, DegenerateFaceIsRejected) {
    // Closed tetrahedron whose face 0 has three collinear corners.
    std::istringstream in("OFF\n4 4 0\n0 0 0\n1 0 0\n2 0 0\n0 1 1\n3 0 1 2\n3 0 3 1\n3 1 3 2\n3 0 2 3\n");
    const auto m = read_off(in);
    try {
        make_mesh_space(m);
        FAIL() << "expected an ingestion error";
    } catch (const ingestion_error& e) {
        EXPECT_NE(std::string(e.what()).find("face 0"), std::string::npos) << e.what();
    }
}

TEST(Mesh, NonManifoldEdgeIsRejected) {
    // Three triangles share the edge (0, 1).
    std::istringstream in("OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\n3 0 1 2\n3 1 0 3\n3 0 1 4\n");
    EXPECT_THROW(make_mesh_space(read_off(in)), ingestion_error);
}

TEST(Mesh, OpenSurfaceIsRejected) {
    std::istringstream in("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    EXPECT_THROW(make_mesh_space(read_off(in)), ingestion_error);
}

TEST(Mesh, MalformedOffInput) {
    std::istringstream bad_header("PLY\n");
    EXPECT_THROW(read_off(bad_header), ingestion_error);
    std::istringstream quad("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    EXPECT_THROW(read_off(quad), ingestion_error);
    std::istringstream missing("OFF\n3 1 0\n0 0 0\n1 0 0\n3 0 1 2\n");
    EXPECT_THROW(read_off(missing), ingestion_error);
    EXPECT_THROW(read_mesh("/nonexistent/file.off"), ingestion_error);
}

TEST(Mesh, UnknownFormat) { EXPECT_THROW(parse_mesh_format("stl"), format_error); }

TEST(Mesh, OffRoundTrip) {
    const auto m = icosphere(1);
    std::stringstream io;
    write_off(io, m);
    const auto back = read_off(io);
    EXPECT_EQ(back.faces, m.faces);
    EXPECT_LE((back.vertices - m.vertices).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PeriodicPath, FormMatchesGradientAndMeasure) {
    const auto c = cos_weighted();
    const auto s = make_periodic_path(c, 256);
    EXPECT_NEAR(s.total_measure(), c.total_measure(), 1e-12 * c.total_measure());
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(256);
    EXPECT_LE((s.stiffness * ones).cwiseAbs().maxCoeff(), 1e-12);
    const auto u = make_periodic_path(ModelSpace::circle(2 * pi), 1000);
    EXPECT_NEAR(ball_volume(u, 3, 0.3), 0.6, 1e-12);
}
