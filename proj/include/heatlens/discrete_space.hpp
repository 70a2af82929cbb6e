#pragma once

#include "heatlens/error.hpp"
#include "heatlens/mesh.hpp"
#include "heatlens/spaces.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace heatlens {

enum class DiscreteKind { triangle_mesh, periodic_path };

// Finite metric-measure space with a lumped mass and a symmetric stiffness
// matrix. Invariant: stiffness == gradientᵀ * diag(cell_weights ⊗ 1_ambient) * gradient.
struct DiscreteSpace {
    DiscreteKind kind = DiscreteKind::triangle_mesh;
    int ambient = 3;                          // coordinates per gradient vector
    Eigen::MatrixXd positions;                // node_count x ambient
    Eigen::VectorXd mass;                     // lumped, positive
    Eigen::SparseMatrix<double> stiffness;    // node_count x node_count
    Eigen::SparseMatrix<double> gradient;     // (cells * ambient) x node_count
    Eigen::VectorXd cell_weights;             // cells
    Eigen::MatrixX3i faces;                   // triangle_mesh only
    Eigen::MatrixXd frames;                   // triangle_mesh: node_count x 6, rows (e1, e2)
    std::vector<std::vector<std::pair<int, double>>> adjacency;  // edge graph
    double period = 0.0;                      // periodic_path: circle length
    std::optional<ModelSpace> source_model;   // periodic_path: the sampled circle
    SpaceMetadata metadata;

    std::size_t node_count() const { return static_cast<std::size_t>(mass.size()); }
    std::size_t cell_count() const { return static_cast<std::size_t>(cell_weights.size()); }
    double total_measure() const { return mass.sum(); }
};

enum class DistanceMethod { fast_marching, edge_graph };

namespace detail {

inline void edge_graph_from_pairs(DiscreteSpace& s, const std::vector<std::pair<int, int>>& edges) {
    s.adjacency.assign(s.node_count(), {});
    for (auto [a, b] : edges) {
        double len = (s.positions.row(a) - s.positions.row(b)).norm();
        if (s.kind == DiscreteKind::periodic_path) len = s.period / static_cast<double>(s.node_count());
        s.adjacency[a].push_back({b, len});
        s.adjacency[b].push_back({a, len});
    }
}

inline std::vector<double> dijkstra(const DiscreteSpace& s, int source, double cutoff) {
    std::vector<double> d(s.node_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    d[source] = 0.0;
    q.push({0.0, source});
    while (!q.empty()) {
        auto [dv, v] = q.top();
        q.pop();
        if (dv > d[v]) continue;
        if (dv > cutoff) break;
        for (auto [w, len] : s.adjacency[v]) {
            if (dv + len < d[w]) {
                d[w] = dv + len;
                q.push({d[w], w});
            }
        }
    }
    for (double& x : d)
        if (x > cutoff) x = std::numeric_limits<double>::infinity();
    return d;
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Triangle (a, b, c) laid out in the plane: a = 0, b on the +x axis, c above.
inline std::array<Eigen::Vector2d, 3> planar_layout(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                                    const Eigen::Vector3d& c) {
    Eigen::Vector3d u = b - a, w = c - a;
    double lu = u.norm();
    Eigen::Vector3d ex = u / lu;
    double cx = w.dot(ex);
    double cy = (w - cx * ex).norm();
    return {Eigen::Vector2d(0, 0), Eigen::Vector2d(lu, 0), Eigen::Vector2d(cx, cy)};
}

// Point-source update of the distance at c from known distances at a and b.
// The virtual source sits on the far side of ab; accepted only if the ray
// from it to c crosses the segment ab.
inline double virtual_source_update(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                    double da, double db) {
    auto p = planar_layout(a, b, c);
    const double e = p[1].x();
    const double sx = (da * da - db * db + e * e) / (2.0 * e);
    const double sy2 = da * da - sx * sx;
    if (sy2 < 0.0) return std::numeric_limits<double>::infinity();
    const Eigen::Vector2d src(sx, -std::sqrt(sy2));
    const Eigen::Vector2d& q = p[2];
    const double dy = q.y() - src.y();
    if (dy <= 0.0) return std::numeric_limits<double>::infinity();
    const double cross_x = src.x() + (q.x() - src.x()) * (-src.y()) / dy;
    if (cross_x < 0.0 || cross_x > e) return std::numeric_limits<double>::infinity();
    return (q - src).norm();
}

inline std::vector<std::vector<int>> vertex_faces(const DiscreteSpace& s) {
    std::vector<std::vector<int>> vf(s.node_count());
    for (Eigen::Index f = 0; f < s.faces.rows(); ++f)
        for (int k = 0; k < 3; ++k) vf[s.faces(f, k)].push_back(static_cast<int>(f));
    return vf;
}

inline std::vector<double> fast_marching(const DiscreteSpace& s, const std::vector<std::vector<int>>& vf, int source,
                                         double cutoff) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(s.node_count(), inf);
    std::vector<char> done(s.node_count(), 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    d[source] = 0.0;
    q.push({0.0, source});
    auto pos = [&](int i) { return Eigen::Vector3d(s.positions.row(i).transpose()); };
    while (!q.empty()) {
        auto [dv, v] = q.top();
        q.pop();
        if (done[v] || dv > d[v]) continue;
        if (dv > cutoff) break;
        done[v] = 1;
        for (int f : vf[v]) {
            int others[2], m = 0;
            for (int k = 0; k < 3; ++k)
                if (s.faces(f, k) != v) others[m++] = s.faces(f, k);
            for (int j = 0; j < 2; ++j) {
                int c = others[j], o = others[1 - j];
                if (done[c]) continue;
                double cand = dv + (pos(c) - pos(v)).norm();
                if (done[o]) cand = std::min(cand, virtual_source_update(pos(v), pos(o), pos(c), dv, d[o]));
                if (cand < d[c]) {
                    d[c] = cand;
                    q.push({cand, c});
                }
            }
        }
    }
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!done[i] || d[i] > cutoff) d[i] = inf;
    return d;
}

// Signed area of disk(0, r) ∩ triangle(0, a, b).
inline double disk_wedge_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double r) {
    auto sector = [r](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
        return 0.5 * r * r * std::atan2(cross2(u, v), u.dot(v));
    };
    const Eigen::Vector2d dvec = b - a;
    const double A = dvec.squaredNorm(), B = 2.0 * a.dot(dvec), C = a.squaredNorm() - r * r;
    const double disc = B * B - 4.0 * A * C;
    if (A == 0.0) return 0.0;
    if (disc <= 0.0) return sector(a, b);
    const double sq = std::sqrt(disc);
    const double t1 = (-B - sq) / (2.0 * A), t2 = (-B + sq) / (2.0 * A);
    if (t2 <= 0.0 || t1 >= 1.0) return sector(a, b);
    const Eigen::Vector2d p1 = a + std::max(t1, 0.0) * dvec, p2 = a + std::min(t2, 1.0) * dvec;
    double area = 0.5 * cross2(p1, p2);
    if (t1 > 0.0) area += sector(a, p1);
    if (t2 < 1.0) area += sector(p2, b);
    return area;
}

inline double disk_triangle_area(const std::array<Eigen::Vector2d, 3>& p, const Eigen::Vector2d& center, double r) {
    double a = 0.0;
    for (int k = 0; k < 3; ++k) a += disk_wedge_area(p[k] - center, p[(k + 1) % 3] - center, r);
    return std::abs(a);
}

// Area of {x in triangle : linear interpolant of d < r}.
inline double sublevel_triangle_area(const std::array<Eigen::Vector2d, 3>& p, const double d[3], double r) {
    std::vector<Eigen::Vector2d> poly;
    for (int k = 0; k < 3; ++k) {
        int l = (k + 1) % 3;
        bool in_k = d[k] < r, in_l = d[l] < r;
        if (in_k) poly.push_back(p[k]);
        if (in_k != in_l) {
            double t = (r - d[k]) / (d[l] - d[k]);
            poly.push_back(p[k] + t * (p[l] - p[k]));
        }
    }
    double a = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) a += cross2(poly[k], poly[(k + 1) % poly.size()]);
    return 0.5 * std::abs(a);
}

// Portion of a triangle within distance r of the source, given vertex
// distances. Uses the virtual point source consistent with all three
// distances; falls back to linear interpolation when none exists.
inline double face_ball_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                             const double d[3], double r) {
    auto p = planar_layout(a, b, c);
    const double full = 0.5 * std::abs(cross2(p[1], p[2]));
    if (d[0] < r && d[1] < r && d[2] < r) return full;
    Eigen::Matrix2d M;
    Eigen::Vector2d rhs;
    for (int k = 1; k < 3; ++k) {
        M.row(k - 1) = 2.0 * p[k].transpose();
        rhs(k - 1) = p[k].squaredNorm() - (d[k] * d[k] - d[0] * d[0]);
    }
    const double h = std::max({p[1].norm(), p[2].norm(), (p[2] - p[1]).norm()});
    if (std::abs(M.determinant()) > 1e-12 * h * h) {
        Eigen::Vector2d src = M.partialPivLu().solve(rhs);
        if (std::abs(src.norm() - d[0]) <= 0.05 * h) return std::min(full, disk_triangle_area(p, src, r));
    }
    return sublevel_triangle_area(p, d, r);
}

}  // namespace detail

// Distances from a node, set to +inf beyond cutoff. fast_marching needs faces.
inline std::vector<double> geodesic_distances(const DiscreteSpace& s, int source,
                                              double cutoff = std::numeric_limits<double>::infinity(),
                                              DistanceMethod method = DistanceMethod::fast_marching) {
    if (source < 0 || static_cast<std::size_t>(source) >= s.node_count())
        throw invalid_parameter("distance source outside the node range");
    if (method == DistanceMethod::fast_marching && s.kind == DiscreteKind::triangle_mesh)
        return detail::fast_marching(s, detail::vertex_faces(s), source, cutoff);
    return detail::dijkstra(s, source, cutoff);
}

namespace detail {

inline double path_ball_volume(const DiscreteSpace& s, int node, double r) {
    const double P = s.period;
    if (2.0 * r >= P) return s.cell_weights.sum();
    const std::size_t n = s.node_count();
    const double h = P / static_cast<double>(n);
    const double center = s.positions(node, 0);
    double vol = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double a = s.positions(static_cast<Eigen::Index>(j), 0);
        // Shift the cell so it is closest to the centre, then intersect intervals.
        double shift = std::round((center - (a + 0.5 * h)) / P) * P;
        double lo = std::max(a + shift, center - r), hi = std::min(a + shift + h, center + r);
        if (hi > lo) vol += s.cell_weights(static_cast<Eigen::Index>(j)) * (hi - lo) / h;
    }
    return vol;
}

}  // namespace detail

// Reusable helper: holds vertex-to-face incidence for repeated ball queries.
class MeshBallOracle {
public:
    explicit MeshBallOracle(const DiscreteSpace& s, DistanceMethod method = DistanceMethod::fast_marching)
        : space_(&s), method_(method) {
        if (s.kind == DiscreteKind::triangle_mesh) {
            vf_ = detail::vertex_faces(s);
            for (Eigen::Index f = 0; f < s.faces.rows(); ++f)
                for (int k = 0; k < 3; ++k)
                    hmax_ = std::max(hmax_, (s.positions.row(s.faces(f, k)) - s.positions.row(s.faces(f, (k + 1) % 3))).norm());
        }
    }

    double operator()(int node, double r) const { return volumes(node, std::vector<double>{r})[0]; }

    // m(B_r(node)) for several radii from one distance computation.
    std::vector<double> volumes(int node, const std::vector<double>& radii) const {
        const DiscreteSpace& s = *space_;
        if (node < 0 || static_cast<std::size_t>(node) >= s.node_count()) throw invalid_parameter("ball centre outside the node range");
        for (double r : radii)
            if (!(r > 0.0) || !std::isfinite(r)) throw invalid_parameter("ball radius must be positive and finite");
        std::vector<double> out(radii.size(), 0.0);
        if (s.kind == DiscreteKind::periodic_path) {
            for (std::size_t k = 0; k < radii.size(); ++k) out[k] = detail::path_ball_volume(s, node, radii[k]);
            return out;
        }
        const double rmax = *std::max_element(radii.begin(), radii.end());
        const double cutoff = rmax + 2.0 * hmax_;
        std::vector<double> d = method_ == DistanceMethod::fast_marching ? detail::fast_marching(s, vf_, node, cutoff)
                                                                         : detail::dijkstra(s, node, cutoff);
        std::vector<char> seen(s.faces.rows(), 0);
        for (std::size_t v = 0; v < d.size(); ++v) {
            if (!std::isfinite(d[v])) continue;
            for (int f : vf_[v]) {
                if (seen[f]) continue;
                seen[f] = 1;
                double df[3];
                bool finite = true;
                for (int k = 0; k < 3; ++k) {
                    df[k] = d[s.faces(f, k)];
                    finite = finite && std::isfinite(df[k]);
                }
                if (!finite) continue;
                Eigen::Vector3d a = s.positions.row(s.faces(f, 0)).transpose();
                Eigen::Vector3d b = s.positions.row(s.faces(f, 1)).transpose();
                Eigen::Vector3d c = s.positions.row(s.faces(f, 2)).transpose();
                for (std::size_t k = 0; k < radii.size(); ++k) {
                    const double r = radii[k];
                    if (std::min({df[0], df[1], df[2]}) >= r + hmax_) continue;
                    out[k] += method_ == DistanceMethod::fast_marching
                                  ? detail::face_ball_area(a, b, c, df, r)
                                  : detail::sublevel_triangle_area(detail::planar_layout(a, b, c), df, r);
                }
            }
        }
        return out;
    }

private:
    const DiscreteSpace* space_;
    DistanceMethod method_;
    std::vector<std::vector<int>> vf_;
    double hmax_ = 0.0;
};

inline double ball_volume(const DiscreteSpace& s, int node, double r,
                          DistanceMethod method = DistanceMethod::fast_marching) {
    return MeshBallOracle(s, method)(node, r);
}

namespace detail {

inline void validate_mesh(const TriangleMesh& m) {
    const Eigen::Index nv = m.vertices.rows(), nf = m.faces.rows();
    if (nv < 4 || nf < 4) throw ingestion_error("mesh needs at least 4 vertices and 4 faces");
    double diag = (m.vertices.colwise().maxCoeff() - m.vertices.colwise().minCoeff()).norm();
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    std::vector<int> uses(nv, 0);
    for (Eigen::Index f = 0; f < nf; ++f) {
        int a = m.faces(f, 0), b = m.faces(f, 1), c = m.faces(f, 2);
        for (int v : {a, b, c})
            if (v < 0 || v >= nv) throw ingestion_error("face " + std::to_string(f) + " references missing vertex " + std::to_string(v));
        Eigen::Vector3d n = (m.vertices.row(b) - m.vertices.row(a)).transpose().cross((m.vertices.row(c) - m.vertices.row(a)).transpose());
        if (a == b || b == c || a == c || 0.5 * n.norm() <= 1e-14 * diag * diag)
            throw ingestion_error("degenerate face " + std::to_string(f) + " (vertices " + std::to_string(a) + " " +
                                  std::to_string(b) + " " + std::to_string(c) + ")");
        for (int k = 0; k < 3; ++k) {
            int u = m.faces(f, k), w = m.faces(f, (k + 1) % 3);
            edge_faces[std::minmax(u, w)].push_back(static_cast<int>(f));
            ++uses[u];
        }
    }
    for (const auto& [e, fs] : edge_faces) {
        if (fs.size() == 1)
            throw ingestion_error("boundary edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) + "); closed surfaces only");
        if (fs.size() > 2)
            throw ingestion_error("non-manifold edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) + ") shared by " +
                                  std::to_string(fs.size()) + " faces");
    }
    for (Eigen::Index v = 0; v < nv; ++v)
        if (uses[v] == 0) throw ingestion_error("vertex " + std::to_string(v) + " is not used by any face");
    // Each vertex link must be a single cycle.
    std::vector<std::vector<int>> vf(nv);
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) vf[m.faces(f, k)].push_back(static_cast<int>(f));
    for (Eigen::Index v = 0; v < nv; ++v) {
        const auto& fs = vf[v];
        std::vector<char> reached(fs.size(), 0);
        std::vector<int> stack = {0};
        reached[0] = 1;
        std::size_t count = 1;
        auto shares_edge = [&](int f, int g) {
            int common = 0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) common += m.faces(f, i) == m.faces(g, j);
            return common >= 2;
        };
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < fs.size(); ++j)
                if (!reached[j] && shares_edge(fs[i], fs[j])) {
                    reached[j] = 1;
                    ++count;
                    stack.push_back(static_cast<int>(j));
                }
        }
        if (count != fs.size()) throw ingestion_error("non-manifold vertex " + std::to_string(v));
    }
}

}  // namespace detail

// Cotangent stiffness, lumped (barycentric) mass and per-face gradients of a
// closed manifold triangle mesh.
inline DiscreteSpace make_mesh_space(const TriangleMesh& m) {
    detail::validate_mesh(m);
    DiscreteSpace s;
    s.kind = DiscreteKind::triangle_mesh;
    s.ambient = 3;
    s.positions = m.vertices;
    s.faces = m.faces;
    const Eigen::Index nv = m.vertices.rows(), nf = m.faces.rows();
    s.mass = Eigen::VectorXd::Zero(nv);
    s.cell_weights.resize(nf);
    std::vector<Eigen::Triplet<double>> st, gt;
    Eigen::MatrixXd normals = Eigen::MatrixXd::Zero(nv, 3);
    std::vector<int> ref_face(nv, -1);
    std::vector<Eigen::Vector3d> face_normal(nf);
    for (Eigen::Index f = 0; f < nf; ++f) {
        int idx[3] = {m.faces(f, 0), m.faces(f, 1), m.faces(f, 2)};
        Eigen::Vector3d x[3];
        for (int k = 0; k < 3; ++k) x[k] = m.vertices.row(idx[k]).transpose();
        Eigen::Vector3d N = (x[1] - x[0]).cross(x[2] - x[0]);
        double area = 0.5 * N.norm();
        Eigen::Vector3d nh = N.normalized();
        face_normal[f] = nh;
        s.cell_weights(f) = area;
        for (int k = 0; k < 3; ++k) {
            s.mass(idx[k]) += area / 3.0;
            int i = idx[(k + 1) % 3], j = idx[(k + 2) % 3];
            Eigen::Vector3d u = x[(k + 1) % 3] - x[k], w = x[(k + 2) % 3] - x[k];
            double cot = u.dot(w) / u.cross(w).norm();
            st.emplace_back(i, j, -0.5 * cot);
            st.emplace_back(j, i, -0.5 * cot);
            st.emplace_back(i, i, 0.5 * cot);
            st.emplace_back(j, j, 0.5 * cot);
            // Gradient of the hat function at vertex k.
            Eigen::Vector3d g = nh.cross(x[(k + 2) % 3] - x[(k + 1) % 3]) / (2.0 * area);
            for (int c = 0; c < 3; ++c) gt.emplace_back(3 * f + c, idx[k], g(c));
        }
    }
    // Orient face normals consistently around each vertex before averaging.
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) {
            int v = m.faces(f, k);
            Eigen::Vector3d nh = face_normal[f];
            if (ref_face[v] < 0) ref_face[v] = static_cast<int>(f);
            else if (nh.dot(face_normal[ref_face[v]]) < 0) nh = -nh;
            normals.row(v) += s.cell_weights(f) * nh.transpose();
        }
    s.frames.resize(nv, 6);
    for (Eigen::Index v = 0; v < nv; ++v) {
        Eigen::Vector3d n = normals.row(v).transpose().normalized();
        Eigen::Index axis;
        n.cwiseAbs().minCoeff(&axis);
        Eigen::Vector3d seed = Eigen::Vector3d::Unit(axis);
        Eigen::Vector3d e1 = (seed - seed.dot(n) * n).normalized();
        Eigen::Vector3d e2 = n.cross(e1);
        s.frames.row(v) << e1.transpose(), e2.transpose();
    }
    s.stiffness.resize(nv, nv);
    s.stiffness.setFromTriplets(st.begin(), st.end());
    s.gradient.resize(3 * nf, nv);
    s.gradient.setFromTriplets(gt.begin(), gt.end());
    std::vector<std::pair<int, int>> edges;
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) edges.push_back(std::minmax(m.faces(f, k), m.faces(f, (k + 1) % 3)));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    detail::edge_graph_from_pairs(s, edges);

    s.metadata.n = 2;
    s.metadata.dimension_upper = 2.0;
    s.metadata.curvature_lower = std::numeric_limits<double>::quiet_NaN();  // not estimated on meshes
    auto d0 = detail::dijkstra(s, 0, std::numeric_limits<double>::infinity());
    int far = static_cast<int>(std::max_element(d0.begin(), d0.end()) - d0.begin());
    auto d1 = detail::dijkstra(s, far, std::numeric_limits<double>::infinity());
    s.metadata.diameter = *std::max_element(d1.begin(), d1.end());
    return s;
}

inline DiscreteSpace load_mesh(const std::string& path, MeshFormat format = MeshFormat::off) {
    return make_mesh_space(read_mesh(path, format));
}

// Periodic finite-volume discretization of a (weighted) circle with M nodes:
// node masses w(x_j) h, edge weights w(x_{j+1/2}) h, gradients (f_{j+1} - f_j) / h.
inline DiscreteSpace make_periodic_path(const ModelSpace& circle, std::size_t points) {
    if (circle.kind() == ModelKind::flat_torus) throw invalid_parameter("periodic path needs a circle variant");
    if (points < 3) throw invalid_parameter("periodic path needs at least 3 points");
    DiscreteSpace s;
    s.kind = DiscreteKind::periodic_path;
    s.ambient = 1;
    s.period = circle.lengths()[0];
    s.source_model = circle;
    const Eigen::Index n = static_cast<Eigen::Index>(points);
    const double h = s.period / static_cast<double>(points);
    s.positions.resize(n, 1);
    s.mass.resize(n);
    s.cell_weights.resize(n);
    std::vector<Eigen::Triplet<double>> gt;
    std::vector<std::pair<int, int>> edges;
    for (Eigen::Index j = 0; j < n; ++j) {
        double x = h * static_cast<double>(j);
        s.positions(j, 0) = x;
        s.mass(j) = circle.density(x) * h;
        s.cell_weights(j) = circle.density(x + 0.5 * h) * h;
        Eigen::Index next = (j + 1) % n;
        gt.emplace_back(j, next, 1.0 / h);
        gt.emplace_back(j, j, -1.0 / h);
        edges.emplace_back(static_cast<int>(j), static_cast<int>(next));
    }
    s.gradient.resize(n, n);
    s.gradient.setFromTriplets(gt.begin(), gt.end());
    s.stiffness = (s.gradient.transpose() * s.cell_weights.asDiagonal() * s.gradient).pruned();
    detail::edge_graph_from_pairs(s, edges);
    s.metadata = circle.metadata();
    return s;
}

}  // namespace heatlens
