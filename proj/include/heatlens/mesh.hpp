#pragma once

#include "heatlens/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace heatlens {

struct TriangleMesh {
    Eigen::MatrixX3d vertices;
    Eigen::MatrixX3i faces;
};

enum class MeshFormat { off };

inline MeshFormat parse_mesh_format(const std::string& name) {
    std::string s;
    for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "off" || s == ".off") return MeshFormat::off;
    throw format_error("unknown mesh format '" + name + "' (supported: off)");
}

namespace detail {

inline bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
}

}  // namespace detail

// ASCII OFF reader. Only triangles are accepted.
inline TriangleMesh read_off(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!detail::next_data_line(in, line, line_no)) throw ingestion_error("OFF: empty input");
    std::istringstream head(line);
    std::string magic;
    head >> magic;
    if (magic.rfind("OFF", 0) != 0) throw ingestion_error("OFF: missing OFF header on line " + std::to_string(line_no));
    long nv = -1, nf = -1, ne = 0;
    if (!(head >> nv >> nf)) {
        if (!detail::next_data_line(in, line, line_no)) throw ingestion_error("OFF: missing counts");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf)) throw ingestion_error("OFF: bad counts on line " + std::to_string(line_no));
        counts >> ne;
    }
    if (nv <= 0 || nf <= 0) throw ingestion_error("OFF: vertex and face counts must be positive");
    TriangleMesh m;
    m.vertices.resize(nv, 3);
    m.faces.resize(nf, 3);
    for (long i = 0; i < nv; ++i) {
        if (!detail::next_data_line(in, line, line_no))
            throw ingestion_error("OFF: expected " + std::to_string(nv) + " vertices, got " + std::to_string(i));
        std::istringstream s(line);
        double x, y, z;
        if (!(s >> x >> y >> z)) throw ingestion_error("OFF: bad vertex on line " + std::to_string(line_no));
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw ingestion_error("OFF: non-finite vertex " + std::to_string(i));
        m.vertices.row(i) << x, y, z;
    }
    for (long f = 0; f < nf; ++f) {
        if (!detail::next_data_line(in, line, line_no))
            throw ingestion_error("OFF: expected " + std::to_string(nf) + " faces, got " + std::to_string(f));
        std::istringstream s(line);
        int k;
        if (!(s >> k)) throw ingestion_error("OFF: bad face on line " + std::to_string(line_no));
        if (k != 3) throw ingestion_error("OFF: face " + std::to_string(f) + " has " + std::to_string(k) + " vertices; only triangles are supported");
        int a, b, c;
        if (!(s >> a >> b >> c)) throw ingestion_error("OFF: bad face on line " + std::to_string(line_no));
        for (int v : {a, b, c})
            if (v < 0 || v >= nv) throw ingestion_error("OFF: face " + std::to_string(f) + " references missing vertex " + std::to_string(v));
        m.faces.row(f) << a, b, c;
    }
    return m;
}

inline TriangleMesh read_mesh(const std::string& path, MeshFormat format = MeshFormat::off) {
    std::ifstream in(path);
    if (!in) throw ingestion_error("cannot open mesh file '" + path + "'");
    switch (format) {
        case MeshFormat::off: return read_off(in);
    }
    throw format_error("unsupported mesh format");
}

inline void write_off(std::ostream& out, const TriangleMesh& m) {
    out << "OFF\n" << m.vertices.rows() << ' ' << m.faces.rows() << " 0\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < m.vertices.rows(); ++i)
        out << m.vertices(i, 0) << ' ' << m.vertices(i, 1) << ' ' << m.vertices(i, 2) << '\n';
    for (Eigen::Index f = 0; f < m.faces.rows(); ++f)
        out << "3 " << m.faces(f, 0) << ' ' << m.faces(f, 1) << ' ' << m.faces(f, 2) << '\n';
}

inline TriangleMesh octahedron() {
    TriangleMesh m;
    m.vertices.resize(6, 3);
    m.vertices << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    m.faces.resize(8, 3);
    m.faces << 0, 2, 4, 2, 1, 4, 1, 3, 4, 3, 0, 4, 2, 0, 5, 1, 2, 5, 3, 1, 5, 0, 3, 5;
    return m;
}

// Unit icosphere: icosahedron with `level` rounds of 4-to-1 subdivision,
// new vertices projected to the sphere. Level L has 10 * 4^L + 2 vertices.
inline TriangleMesh icosphere(int level) {
    if (level < 0) throw invalid_parameter("icosphere level must be nonnegative");
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
                                      {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
                                      {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& x : v) x.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
                                         {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (auto [a, b, c] : f) {
            int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    TriangleMesh m;
    m.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    m.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i) m.faces.row(static_cast<Eigen::Index>(i)) << f[i][0], f[i][1], f[i][2];
    return m;
}

}  // namespace heatlens
