#pragma once

#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/spectral.hpp"
#include "heatlens/version.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace heatlens {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Plain sampled basis: eigenvalues and node samples, one row per mode.
struct BasisTable {
    std::vector<double> eigenvalues;
    RowMatrix samples;
    nlohmann::json sidecar;
};

template <class Backend>
BasisTable to_table(const SpectralBasis<Backend>& basis) {
    BasisTable t;
    t.eigenvalues = basis.eigenvalues();
    t.samples.resize(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.backend().node_count()));
    for (std::size_t i = 0; i < basis.size(); ++i) t.samples.row(static_cast<Eigen::Index>(i)) = basis.values(i).transpose();
    return t;
}

namespace detail {

inline void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little) throw format_error("binary tables are little-endian only");
}

// Layout: uint64 rows, uint64 cols, then rows * cols float64 row-major.
inline void write_matrix(std::ofstream& out, const RowMatrix& m) {
    std::uint64_t r = static_cast<std::uint64_t>(m.rows()), c = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&r), sizeof r);
    out.write(reinterpret_cast<const char*>(&c), sizeof c);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write '" + path + "'");
    return out;
}

}  // namespace detail

// Writes <prefix>.bin and the <prefix>.json sidecar.
// .bin layout: uint64 mode_count, uint64 node_count, mode_count float64
// eigenvalues, then mode_count x node_count float64 samples, row-major.
inline void export_table(const BasisTable& t, const std::string& prefix, nlohmann::json sidecar = nlohmann::json::object()) {
    detail::require_little_endian();
    auto out = detail::open_out(prefix + ".bin");
    std::uint64_t k = t.eigenvalues.size(), n = static_cast<std::uint64_t>(t.samples.cols());
    if (static_cast<std::uint64_t>(t.samples.rows()) != k) throw shape_error("sample rows must match the eigenvalue count");
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(t.eigenvalues.data()), static_cast<std::streamsize>(sizeof(double) * k));
    out.write(reinterpret_cast<const char*>(t.samples.data()), static_cast<std::streamsize>(sizeof(double) * t.samples.size()));
    if (!out) throw format_error("short write to '" + prefix + ".bin'");
    sidecar["format"] = "heatlens-basis";
    sidecar["version"] = version;
    sidecar["mode_count"] = k;
    sidecar["node_count"] = n;
    sidecar["dtype"] = "float64-le";
    std::ofstream js(prefix + ".json");
    js << sidecar.dump(2) << '\n';
}

template <class Backend>
void export_basis(const SpectralBasis<Backend>& basis, const std::string& prefix, nlohmann::json sidecar = nlohmann::json::object()) {
    export_table(to_table(basis), prefix, std::move(sidecar));
}

inline BasisTable import_basis(const std::string& prefix) {
    detail::require_little_endian();
    std::ifstream in(prefix + ".bin", std::ios::binary);
    if (!in) throw format_error("cannot read '" + prefix + ".bin'");
    std::uint64_t k = 0, n = 0;
    in.read(reinterpret_cast<char*>(&k), sizeof k);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || k == 0 || n == 0 || k > (1ull << 32) || n > (1ull << 32)) throw format_error("bad basis table header");
    BasisTable t;
    t.eigenvalues.resize(k);
    t.samples.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(t.eigenvalues.data()), static_cast<std::streamsize>(sizeof(double) * k));
    in.read(reinterpret_cast<char*>(t.samples.data()), static_cast<std::streamsize>(sizeof(double) * k * n));
    if (!in) throw format_error("truncated basis table");
    std::ifstream js(prefix + ".json");
    if (js) {
        try {
            t.sidecar = nlohmann::json::parse(js);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(std::string("bad basis sidecar: ") + e.what());
        }
        if (t.sidecar.value("mode_count", k) != k || t.sidecar.value("node_count", n) != n)
            throw format_error("basis sidecar disagrees with the binary header");
    }
    return t;
}

// Tensor field blob: uint64 node_count, uint64 component_count, then entries row-major.
inline void export_tensor(const TensorField& f, const std::string& path) {
    detail::require_little_endian();
    auto out = detail::open_out(path);
    detail::write_matrix(out, RowMatrix(f.entries));
}

inline RowMatrix import_tensor_entries(const std::string& path) {
    detail::require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot read '" + path + "'");
    std::uint64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof r);
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    if (!in || r > (1ull << 32) || c > 64) throw format_error("bad tensor blob header");
    RowMatrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * r * c));
    if (!in) throw format_error("truncated tensor blob");
    return m;
}

}  // namespace heatlens
