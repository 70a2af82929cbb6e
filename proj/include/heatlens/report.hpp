#pragma once

#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/version.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace heatlens {

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Hash of the canonical (sorted-key, compact) serialization.
inline std::string config_hash(const nlohmann::json& resolved) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(resolved.dump())));
    return buf;
}

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return nlohmann::json(v).dump();
}

// Every document carries the toolkit version and the config hash.
inline void write_json(const std::filesystem::path& path, nlohmann::json doc, const std::string& hash) {
    doc["heatlens_version"] = version;
    doc["config_hash"] = hash;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

// CSV with a leading '# heatlens <version> config_hash=<hash>' line, a header
// row and LF line endings.
class CsvWriter {
public:
    using Cell = std::variant<double, std::string, long long>;

    CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), columns_(header.size()), path_(path.string()) {
        if (!out_) throw format_error("cannot write '" + path_ + "'");
        out_ << "# heatlens " << version << " config_hash=" << hash << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<Cell>& cells) {
        if (cells.size() != columns_) throw shape_error("csv row width differs from the header in '" + path_ + "'");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            std::visit([&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, double>) out_ << format_number(v);
                else out_ << v;
            }, cells[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t columns_;
    std::string path_;
};

// node index followed by the upper-triangle entries.
inline void export_tensor_csv(const TensorField& f, const std::filesystem::path& path, const std::string& hash) {
    std::vector<std::string> header = {"node"};
    for (int r = 0; r < f.dim; ++r)
        for (int s = r; s < f.dim; ++s) header.push_back("g_" + std::to_string(r) + std::to_string(s));
    CsvWriter csv(path, hash, header);
    for (std::size_t i = 0; i < f.node_count(); ++i) {
        std::vector<CsvWriter::Cell> row = {static_cast<long long>(i)};
        for (int r = 0; r < f.dim; ++r)
            for (int s = r; s < f.dim; ++s) row.emplace_back(f.entries(static_cast<Eigen::Index>(i), sym_index(r, s, f.dim)));
        csv.row(row);
    }
}

// Residual record as emitted by the operator checks.
inline nlohmann::json residual_record(const std::string& operation, const std::string& space, double t, std::size_t truncation,
                                      double lhs, double rhs, double residual, double tolerance, bool pass) {
    return {{"operation", operation}, {"space", space},         {"t", t},
            {"truncation", truncation}, {"lhs", lhs},           {"rhs", rhs},
            {"residual", residual},     {"tolerance", tolerance}, {"pass", pass}};
}

}  // namespace heatlens
