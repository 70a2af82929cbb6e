#pragma once

#include "heatlens/discrete_space.hpp"
#include "heatlens/error.hpp"
#include "heatlens/spaces.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <algorithm>
#include <cmath>

namespace heatlens {

// JSON form: {"variant": "circle" | "flat_torus" | "weighted_circle" | "mesh",
//             "lengths": [...], "phi_coefficients": {"cos": [a0, a1, ...], "sin": [b1, ...]},
//             "measure_scale": 1.0, "mesh_path": "...", "mesh_format": "off", "icosphere_level": 3}
// Field errors are reported with their JSON pointer.
struct SpaceDescriptor {
    std::string variant = "circle";
    std::vector<double> lengths;
    TrigSeries phi;
    double measure_scale = 1.0;
    std::string mesh_path;
    std::string mesh_format = "off";
    int icosphere_level = -1;
};

namespace detail {

inline double positive_number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) throw usage_error(path + ": expected a number");
    double v = j.get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw usage_error(path + ": must be positive and finite");
    return v;
}

inline std::vector<double> number_array(const nlohmann::json& j, const std::string& path, bool positive) {
    if (!j.is_array()) throw usage_error(path + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        if (positive) out.push_back(positive_number(j[i], p));
        else {
            if (!j[i].is_number()) throw usage_error(p + ": expected a number");
            out.push_back(j[i].get<double>());
            if (!std::isfinite(out.back())) throw usage_error(p + ": must be finite");
        }
    }
    return out;
}

}  // namespace detail

inline SpaceDescriptor parse_space_descriptor(const nlohmann::json& j, const std::string& path = "/space") {
    if (!j.is_object()) throw usage_error(path + ": expected an object");
    static const std::vector<std::string> known = {"variant", "lengths", "phi_coefficients", "measure_scale",
                                                   "mesh_path", "mesh_format", "icosphere_level"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw usage_error(path + "/" + it.key() + ": unknown field");
    SpaceDescriptor d;
    if (!j.contains("variant") || !j["variant"].is_string()) throw usage_error(path + "/variant: required string");
    d.variant = j["variant"].get<std::string>();
    if (d.variant != "circle" && d.variant != "flat_torus" && d.variant != "weighted_circle" && d.variant != "mesh")
        throw usage_error(path + "/variant: unknown variant '" + d.variant + "'");
    if (j.contains("measure_scale")) d.measure_scale = detail::positive_number(j["measure_scale"], path + "/measure_scale");
    if (d.variant == "mesh") {
        if (j.contains("mesh_path")) {
            if (!j["mesh_path"].is_string()) throw usage_error(path + "/mesh_path: expected a string");
            d.mesh_path = j["mesh_path"].get<std::string>();
        }
        if (j.contains("mesh_format")) {
            if (!j["mesh_format"].is_string()) throw usage_error(path + "/mesh_format: expected a string");
            d.mesh_format = j["mesh_format"].get<std::string>();
        }
        if (j.contains("icosphere_level")) {
            if (!j["icosphere_level"].is_number_integer() || j["icosphere_level"].get<int>() < 0)
                throw usage_error(path + "/icosphere_level: expected a nonnegative integer");
            d.icosphere_level = j["icosphere_level"].get<int>();
        }
        if (d.mesh_path.empty() == (d.icosphere_level < 0))
            throw usage_error(path + ": mesh needs exactly one of mesh_path or icosphere_level");
        return d;
    }
    if (!j.contains("lengths")) throw usage_error(path + "/lengths: required");
    d.lengths = detail::number_array(j["lengths"], path + "/lengths", true);
    if (d.lengths.empty()) throw usage_error(path + "/lengths: must not be empty");
    if (d.variant != "flat_torus" && d.lengths.size() != 1) throw usage_error(path + "/lengths: circle variants take one length");
    if (j.contains("phi_coefficients")) {
        if (d.variant != "weighted_circle") throw usage_error(path + "/phi_coefficients: only valid for weighted_circle");
        const auto& phi = j["phi_coefficients"];
        if (!phi.is_object()) throw usage_error(path + "/phi_coefficients: expected an object with cos and sin arrays");
        if (phi.contains("cos")) d.phi.cos_coeffs = detail::number_array(phi["cos"], path + "/phi_coefficients/cos", false);
        if (phi.contains("sin")) d.phi.sin_coeffs = detail::number_array(phi["sin"], path + "/phi_coefficients/sin", false);
    }
    return d;
}

inline nlohmann::json to_json(const SpaceDescriptor& d) {
    nlohmann::json j;
    j["variant"] = d.variant;
    j["measure_scale"] = d.measure_scale;
    if (d.variant == "mesh") {
        if (!d.mesh_path.empty()) {
            j["mesh_path"] = d.mesh_path;
            j["mesh_format"] = d.mesh_format;
        } else {
            j["icosphere_level"] = d.icosphere_level;
        }
        return j;
    }
    j["lengths"] = d.lengths;
    if (d.variant == "weighted_circle") j["phi_coefficients"] = {{"cos", d.phi.cos_coeffs}, {"sin", d.phi.sin_coeffs}};
    return j;
}

inline ModelSpace make_model_space(const SpaceDescriptor& d) {
    if (d.variant == "circle") return ModelSpace::circle(d.lengths.at(0), d.measure_scale);
    if (d.variant == "flat_torus") return ModelSpace::flat_torus(d.lengths, d.measure_scale);
    if (d.variant == "weighted_circle") return ModelSpace::weighted_circle(d.lengths.at(0), d.phi, d.measure_scale);
    throw invalid_parameter("descriptor does not describe a model space");
}

inline DiscreteSpace make_discrete_space(const SpaceDescriptor& d) {
    if (d.variant != "mesh") throw invalid_parameter("descriptor does not describe a mesh");
    DiscreteSpace s = d.icosphere_level >= 0 ? make_mesh_space(icosphere(d.icosphere_level))
                                             : load_mesh(d.mesh_path, parse_mesh_format(d.mesh_format));
    if (d.measure_scale != 1.0) {
        s.mass *= d.measure_scale;
        s.cell_weights *= d.measure_scale;
        s.stiffness *= d.measure_scale;
    }
    return s;
}

}  // namespace heatlens
