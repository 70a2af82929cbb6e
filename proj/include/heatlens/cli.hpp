#pragma once

#include "heatlens/basis_io.hpp"
#include "heatlens/diagnostics.hpp"
#include "heatlens/error.hpp"
#include "heatlens/metric.hpp"
#include "heatlens/operators.hpp"
#include "heatlens/report.hpp"
#include "heatlens/space_json.hpp"
#include "heatlens/spectral.hpp"
#include "heatlens/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace heatlens::cli {

enum ExitCode : int { ok = 0, assertion_failed = 1, usage = 2, capability = 3, solver = 4 };

struct Thresholds {
    ClassificationThresholds classify;
    std::optional<double> tail_tolerance;  // unset: 1e-10 on model spaces, 1e-2 on meshes
    std::optional<double> ibp;             // unset: 1e-10, or 1e-6 with a Galerkin basis
    double trace_identity = 1e-8;
    double witten = 1e-3;
    double witten_shrink = 3.0;
    double metric_invariance = 1e-12;
    double homogeneity = 1e-10;
};

struct ExperimentConfig {
    SpaceDescriptor space;
    std::size_t mode_count = 0;   // 0: derived from the smallest t
    std::size_t grid_points = 0;  // model spaces, per axis; 0: automatic
    int n = 0;                    // 0: from the space metadata
    std::vector<double> t_grid = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    std::vector<double> r_grid;   // empty: derived from the diameter
    std::vector<double> p_list = {1.0, 2.0};
    Thresholds thresholds;
    std::size_t ibp_modes = 12;
    std::vector<std::size_t> witten_grids = {2048, 4096};
    std::size_t witten_modes = 5;
    std::string output_dir = "heatlens-out";
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path, const std::vector<std::string>& known) {
    if (!j.is_object()) throw usage_error(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw usage_error((path.empty() ? "" : path) + "/" + it.key() + ": unknown field");
}

inline std::size_t count_field(const nlohmann::json& j, const std::string& path, bool allow_zero) {
    if (!j.is_number_integer() || j.get<long long>() < (allow_zero ? 0 : 1))
        throw usage_error(path + (allow_zero ? ": expected a nonnegative integer" : ": expected a positive integer"));
    return j.get<std::size_t>();
}

inline double tolerance_field(const nlohmann::json& j, const std::string& path) {
    return heatlens::detail::positive_number(j, path);
}

inline std::vector<double> positive_list(const nlohmann::json& j, const std::string& path) {
    auto v = heatlens::detail::number_array(j, path, true);
    if (v.empty()) throw usage_error(path + ": must not be empty");
    return v;
}

}  // namespace detail

// Schema validation; every error names the offending JSON pointer.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::check_keys(j, "", {"space", "mode_count", "grid_points", "n", "t_grid", "r_grid", "p_list", "thresholds", "ibp",
                               "witten", "output_dir", "seed"});
    ExperimentConfig c;
    if (!j.contains("space")) throw usage_error("/space: required");
    c.space = parse_space_descriptor(j["space"], "/space");
    if (j.contains("mode_count")) c.mode_count = detail::count_field(j["mode_count"], "/mode_count", true);
    if (j.contains("grid_points")) c.grid_points = detail::count_field(j["grid_points"], "/grid_points", true);
    if (j.contains("n")) c.n = static_cast<int>(detail::count_field(j["n"], "/n", true));
    if (j.contains("t_grid")) c.t_grid = detail::positive_list(j["t_grid"], "/t_grid");
    if (j.contains("r_grid")) c.r_grid = detail::positive_list(j["r_grid"], "/r_grid");
    if (j.contains("p_list")) {
        c.p_list = detail::positive_list(j["p_list"], "/p_list");
        for (std::size_t i = 0; i < c.p_list.size(); ++i)
            if (c.p_list[i] < 1.0) throw usage_error("/p_list/" + std::to_string(i) + ": exponent must be at least 1");
    }
    if (j.contains("thresholds")) {
        const auto& t = j["thresholds"];
        detail::check_keys(t, "/thresholds", {"trace_residual", "density_cv", "collapse_slope", "orthonormality", "modes_checked",
                                              "tail_tolerance", "ibp", "trace_identity", "witten", "witten_shrink",
                                              "metric_invariance", "homogeneity"});
        auto num = [&](const char* key, double& out) {
            if (t.contains(key)) out = detail::tolerance_field(t[key], std::string("/thresholds/") + key);
        };
        auto opt = [&](const char* key, std::optional<double>& out) {
            if (t.contains(key) && !t[key].is_null()) out = detail::tolerance_field(t[key], std::string("/thresholds/") + key);
        };
        num("trace_residual", c.thresholds.classify.trace_residual);
        num("density_cv", c.thresholds.classify.density_cv);
        num("collapse_slope", c.thresholds.classify.collapse_slope);
        num("orthonormality", c.thresholds.classify.orthonormality);
        if (t.contains("modes_checked"))
            c.thresholds.classify.modes_checked = detail::count_field(t["modes_checked"], "/thresholds/modes_checked", false);
        opt("tail_tolerance", c.thresholds.tail_tolerance);
        opt("ibp", c.thresholds.ibp);
        num("trace_identity", c.thresholds.trace_identity);
        num("witten", c.thresholds.witten);
        num("witten_shrink", c.thresholds.witten_shrink);
        num("metric_invariance", c.thresholds.metric_invariance);
        num("homogeneity", c.thresholds.homogeneity);
    }
    if (j.contains("ibp")) {
        detail::check_keys(j["ibp"], "/ibp", {"modes"});
        if (j["ibp"].contains("modes")) c.ibp_modes = detail::count_field(j["ibp"]["modes"], "/ibp/modes", false);
    }
    if (j.contains("witten")) {
        const auto& w = j["witten"];
        detail::check_keys(w, "/witten", {"grids", "modes"});
        if (w.contains("grids")) {
            if (!w["grids"].is_array() || w["grids"].empty()) throw usage_error("/witten/grids: expected a nonempty array");
            c.witten_grids.clear();
            for (std::size_t i = 0; i < w["grids"].size(); ++i) {
                const std::string p = "/witten/grids/" + std::to_string(i);
                std::size_t g = detail::count_field(w["grids"][i], p, false);
                if (g < 8) throw usage_error(p + ": grid needs at least 8 points");
                if (!c.witten_grids.empty() && g <= c.witten_grids.back()) throw usage_error(p + ": grids must increase");
                c.witten_grids.push_back(g);
            }
        }
        if (w.contains("modes")) c.witten_modes = detail::count_field(w["modes"], "/witten/modes", false);
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string() || j["output_dir"].get<std::string>().empty())
            throw usage_error("/output_dir: expected a nonempty string");
        c.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("seed")) {
        const auto& v = j["seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw usage_error("/seed: expected a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    return c;
}

inline bool is_mesh(const ExperimentConfig& c) { return c.space.variant == "mesh"; }

inline double tail_tolerance(const ExperimentConfig& c) {
    return c.thresholds.tail_tolerance.value_or(is_mesh(c) ? 1e-2 : default_tail_tolerance);
}

inline double ibp_tolerance(const ExperimentConfig& c) {
    return c.thresholds.ibp.value_or(c.space.variant == "weighted_circle" ? 1e-6 : 1e-10);
}

inline double min_t(const ExperimentConfig& c) { return *std::min_element(c.t_grid.begin(), c.t_grid.end()); }

// Mode count for a mesh from the Weyl law: keep eigenvalues up to
// lambda* with lambda* 2 t_min = 3 - log(tol), capped below the vertex count.
inline std::size_t mesh_mode_count(const DiscreteSpace& s, double t_min, double tol) {
    const double lam = (3.0 - std::log(tol)) / (2.0 * t_min);
    const double k = s.total_measure() * lam / (4.0 * std::numbers::pi);
    return static_cast<std::size_t>(std::clamp<double>(std::ceil(k), 16.0, static_cast<double>(s.node_count() - 1)));
}

// Resolved configuration: every default made explicit. The output directory
// is reported but excluded from the hash so relocating a run keeps its hash.
inline nlohmann::json resolved_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["space"] = to_json(c.space);
    j["mode_count"] = c.mode_count;
    j["grid_points"] = c.grid_points;
    j["n"] = c.n;
    j["t_grid"] = c.t_grid;
    j["r_grid"] = c.r_grid;
    j["p_list"] = c.p_list;
    const auto& th = c.thresholds;
    j["thresholds"] = {{"trace_residual", th.classify.trace_residual},
                       {"density_cv", th.classify.density_cv},
                       {"collapse_slope", th.classify.collapse_slope},
                       {"orthonormality", th.classify.orthonormality},
                       {"modes_checked", th.classify.modes_checked},
                       {"tail_tolerance", tail_tolerance(c)},
                       {"ibp", ibp_tolerance(c)},
                       {"trace_identity", th.trace_identity},
                       {"witten", th.witten},
                       {"witten_shrink", th.witten_shrink},
                       {"metric_invariance", th.metric_invariance},
                       {"homogeneity", th.homogeneity}};
    j["ibp"] = {{"modes", c.ibp_modes}};
    j["witten"] = {{"grids", c.witten_grids}, {"modes", c.witten_modes}};
    j["seed"] = c.seed;
    return j;
}

// Collected pass/fail checks of one subcommand.
class Assertions {
public:
    void add(const std::string& name, double value, double tolerance, bool pass) {
        records_.push_back({{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", pass}});
        all_ &= pass;
    }
    bool all_passed() const { return all_; }
    const nlohmann::json& json() const { return records_; }

private:
    nlohmann::json records_ = nlohmann::json::array();
    bool all_ = true;
};

// Shared state of one run: resolved config, hash, output directory, log.
struct RunContext {
    ExperimentConfig config;
    nlohmann::json resolved;
    std::string hash;
    std::filesystem::path out;
    std::ostream* log = &std::cerr;

    std::filesystem::path file(const std::string& name) const { return out / name; }
};

namespace detail {

inline std::vector<double> sorted_descending(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

// max over nodes of |A - B|_HS(x) / |B|_HS(x).
inline double max_relative_node_difference(const TensorField& a, const TensorField& b) {
    require_same_grid(a, b);
    const ScalarField num = hs_norm_squared(a - b).cwiseSqrt();
    const ScalarField den = hs_norm_squared(b).cwiseSqrt();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < num.size(); ++i) worst = std::max(worst, den(i) > 0 ? num(i) / den(i) : num(i));
    return worst;
}

}  // namespace detail

// ---- subcommands ------------------------------------------------------------

template <class Basis>
int run_spectrum(const RunContext& ctx, const Basis& basis) {
    const auto& be = basis.backend();
    Assertions checks;
    const double orth = orthonormality_error(basis, std::min<std::size_t>(basis.size(), 64));
    checks.add("orthonormality", orth, 1e-8, orth <= 1e-8);
    const double lam0 = std::abs(basis.eigenvalue(0));
    const double lam_scale = std::max(1.0, basis.size() > 1 ? basis.eigenvalue(1) : 1.0);
    checks.add("lambda0_zero", lam0, 1e-10 * lam_scale, lam0 <= 1e-10 * lam_scale);
    const double c0 = 1.0 / std::sqrt(be.total_measure());
    const double phi0_dev = (basis.values(0).array() - c0).abs().maxCoeff() / c0;
    checks.add("phi0_constant", phi0_dev, 1e-10, phi0_dev <= 1e-10);
    bool sorted = std::is_sorted(basis.eigenvalues().begin(), basis.eigenvalues().end());
    checks.add("eigenvalues_sorted", sorted ? 0.0 : 1.0, 0.0, sorted);
    const double weyl = basis.size() > 1 ? weyl_fit(basis) : std::numeric_limits<double>::quiet_NaN();
    checks.add("weyl_constant_positive", weyl, 0.0, weyl > 0.0);
    const double sup_c = supnorm_constant(basis);

    nlohmann::json tails = nlohmann::json::array();
    for (double t : ctx.config.t_grid)
        tails.push_back({{"t", t}, {"heat_kernel", basis.truncation().tail_bound(t, 0.0)},
                         {"metric", basis.truncation().tail_bound(2.0 * t, 1.0)}});
    nlohmann::json doc = {{"command", "spectrum"},
                          {"space", ctx.resolved["space"]},
                          {"mode_count", basis.size()},
                          {"node_count", be.node_count()},
                          {"eigenvalues", basis.eigenvalues()},
                          {"weyl_constant", weyl},
                          {"supnorm_constant", sup_c},
                          {"orthonormality_error", orth},
                          {"truncation", tails},
                          {"assertions", checks.json()},
                          {"pass", checks.all_passed()}};
    write_json(ctx.file("spectrum.json"), doc, ctx.hash);
    CsvWriter csv(ctx.file("spectrum.csv"), ctx.hash, {"index", "lambda", "weyl_fit"});
    const double N = be.metadata().dimension_upper;
    for (std::size_t i = 0; i < basis.size(); ++i)
        csv.row({static_cast<long long>(i), basis.eigenvalue(i), weyl * std::pow(static_cast<double>(i), 2.0 / N)});
    export_basis(basis, ctx.file("basis").string(),
                 {{"space", ctx.resolved["space"]}, {"config_hash", ctx.hash}});
    return checks.all_passed() ? ok : assertion_failed;
}

template <class Basis>
int run_metric(const RunContext& ctx, const Basis& basis) {
    using Backend = std::decay_t<decltype(basis.backend())>;
    const auto& be = basis.backend();
    const double tol = tail_tolerance(ctx.config);
    const int n = be.metadata().n;
    const double cn = constants(n).c;
    bool homogeneous = false;
    if constexpr (Backend::pointwise_calculus) homogeneous = !be.space().weighted();
    Assertions checks;
    nlohmann::json per_t = nlohmann::json::array();
    const auto remixed = remix_eigenspaces(basis, ctx.config.seed);
    for (std::size_t k = 0; k < ctx.config.t_grid.size(); ++k) {
        const double t = ctx.config.t_grid[k];
        const TensorField g = pullback_metric(basis, t, tol);
        double min_eig = std::numeric_limits<double>::infinity(), max_eig = 0.0;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.at(i), Eigen::EigenvaluesOnly);
            min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
            max_eig = std::max(max_eig, es.eigenvalues().maxCoeff());
        }
        const std::string tag = "t[" + std::to_string(k) + "]";
        checks.add("psd " + tag, min_eig, -1e-12 * max_eig, min_eig >= -1e-12 * max_eig);
        nlohmann::json rec = {{"t", t}, {"min_eigenvalue", min_eig}, {"max_eigenvalue", max_eig}};
        if (homogeneous) {
            double spread = 0.0;
            for (Eigen::Index c = 0; c < g.entries.cols(); ++c)
                spread = std::max(spread, g.entries.col(c).maxCoeff() - g.entries.col(c).minCoeff());
            spread /= std::max(max_eig, 1e-300);
            rec["homogeneity_spread"] = spread;
            checks.add("homogeneous " + tag, spread, ctx.config.thresholds.homogeneity, spread <= ctx.config.thresholds.homogeneity);
        }
        if constexpr (Backend::pointwise_calculus) {
            // Remixing is exact only for model bases, whose eigenvalue clusters are exactly degenerate.
            const TensorField g2 = pullback_metric(remixed, t, tol);
            const double change = detail::max_relative_node_difference(g2, g);
            rec["remix_change"] = change;
            checks.add("remix_invariant " + tag, change, ctx.config.thresholds.metric_invariance,
                       change <= ctx.config.thresholds.metric_invariance);
        }
        const TensorField target = cn * be.canonical_metric();
        const TensorField bgg = rescaled_bgg(basis, t, tol);
        rec["bgg_max_relative_deviation"] = detail::max_relative_node_difference(bgg, target);
        rec["hs_bgg"] = hs_distance(bgg, target, 2.0);
        per_t.push_back(rec);
        export_tensor_csv(g, ctx.file("metric_t" + std::to_string(k) + ".csv"), ctx.hash);
        export_tensor(g, ctx.file("metric_t" + std::to_string(k) + ".bin").string());
    }
    nlohmann::json doc = {{"command", "metric"}, {"space", ctx.resolved["space"]}, {"mode_count", basis.size()},
                          {"n", n}, {"c_n", cn}, {"times", per_t},
                          {"assertions", checks.json()}, {"pass", checks.all_passed()}};
    write_json(ctx.file("metric.json"), doc, ctx.hash);
    return checks.all_passed() ? ok : assertion_failed;
}

template <class Basis>
int run_converge(const RunContext& ctx, const Basis& basis) {
    using Backend = std::decay_t<decltype(basis.backend())>;
    const auto& be = basis.backend();
    const auto t_grid = detail::sorted_descending(ctx.config.t_grid);
    const auto study = convergence_study(basis, t_grid, ctx.config.p_list, tail_tolerance(ctx.config));
    Assertions checks;
    // Monotone decrease as t decreases, over in-regime points on flat model spaces,
    // with slack for the floating-point floor.
    bool flat = false;
    if constexpr (Backend::pointwise_calculus) flat = !be.space().weighted();
    if (flat) {
        const double slack = 1e-12 * study.c_n * std::max(1.0, be.total_measure());
        for (double p : ctx.config.p_list) {
            double worst = -std::numeric_limits<double>::infinity();
            const ConvergencePoint* prev = nullptr;
            for (const auto& pt : study.points) {
                if (pt.out_of_regime) continue;
                if (prev) worst = std::max(worst, pt.hs_ball.at(p) - prev->hs_ball.at(p));
                prev = &pt;
            }
            if (std::isfinite(worst))
                checks.add("hs_ball_monotone p=" + format_number(p), worst, slack, worst <= slack);
        }
    }
    for (const auto& w : study.warnings) *ctx.log << "warning: " << w << '\n';
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : study.points) {
        nlohmann::json hb = nlohmann::json::object(), hg = nlohmann::json::object();
        for (double p : ctx.config.p_list) {
            hb[format_number(p)] = pt.hs_ball.at(p);
            hg[format_number(p)] = pt.hs_bgg.at(p);
        }
        pts.push_back({{"t", pt.t}, {"out_of_regime", pt.out_of_regime}, {"hs_ball", hb}, {"hs_bgg", hg}, {"sup_diag", pt.sup_diag}});
    }
    nlohmann::json sb = nlohmann::json::object(), sg = nlohmann::json::object();
    for (double p : ctx.config.p_list) {
        sb[format_number(p)] = study.slope_hs_ball.at(p);
        sg[format_number(p)] = study.slope_hs_bgg.at(p);
    }
    nlohmann::json doc = {{"command", "converge"}, {"space", ctx.resolved["space"]}, {"mode_count", basis.size()},
                          {"n", study.n}, {"c_n", study.c_n}, {"points", pts}, {"warnings", study.warnings},
                          {"slope_hs_ball", sb}, {"slope_hs_bgg", sg}, {"slope_sup_diag", study.slope_sup_diag},
                          {"assertions", checks.json()}, {"pass", checks.all_passed()}};
    write_json(ctx.file("converge.json"), doc, ctx.hash);
    std::vector<std::string> header = {"t", "out_of_regime"};
    for (double p : ctx.config.p_list) header.push_back("hs_ball_p" + format_number(p));
    for (double p : ctx.config.p_list) header.push_back("hs_bgg_p" + format_number(p));
    header.push_back("sup_diag");
    for (double p : ctx.config.p_list) header.push_back("slope_hs_ball_p" + format_number(p));
    header.push_back("slope_sup_diag");
    CsvWriter csv(ctx.file("converge.csv"), ctx.hash, header);
    for (const auto& pt : study.points) {
        std::vector<CsvWriter::Cell> row = {pt.t, static_cast<long long>(pt.out_of_regime)};
        for (double p : ctx.config.p_list) row.emplace_back(pt.hs_ball.at(p));
        for (double p : ctx.config.p_list) row.emplace_back(pt.hs_bgg.at(p));
        row.emplace_back(pt.sup_diag);
        for (double p : ctx.config.p_list) row.emplace_back(study.slope_hs_ball.at(p));
        row.emplace_back(study.slope_sup_diag);
        csv.row(row);
    }
    return checks.all_passed() ? ok : assertion_failed;
}

template <class Basis>
int run_ibp(const RunContext& ctx, const Basis& basis) {
    using Backend = std::decay_t<decltype(basis.backend())>;
    heatlens::detail::require_pointwise<Backend>("ibp");
    int status = ok;
    if constexpr (Backend::pointwise_calculus) {
        const auto& be = basis.backend();
        const double tol = ibp_tolerance(ctx.config);
        const double tail = tail_tolerance(ctx.config);
        const std::size_t m = std::min(ctx.config.ibp_modes, basis.size());
        const std::string space = ctx.config.space.variant;
        std::vector<ScalarField> fields;
        for (std::size_t i = 0; i < m; ++i) fields.push_back(basis.values(i));
        nlohmann::json records = nlohmann::json::array();
        CsvWriter csv(ctx.file("ibp.csv"), ctx.hash, {"check", "t", "f", "psi", "lhs", "rhs", "residual", "tolerance", "pass"});
        bool all = true;
        auto emit = [&](const std::string& op, double t, std::size_t i, std::size_t j, const IdentityCheck& r) {
            const bool pass = r.passes(tol);
            all &= pass;
            auto rec = residual_record(op, space, t, basis.size(), r.lhs, r.rhs, r.residual(), tol * r.scale(), pass);
            rec["f"] = i;
            rec["psi"] = j;
            records.push_back(rec);
            csv.row({op, t, static_cast<long long>(i), static_cast<long long>(j), r.lhs, r.rhs, r.residual(), tol * r.scale(),
                     static_cast<long long>(pass)});
        };
        for (double t : ctx.config.t_grid) {
            const HeatGeometry geo = heat_geometry(basis, t, tail);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) emit("integration_by_parts", t, i, j, ibp_check(be, geo, fields[i], fields[j]));
            if (be.dim() == 1) {
                const auto data = kernel_identity_data(basis, t, tail);
                for (std::size_t i = 0; i < m; ++i) {
                    const auto first = kernel_identity_first(data, fields[i], fields);
                    const auto second = kernel_identity_second(data, fields[i], fields);
                    for (std::size_t j = 0; j < m; ++j) {
                        emit("kernel_identity_first", t, i, j, first[j]);
                        emit("kernel_identity_second", t, i, j, second[j]);
                    }
                }
            }
        }
        nlohmann::json doc = {{"command", "ibp"}, {"space", ctx.resolved["space"]}, {"mode_count", basis.size()},
                              {"tolerance", tol}, {"records", records}, {"pass", all}};
        write_json(ctx.file("ibp.json"), doc, ctx.hash);
        status = all ? ok : assertion_failed;
    }
    return status;
}

inline int run_witten(const RunContext& ctx) {
    const auto& c = ctx.config;
    if (is_mesh(c)) throw capability_error("witten needs a model space; meshes carry no pointwise Hessian");
    const ModelSpace space = make_model_space(c.space);
    Assertions checks;
    nlohmann::json rows = nlohmann::json::array();
    CsvWriter csv(ctx.file("witten.csv"), ctx.hash, {"grid", "mode", "residual"});
    if (space.kind() == ModelKind::flat_torus) {
        // No weight: the identity reduces to Delta f = tr Hess f on the spectral grid.
        ModelBasisOptions opt;
        opt.grid_points = c.grid_points;
        const auto basis = compute_basis(space, c.witten_modes + 1, opt);
        for (std::size_t i = 1; i <= c.witten_modes; ++i) {
            const double r = trace_residual(basis, i);
            rows.push_back({{"grid", basis.backend().grid().points_per_axis}, {"mode", i}, {"residual", r}});
            csv.row({static_cast<long long>(basis.backend().grid().points_per_axis), static_cast<long long>(i), r});
            checks.add("trace_identity mode=" + std::to_string(i), r, c.thresholds.trace_identity, r <= c.thresholds.trace_identity);
        }
    } else {
        std::vector<std::vector<double>> res;
        for (std::size_t g : c.witten_grids) {
            auto path = std::make_shared<const DiscreteSpace>(make_periodic_path(space, g));
            const auto basis = compute_basis(path, c.witten_modes + 1);
            res.emplace_back();
            for (std::size_t i = 1; i <= c.witten_modes; ++i) {
                const double r = witten_residual(*path, basis.values(i));
                res.back().push_back(r);
                rows.push_back({{"grid", g}, {"mode", i}, {"residual", r}});
                csv.row({static_cast<long long>(g), static_cast<long long>(i), r});
            }
        }
        const double bound = space.weighted() ? c.thresholds.witten : c.thresholds.trace_identity;
        for (std::size_t i = 0; i < c.witten_modes; ++i) {
            const std::string mode = " mode=" + std::to_string(i + 1);
            checks.add("residual grid=" + std::to_string(c.witten_grids.front()) + mode, res.front()[i], bound, res.front()[i] <= bound);
            if (!space.weighted()) continue;
            for (std::size_t k = 0; k + 1 < res.size(); ++k) {
                const double ratio = res[k][i] / res[k + 1][i];
                checks.add("refinement " + std::to_string(c.witten_grids[k]) + "->" + std::to_string(c.witten_grids[k + 1]) + mode,
                           ratio, c.thresholds.witten_shrink, ratio >= c.thresholds.witten_shrink);
            }
        }
    }
    nlohmann::json doc = {{"command", "witten"}, {"space", ctx.resolved["space"]}, {"residuals", rows},
                          {"assertions", checks.json()}, {"pass", checks.all_passed()}};
    write_json(ctx.file("witten.json"), doc, ctx.hash);
    return checks.all_passed() ? ok : assertion_failed;
}

template <class Basis>
int run_collapse(const RunContext& ctx, const Basis& basis) {
    using Backend = std::decay_t<decltype(basis.backend())>;
    heatlens::detail::require_pointwise<Backend>("collapse");
    const auto& be = basis.backend();
    const int n = ctx.config.n > 0 ? ctx.config.n : be.metadata().n;
    const auto r_grid = ctx.config.r_grid.empty() ? default_r_grid(be.metadata().diameter)
                                                  : detail::sorted_descending(ctx.config.r_grid);
    const auto rep = classify(basis, n, r_grid, ctx.config.thresholds.classify);
    nlohmann::json modes = nlohmann::json::array();
    for (std::size_t k = 0; k < rep.modes.size(); ++k)
        modes.push_back({{"mode", rep.modes[k]}, {"trace_residual", rep.trace_residuals[k]},
                         {"hausdorff_pairing", rep.hausdorff_pairings[k]}});
    nlohmann::json doc = {
        {"command", "collapse"},
        {"space", ctx.resolved["space"]},
        {"mode_count", basis.size()},
        {"n", n},
        {"verdict", to_string(rep.verdict)},
        {"conditions", {{"trace_identity", rep.trace_ok}, {"noncollapse", rep.noncollapse_ok},
                        {"density_constant", rep.density_ok}, {"self_checks", rep.self_checks_ok}}},
        {"checked_modes", modes},
        {"orthonormality_error", rep.orthonormality_error},
        {"density", {{"mean", rep.density.mean}, {"coefficient_of_variation", rep.density.coefficient_of_variation},
                     {"max_fit_rms", rep.density.max_fit_rms}, {"points_used", rep.density.points_used}}},
        {"noncollapse", {{"constant", rep.noncollapse.constant}, {"slope", rep.noncollapse.slope},
                         {"radii", rep.noncollapse.radii}, {"min_ratio", rep.noncollapse.min_ratio}}},
        {"notes", rep.notes}};
    write_json(ctx.file("collapse.json"), doc, ctx.hash);
    CsvWriter csv(ctx.file("collapse.csv"), ctx.hash, {"r", "min_ratio", "mean_density_ratio"});
    for (std::size_t k = 0; k < r_grid.size(); ++k)
        csv.row({r_grid[k], rep.noncollapse.min_ratio[k], rep.density.ratios.col(static_cast<Eigen::Index>(k)).mean()});
    return ok;
}

// ---- dispatch -----------------------------------------------------------------

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"spectrum", "metric", "converge", "ibp", "witten", "collapse"};
    return names;
}

template <class Basis>
int dispatch(const std::string& sub, const RunContext& ctx, const Basis& basis) {
    if (sub == "spectrum") return run_spectrum(ctx, basis);
    if (sub == "metric") return run_metric(ctx, basis);
    if (sub == "converge") return run_converge(ctx, basis);
    if (sub == "ibp") return run_ibp(ctx, basis);
    if (sub == "collapse") return run_collapse(ctx, basis);
    throw usage_error("unknown subcommand '" + sub + "'");
}

// Runs one subcommand; throws the library error types on failure.
inline int run(const std::string& sub, ExperimentConfig config, std::ostream& log = std::cerr) {
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
        throw usage_error("unknown subcommand '" + sub + "'");
    if (config.t_grid.empty()) throw usage_error("/t_grid: must not be empty");
    RunContext ctx;
    ctx.log = &log;
    ctx.out = config.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(ctx.out, ec);
    if (ec) throw usage_error("/output_dir: cannot create '" + config.output_dir + "': " + ec.message());

    auto finish_context = [&]() {
        ctx.config = config;
        ctx.resolved = resolved_json(config);
        ctx.hash = config_hash(ctx.resolved);
        nlohmann::json written = ctx.resolved;
        written["output_dir"] = config.output_dir;
        write_json(ctx.file("config.resolved.json"), written, ctx.hash);
    };

    if (sub == "witten") {
        finish_context();
        return run_witten(ctx);
    }
    if (is_mesh(config)) {
        auto space = std::make_shared<const DiscreteSpace>(make_discrete_space(config.space));
        if (config.mode_count == 0) config.mode_count = mesh_mode_count(*space, min_t(config), tail_tolerance(config));
        if (config.mode_count >= space->node_count()) throw usage_error("/mode_count: must be below the vertex count");
        finish_context();
        log << "computing " << config.mode_count << " mesh eigenpairs\n";
        const auto basis = compute_basis(space, config.mode_count);
        return dispatch(sub, ctx, basis);
    }
    const ModelSpace space = make_model_space(config.space);
    if (config.mode_count == 0) config.mode_count = default_mode_count(space, min_t(config));
    finish_context();
    ModelBasisOptions opt;
    opt.grid_points = config.grid_points;
    const auto basis = compute_basis(space, config.mode_count, opt);
    return dispatch(sub, ctx, basis);
}

inline nlohmann::json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("--config: cannot read '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw usage_error("--config: invalid JSON: " + std::string(e.what()));
    }
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw usage_error(flag + ": '" + item + "' is not a number");
        }
    }
    return out;
}

// Full command-line entry point; maps errors to the exit-code policy.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Heat-kernel embeddings, pull-back metrics and non-collapse diagnostics"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    std::string config_path, t_grid, out_dir;
    std::optional<std::size_t> modes;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " suite");
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--t-grid", t_grid, "comma-separated times, overrides t_grid");
        sub->add_option("--modes", modes, "mode count, overrides mode_count");
        sub->add_option("--out", out_dir, "output directory, overrides output_dir");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        nlohmann::json j = read_config_file(config_path);
        ExperimentConfig config = parse_config(j);
        if (!t_grid.empty() || app.get_subcommands().front()->count("--t-grid")) {
            config.t_grid = parse_number_list(t_grid, "--t-grid");
            if (config.t_grid.empty()) throw usage_error("--t-grid: must not be empty");
            for (double t : config.t_grid)
                if (!(t > 0.0) || !std::isfinite(t)) throw usage_error("--t-grid: times must be positive");
        }
        if (modes) {
            if (*modes == 0) throw usage_error("--modes: must be positive");
            config.mode_count = *modes;
        }
        if (!out_dir.empty()) config.output_dir = out_dir;
        const int code = run(sub, config, err);
        out << sub << ": " << (code == ok ? "pass" : "assertion failure") << " (" << config.output_dir << ")\n";
        return code;
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const invalid_parameter& e) {
        err << "invalid parameter: " << e.what() << '\n';
        return usage;
    } catch (const truncation_error& e) {
        err << "truncation error: " << e.what() << '\n';
        return usage;
    } catch (const ingestion_error& e) {
        err << "ingestion error: " << e.what() << '\n';
        return usage;
    } catch (const format_error& e) {
        err << "format error: " << e.what() << '\n';
        return usage;
    } catch (const capability_error& e) {
        err << "capability error: " << e.what() << '\n';
        return capability;
    } catch (const solver_error& e) {
        err << "solver error: " << e.what() << '\n';
        return solver;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        // Resource failures (allocation, file system) end the run like a solver failure.
        err << "internal error: " << e.what() << '\n';
        return solver;
    }
}

}  // namespace heatlens::cli
