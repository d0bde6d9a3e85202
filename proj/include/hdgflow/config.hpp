/** \file config.hpp
 * \brief JSON run configuration: mesh selection, gas model, scheme, boundary
 *        bindings, march parameters, shock capture and output paths.
 */
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hdgflow/boundary.hpp"
#include "hdgflow/exact_solutions.hpp"
#include "hdgflow/generators.hpp"
#include "hdgflow/newton.hpp"
#include "hdgflow/shock.hpp"

namespace hdgflow {

using json = nlohmann::json;

/// Mesh source: a built-in generator or a mesh file on disk.
struct MeshSpec {
    std::string builtin;  ///< empty when a file is given
    int level = 1;
    int k_geo = 1;
    std::string file;  ///< empty when a generator is used
};

/// One boundary binding, keyed by tag name in the configuration.
struct BoundaryBinding {
    BoundaryKind kind = BoundaryKind::far_field;
    std::string data = "freestream";  ///< "freestream" | "exact" for far field
    Vec4 u_ref = Vec4::Zero();        ///< explicit far-field state
    bool explicit_ref = false;
    double p_out = 0.0;
    bool p_out_relative = false;  ///< p_out is a multiple of p_inf
    double t_wall = 0.0;
    bool t_wall_relative = false;  ///< t_wall is a multiple of t_inf
    Vec2 v_wall = Vec2::Zero();
};

/// Convergence-study block of a configuration.
struct StudySpec {
    std::vector<int> levels;
    std::vector<int> ks;
    std::vector<std::string> schemes;
    std::string csv;
    double slack = 0.2;
};

/// Fully parsed run configuration.
struct RunConfig {
    std::string name;
    MeshSpec mesh;
    int k = 1;
    std::vector<std::pair<int, int>> k_override;  ///< (element, degree) pairs
    GasModel gas;
    std::string scheme = "lf";
    std::string exact;               ///< "", "ringleb" or "couette"
    std::string source;              ///< "", "couette"
    std::string initial = "freestream";
    std::map<std::string, BoundaryBinding> boundary;
    TimeConfig time;
    SensorConfig shock;
    std::string field_path;
    std::string history_path;
    std::optional<StudySpec> study;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where,
                                      const std::string& what) {
    throw ParseError("config: " + where + ": " + what);
}

inline double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") return inf;
    if (!v.is_number()) config_error(key, "expected a number or \"inf\"");
    return v.get<double>();
}

inline Vec4 vec4_of(const json& v, const char* where) {
    if (!v.is_array() || v.size() != 4)
        config_error(where, "expected an array of 4 numbers");
    return Vec4(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                v[3].get<double>());
}

inline GasModel parse_gas(const json& j) {
    GasModel gas;
    gas.gamma = number_or(j, "gamma", gas.gamma);
    gas.mach_inf = number_or(j, "mach_inf", gas.mach_inf);
    gas.reynolds = number_or(j, "reynolds", gas.reynolds);
    gas.prandtl = number_or(j, "prandtl", gas.prandtl);
    gas.sutherland_s0 = number_or(j, "sutherland_s0", gas.sutherland_s0);
    gas.t_ref = number_or(j, "t_ref", gas.t_ref);
    if (j.contains("viscosity")) {
        const std::string law = j.at("viscosity").get<std::string>();
        if (law == "constant")
            gas.viscosity_law = ViscosityLaw::constant;
        else if (law == "sutherland")
            gas.viscosity_law = ViscosityLaw::sutherland;
        else
            config_error("gas.viscosity", "unknown law '" + law + "'");
    }
    return gas;
}

inline BoundaryBinding parse_binding(const std::string& tag, const json& j) {
    BoundaryBinding b;
    if (!j.contains("kind")) config_error("boundary." + tag, "missing 'kind'");
    b.kind = parse_boundary_kind(j.at("kind").get<std::string>());
    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.is_array()) {
            b.u_ref = vec4_of(d, ("boundary." + tag + ".data").c_str());
            b.explicit_ref = true;
        } else {
            b.data = d.get<std::string>();
            if (b.data != "freestream" && b.data != "exact")
                config_error("boundary." + tag + ".data",
                             "expected \"freestream\", \"exact\" or a state");
        }
    }
    if (j.contains("p_out")) {
        b.p_out = j.at("p_out").get<double>();
    } else if (j.contains("p_out_over_p_inf")) {
        b.p_out = j.at("p_out_over_p_inf").get<double>();
        b.p_out_relative = true;
    } else if (b.kind == BoundaryKind::pressure_outflow) {
        b.p_out = 1.0;
        b.p_out_relative = true;
    }
    if (j.contains("t_wall")) {
        b.t_wall = j.at("t_wall").get<double>();
    } else if (j.contains("t_wall_over_t_inf")) {
        b.t_wall = j.at("t_wall_over_t_inf").get<double>();
        b.t_wall_relative = true;
    }
    if (j.contains("v_wall")) {
        const json& v = j.at("v_wall");
        if (!v.is_array() || v.size() != 2)
            config_error("boundary." + tag + ".v_wall",
                         "expected an array of 2 numbers");
        b.v_wall = Vec2(v[0].get<double>(), v[1].get<double>());
    }
    return b;
}

inline TimeConfig parse_time(const json& j, TimeConfig t) {
    t.dt = number_or(j, "dt", t.dt);
    t.growth = number_or(j, "growth", t.growth);
    t.max_steps = static_cast<int>(number_or(j, "max_steps", t.max_steps));
    t.max_newton = static_cast<int>(number_or(j, "max_newton", t.max_newton));
    t.newton_rel_tol = number_or(j, "newton_rel_tol", t.newton_rel_tol);
    t.newton_abs_tol = number_or(j, "newton_abs_tol", t.newton_abs_tol);
    t.steady_tol = number_or(j, "steady_tol", t.steady_tol);
    t.steady_drop = number_or(j, "steady_drop", t.steady_drop);
    if (j.contains("policy")) {
        const std::string p = j.at("policy").get<std::string>();
        if (p == "abort")
            t.policy = NonPhysicalPolicy::abort_run;
        else if (p == "halve_dt")
            t.policy = NonPhysicalPolicy::halve_dt;
        else
            config_error("time.policy", "expected \"abort\" or \"halve_dt\"");
    }
    return t;
}

inline SensorConfig parse_shock(const json& j) {
    SensorConfig sc;
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "off")
            sc.mode = ShockMode::off;
        else if (m == "laplacian")
            sc.mode = ShockMode::laplacian;
        else if (m == "bulk")
            sc.mode = ShockMode::bulk;
        else
            config_error("shock.mode",
                         "expected \"off\", \"laplacian\" or \"bulk\"");
    }
    sc.eps0_multiplier = number_or(j, "eps0_multiplier", sc.eps0_multiplier);
    sc.delta_window = number_or(j, "delta_window", sc.delta_window);
    sc.bulk_eps0 = number_or(j, "bulk_eps0", sc.bulk_eps0);
    sc.bulk_s0 = number_or(j, "bulk_s0", sc.bulk_s0);
    sc.bulk_smin = number_or(j, "bulk_smin", sc.bulk_smin);
    sc.pr_beta = number_or(j, "pr_beta", sc.pr_beta);
    return sc;
}

}  // namespace detail

/// Parse a configuration document.  Malformed JSON reports line and column;
/// semantic problems report the offending key path.
inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (!j.contains("case"))
            detail::config_error("case", "missing case name");
        cfg.name = j.at("case").get<std::string>();

        if (!j.contains("mesh")) detail::config_error("mesh", "missing block");
        const json& m = j.at("mesh");
        if (m.contains("file")) {
            cfg.mesh.file = m.at("file").get<std::string>();
        } else if (m.contains("builtin")) {
            cfg.mesh.builtin = m.at("builtin").get<std::string>();
            cfg.mesh.level =
                static_cast<int>(detail::number_or(m, "level", 1.0));
            cfg.mesh.k_geo =
                static_cast<int>(detail::number_or(m, "k_geo", 1.0));
        } else {
            detail::config_error("mesh", "need 'file' or 'builtin'");
        }

        cfg.k = static_cast<int>(detail::number_or(j, "k", 1.0));
        if (cfg.k < 1) detail::config_error("k", "degree must be at least 1");
        if (j.contains("k_override")) {
            for (const json& row : j.at("k_override")) {
                if (!row.is_array() || row.size() != 2)
                    detail::config_error("k_override",
                                         "expected [element, degree] pairs");
                cfg.k_override.emplace_back(row[0].get<int>(),
                                            row[1].get<int>());
                if (cfg.k_override.back().second < 1)
                    detail::config_error("k_override",
                                         "degree must be at least 1");
            }
        }

        if (j.contains("gas")) cfg.gas = detail::parse_gas(j.at("gas"));
        if (j.contains("scheme"))
            cfg.scheme = j.at("scheme").get<std::string>();
        parse_scheme(cfg.scheme);  // validate eagerly
        if (j.contains("exact")) {
            cfg.exact = j.at("exact").get<std::string>();
            if (cfg.exact != "ringleb" && cfg.exact != "couette")
                detail::config_error("exact",
                                     "expected \"ringleb\" or \"couette\"");
        }
        if (j.contains("source")) {
            cfg.source = j.at("source").get<std::string>();
            if (cfg.source != "couette")
                detail::config_error("source", "expected \"couette\"");
        }
        if (j.contains("initial")) {
            cfg.initial = j.at("initial").get<std::string>();
            if (cfg.initial != "freestream" && cfg.initial != "exact")
                detail::config_error("initial",
                                     "expected \"freestream\" or \"exact\"");
            if (cfg.initial == "exact" && cfg.exact.empty())
                detail::config_error("initial",
                                     "\"exact\" start needs an exact family");
        }

        if (j.contains("boundary"))
            for (const auto& [tag, binding] : j.at("boundary").items())
                cfg.boundary[tag] = detail::parse_binding(tag, binding);

        if (j.contains("time")) cfg.time = detail::parse_time(j.at("time"), {});
        if (j.contains("shock")) cfg.shock = detail::parse_shock(j.at("shock"));

        if (j.contains("output")) {
            const json& o = j.at("output");
            if (o.contains("field"))
                cfg.field_path = o.at("field").get<std::string>();
            if (o.contains("history"))
                cfg.history_path = o.at("history").get<std::string>();
        }

        if (j.contains("study")) {
            const json& s = j.at("study");
            StudySpec st;
            for (const json& lv : s.at("levels")) st.levels.push_back(lv.get<int>());
            if (s.contains("ks"))
                for (const json& kk : s.at("ks")) st.ks.push_back(kk.get<int>());
            else
                st.ks.push_back(cfg.k);
            if (s.contains("schemes"))
                for (const json& sc : s.at("schemes"))
                    st.schemes.push_back(sc.get<std::string>());
            else
                st.schemes.push_back(cfg.scheme);
            for (const std::string& sc : st.schemes) parse_scheme(sc);
            if (s.contains("csv")) st.csv = s.at("csv").get<std::string>();
            st.slack = detail::number_or(s, "slack", st.slack);
            cfg.study = std::move(st);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return cfg;
}

/// Parse a configuration file from disk.
inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Exact conserved-state field of the configured family (empty when none).
inline std::function<Vec4(const Vec2&)> exact_state_field(
    const RunConfig& cfg) {
    if (cfg.exact == "ringleb") {
        const double gamma = cfg.gas.gamma;
        return [gamma](const Vec2& x) {
            return ringleb_exact(x.x(), x.y(), gamma);
        };
    }
    if (cfg.exact == "couette") {
        const GasModel gas = cfg.gas;
        return [gas](const Vec2& x) { return couette_exact(x.y(), gas); };
    }
    return {};
}

/// Exact mixed fields of the configured family (empty when none applies).
inline std::function<Vec3(const Vec2&)> exact_strain_field(
    const RunConfig& cfg) {
    if (cfg.exact == "couette")
        return [](const Vec2& x) { return couette_strain(x.y()); };
    return {};
}

inline std::function<Vec2(const Vec2&)> exact_gradient_field(
    const RunConfig& cfg) {
    if (cfg.exact == "couette") {
        const GasModel gas = cfg.gas;
        return [gas](const Vec2& x) {
            return couette_temperature_gradient(x.y(), gas);
        };
    }
    return {};
}

/// Source term of the configuration (empty when none).
inline std::function<Vec4(const Vec2&)> source_field(const RunConfig& cfg) {
    if (cfg.source == "couette") {
        const GasModel gas = cfg.gas;
        return [gas](const Vec2& x) { return couette_source(x.y(), gas); };
    }
    return {};
}

/// Build the mesh named by the configuration.
inline Mesh build_mesh(const MeshSpec& spec, int level_override = 0) {
    const int level = level_override > 0 ? level_override : spec.level;
    if (!spec.file.empty()) return read_mesh_file(spec.file);
    return builtin_mesh(spec.builtin, level, spec.k_geo);
}

/// Resolve the tag-name bindings of a configuration against a mesh.  A
/// binding that names an absent tag is a configuration error; a mesh tag
/// without a binding is reported when the solver is built.
inline std::map<int, BoundaryCondition> bind_boundaries(const RunConfig& cfg,
                                                        const Mesh& mesh) {
    const auto exact = exact_state_field(cfg);
    std::map<int, BoundaryCondition> out;
    for (const auto& [tag_name, b] : cfg.boundary) {
        int tag = -1;
        try {
            tag = mesh.tag_id(tag_name);
        } catch (const UntaggedBoundary&) {
            throw ParseError("config: boundary tag '" + tag_name +
                             "' does not exist in the mesh");
        }
        BoundaryCondition bc;
        bc.kind = b.kind;
        if (b.explicit_ref)
            bc.u_ref = b.u_ref;
        else if (b.data == "exact") {
            if (!exact)
                throw ParseError("config: boundary '" + tag_name +
                                 "' wants exact data but no exact family is "
                                 "configured");
            bc.spatial_ref = exact;
        } else {
            bc.u_ref = cfg.gas.freestream();
        }
        bc.p_out = b.p_out_relative ? b.p_out * cfg.gas.p_inf() : b.p_out;
        bc.t_wall = b.t_wall_relative ? b.t_wall * cfg.gas.t_inf() : b.t_wall;
        bc.v_wall = b.v_wall;
        out[tag] = bc;
    }
    return out;
}

/// Check the per-element degree overrides against a mesh.  The solve itself
/// supports a uniform degree; overrides must restate it.  (The configuration
/// surface is kept so meshes and configs round-trip; lower-degree patches
/// are a documented non-goal of this build.)
inline void validate_k_override(const RunConfig& cfg, const Mesh& mesh) {
    for (const auto& [e, ke] : cfg.k_override) {
        if (e < 0 || e >= mesh.num_elements())
            throw ParseError("config: k_override element " + std::to_string(e) +
                             " is outside the mesh");
        if (ke != cfg.k)
            throw MissingSpec(
                "config: k_override asks degree " + std::to_string(ke) +
                " on element " + std::to_string(e) +
                "; this build solves uniform-degree systems only");
    }
}

}  // namespace hdgflow
