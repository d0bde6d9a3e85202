/** \file riemann.hpp
 * \brief Convective stabilisation matrices and trace numerical fluxes: the
 *        Lax-Friedrichs, Roe (with entropy fix), HLL, HLLE and HLLEM Riemann
 *        solvers on the hybrid interface state, plus the classical two-state
 *        fluxes used as cross-check oracles.
 */
#pragma once

#include "hdgflow/euler.hpp"

#include <span>
#include <string>

namespace hdgflow {

/// Riemann-solver families driving the convective stabilisation matrix.
enum class RiemannScheme { lax_friedrichs, roe, hll, hlle, hllem };

/// Scheme selection with its tuning knobs.
struct RiemannConfig {
    RiemannScheme scheme = RiemannScheme::lax_friedrichs;
    double roe_delta = 0.0;      ///< Entropy-fix eigenvalue floor (>= 0).
    double hllem_theta0 = 1e-8;  ///< Lower clamp of the contact-wave factor.
};

/// Parse a scheme string: `lf | roe[:delta] | hll | hlle | hllem[:theta0]`.
inline RiemannConfig parse_scheme(const std::string& text) {
    RiemannConfig cfg;
    std::string name = text;
    double value = -1.0;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        const std::string arg = text.substr(colon + 1);
        size_t pos = 0;
        try {
            value = std::stod(arg, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != arg.size() || value < 0.0)
            throw ParseError("invalid scheme parameter '" + arg + "'");
    }
    if (name == "lf") {
        cfg.scheme = RiemannScheme::lax_friedrichs;
        if (value >= 0.0) throw ParseError("scheme 'lf' takes no parameter");
    } else if (name == "roe") {
        cfg.scheme = RiemannScheme::roe;
        if (value >= 0.0) cfg.roe_delta = value;
    } else if (name == "hll") {
        cfg.scheme = RiemannScheme::hll;
        if (value >= 0.0) throw ParseError("scheme 'hll' takes no parameter");
    } else if (name == "hlle") {
        cfg.scheme = RiemannScheme::hlle;
        if (value >= 0.0) throw ParseError("scheme 'hlle' takes no parameter");
    } else if (name == "hllem") {
        cfg.scheme = RiemannScheme::hllem;
        if (value > 0.0) {
            if (value >= 1.0) throw ParseError("hllem theta0 must lie in (0, 1)");
            cfg.hllem_theta0 = value;
        } else if (value == 0.0) {
            throw ParseError("hllem theta0 must be positive");
        }
    } else {
        throw ParseError("unknown Riemann scheme '" + name + "'");
    }
    return cfg;
}

/// Human-readable label of a scheme configuration.
inline std::string scheme_label(const RiemannConfig& cfg) {
    switch (cfg.scheme) {
        case RiemannScheme::lax_friedrichs: return "lf";
        case RiemannScheme::roe:
            return cfg.roe_delta > 0.0 ? "roe:" + std::to_string(cfg.roe_delta) : "roe";
        case RiemannScheme::hll: return "hll";
        case RiemannScheme::hlle: return "hlle";
        default: return "hllem";
    }
}

/// Entropy-fixed eigenvalue magnitudes: Phi_ii = max(|lambda_i|, delta).
inline Vec4 entropy_fix_eigs(const Vec4& lambda, double delta) {
    return lambda.cwiseAbs().cwiseMax(delta);
}

/// Largest/smallest signed wave-speed estimates at the interface state.  For
/// the HLLE variant the extremes also scan the supplied one-sided states.
struct WaveSpeeds {
    double s_plus = 0.0;
    double s_minus = 0.0;
};

inline WaveSpeeds wave_speeds(const RiemannConfig& cfg, const Vec4& uhat,
                              const Vec2& n, const GasModel& gas,
                              std::span<const Vec4> sides = {}) {
    const Primitives qh = primitives(uhat, gas);
    if (!qh.pressure_positive)
        throw DegenerateState("wave speeds requested at a non-physical state");
    WaveSpeeds w;
    w.s_plus = std::max(0.0, qh.v.dot(n) + qh.c);
    w.s_minus = std::min(0.0, qh.v.dot(n) - qh.c);
    if (cfg.scheme == RiemannScheme::hlle) {
        for (const Vec4& u : sides) {
            const Primitives q = primitives(u, gas);
            if (!q.pressure_positive)
                throw DegenerateState("wave speeds requested at a non-physical state");
            w.s_plus = std::max(w.s_plus, q.v.dot(n) + q.c);
            w.s_minus = std::min(w.s_minus, q.v.dot(n) - q.c);
        }
    }
    return w;
}

/// Convective stabilisation matrix with a flag marking the degenerate
/// supersonic-inflow case where the HLL-family tau vanishes identically.
struct Stabilization {
    Mat4 tau = Mat4::Zero();
    bool vanishing = false;
};

/// Stabilisation matrix tau(uhat) of the selected Riemann solver, seen from
/// the element whose outward normal is n.  `sides` feeds the extra HLLE
/// wave-speed candidates; the other schemes ignore it.
inline Stabilization stabilization_tau(const RiemannConfig& cfg, const Vec4& uhat,
                                       const Vec2& n, const GasModel& gas,
                                       std::span<const Vec4> sides = {}) {
    Stabilization out;
    switch (cfg.scheme) {
        case RiemannScheme::lax_friedrichs: {
            const Primitives q = primitives(uhat, gas);
            if (!q.pressure_positive)
                throw DegenerateState("stabilisation requested at a non-physical state");
            out.tau = (std::abs(q.v.dot(n)) + q.c) * Mat4::Identity();
            break;
        }
        case RiemannScheme::roe: {
            const EigenSystem es = eigendecompose(uhat, n, gas);
            out.tau = eigen_apply(es, [&](double l) {
                return std::max(std::abs(l), cfg.roe_delta);
            });
            break;
        }
        case RiemannScheme::hll:
        case RiemannScheme::hlle: {
            const double sp = wave_speeds(cfg, uhat, n, gas, sides).s_plus;
            out.tau = sp * Mat4::Identity();
            out.vanishing = (sp == 0.0);
            break;
        }
        case RiemannScheme::hllem: {
            const double sp = wave_speeds(cfg, uhat, n, gas).s_plus;
            out.vanishing = (sp == 0.0);
            const EigenSystem es = eigendecompose(uhat, n, gas);
            const Primitives q = primitives(uhat, gas);
            const double vn = std::abs(q.v.dot(n));
            const double theta = std::max(vn / (vn + q.c), cfg.hllem_theta0);
            // Contact/shear waves carry lambda = v.n; the acoustic waves keep
            // the full s+ dissipation.
            Vec4 diag;
            for (int i = 0; i < nvar; ++i) {
                const bool contact = (i == 1 || i == 3);
                diag[i] = sp * (contact ? theta : 1.0);
            }
            out.tau = es.R * diag.asDiagonal() * es.L;
            break;
        }
    }
    return out;
}

/// HDG trace numerical flux F(uhat) n + tau(uhat) (u_e - uhat).
inline Vec4 trace_flux(const RiemannConfig& cfg, const Vec4& uhat, const Vec4& u_e,
                       const Vec2& n, const GasModel& gas,
                       std::span<const Vec4> sides = {}) {
    return inviscid_flux(uhat, gas) * n +
           stabilization_tau(cfg, uhat, n, gas, sides).tau * (u_e - uhat);
}

/// Classical two-state numerical flux seen from the plus side (normal n);
/// reference oracle for the hybridised fluxes.  The intermediate state is the
/// arithmetic mean for LF/Roe and drives the wave-speed estimates for the
/// HLL family.
inline Vec4 dg_reference_flux(const RiemannConfig& cfg, const Vec4& u_plus,
                              const Vec4& u_minus, const Vec2& n,
                              const GasModel& gas) {
    const Vec4 mean = 0.5 * (u_plus + u_minus);
    const Vec4 jump = u_plus - u_minus;
    switch (cfg.scheme) {
        case RiemannScheme::lax_friedrichs: {
            const Primitives q = primitives(mean, gas);
            const double lmax = std::abs(q.v.dot(n)) + q.c;
            return 0.5 * (inviscid_flux(u_plus, gas) + inviscid_flux(u_minus, gas)) * n +
                   0.5 * lmax * jump;
        }
        case RiemannScheme::roe: {
            const EigenSystem es = eigendecompose(mean, n, gas);
            const Mat4 diss = eigen_apply(es, [&](double l) {
                return std::max(std::abs(l), cfg.roe_delta);
            });
            return 0.5 * (inviscid_flux(u_plus, gas) + inviscid_flux(u_minus, gas)) * n +
                   0.5 * diss * jump;
        }
        default: {
            const Primitives q = primitives(mean, gas);
            const double sp = std::max(0.0, q.v.dot(n) + q.c);
            const double sm = std::min(0.0, q.v.dot(n) - q.c);
            if (sm >= 0.0) return inviscid_flux(u_plus, gas) * n;
            if (sp <= 0.0) return inviscid_flux(u_minus, gas) * n;
            Mat4 theta = Mat4::Identity();
            if (cfg.scheme == RiemannScheme::hllem) {
                const EigenSystem es = eigendecompose(mean, n, gas);
                const double vn = std::abs(q.v.dot(n));
                const double th = std::max(vn / (vn + q.c), cfg.hllem_theta0);
                const Vec4 diag(1.0, th, 1.0, th);
                theta = es.R * diag.asDiagonal() * es.L;
            }
            const Vec4 central = (sp * inviscid_flux(u_plus, gas) * n -
                                  sm * inviscid_flux(u_minus, gas) * n) /
                                 (sp - sm);
            return central + (sp * sm / (sp - sm)) * (theta * jump);
        }
    }
}

}  // namespace hdgflow
