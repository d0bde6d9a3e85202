/** \file gas.hpp
 * \brief Ideal-gas model: nondimensional groups, primitive conversions,
 *        admissibility queries and the Sutherland viscosity law.
 */
#pragma once

#include "hdgflow/core.hpp"

namespace hdgflow {

/// How the dynamic viscosity depends on temperature.
enum class ViscosityLaw { sutherland, constant };

/// Gas parameters and the derived nondimensional free-stream groups.
///
/// All solver quantities are nondimensional with free-stream density,
/// velocity magnitude and temperature as references, so rho_inf = 1,
/// |v_inf| = 1, T_inf = 1/((gamma-1) Ma^2), p_inf = 1/(gamma Ma^2),
/// c_inf = 1/Ma and mu(T_inf) = 1.
struct GasModel {
    double gamma = 1.4;       ///< specific-heat ratio
    double mach_inf = 0.5;    ///< free-stream Mach number
    double reynolds = inf;    ///< Reynolds number; inf flags an inviscid model
    double prandtl = 0.71;    ///< Prandtl number
    double sutherland_s0 = 110.0;  ///< Sutherland constant [K]
    double t_ref = 273.0;          ///< reference temperature [K]
    ViscosityLaw viscosity_law = ViscosityLaw::sutherland;

    bool inviscid() const { return !std::isfinite(reynolds); }

    double t_inf() const { return 1.0 / ((gamma - 1.0) * mach_inf * mach_inf); }
    double p_inf() const { return 1.0 / (gamma * mach_inf * mach_inf); }
    double c_inf() const { return 1.0 / mach_inf; }
    /// Nondimensional Sutherland constant S = S0 / ((gamma-1) Tref Ma^2).
    double s_nondim() const {
        return sutherland_s0 / ((gamma - 1.0) * t_ref * mach_inf * mach_inf);
    }
    /// Free-stream total energy density rhoE_inf = p_inf/(gamma-1) + 1/2.
    double rhoE_inf() const { return p_inf() / (gamma - 1.0) + 0.5; }

    /// Free-stream state for a unit flow direction d.
    Vec4 freestream(const Vec2& d = Vec2(1.0, 0.0)) const {
        const Vec2 dir = d.normalized();
        return Vec4(1.0, dir.x(), dir.y(), rhoE_inf());
    }
};

/// Primitive variables derived from a conservative state.
struct Primitives {
    double rho = 0.0;
    Vec2 v = Vec2::Zero();
    double p = 0.0;
    double T = 0.0;
    double E = 0.0;  ///< specific total energy
    double c = 0.0;  ///< speed of sound (0 when p <= 0, see pressure_positive)
    bool pressure_positive = true;  ///< reported, not fatal: caller decides
};

/// Physical-admissibility query (rho > 0 and p > 0); never throws.
struct Admissibility {
    bool ok = false;
    double rho = 0.0;
    double p = 0.0;
};

/// Convert a conservative state to primitives.
/// Throws NonPositiveDensity for rho <= 0; a non-positive pressure is only
/// flagged so the caller can observe positivity violations.
inline Primitives primitives(const Vec4& U, const GasModel& gas) {
    if (!(U[0] > 0.0))
        throw NonPositiveDensity("primitives: rho = " + std::to_string(U[0]));
    Primitives out;
    out.rho = U[0];
    out.v = Vec2(U[1] / U[0], U[2] / U[0]);
    out.E = U[3] / U[0];
    const double kin = 0.5 * out.v.squaredNorm();
    out.p = (gas.gamma - 1.0) * out.rho * (out.E - kin);
    out.T = gas.gamma * (out.E - kin);
    out.pressure_positive = out.p > 0.0;
    out.c = out.pressure_positive ? std::sqrt(gas.gamma * out.p / out.rho) : 0.0;
    return out;
}

/// Conservative state from (rho, v, p).
inline Vec4 conservative(double rho, const Vec2& v, double p, const GasModel& gas) {
    const double rhoE = p / (gas.gamma - 1.0) + 0.5 * rho * v.squaredNorm();
    return Vec4(rho, rho * v.x(), rho * v.y(), rhoE);
}

/// Admissibility (rho > 0, p > 0) without throwing.
inline Admissibility admissible(const Vec4& U, const GasModel& gas) {
    Admissibility a;
    a.rho = U[0];
    if (!(U[0] > 0.0)) { a.p = 0.0; a.ok = false; return a; }
    const double kin = 0.5 * (U[1] * U[1] + U[2] * U[2]) / U[0];
    a.p = (gas.gamma - 1.0) * (U[3] - kin);
    a.ok = a.p > 0.0;
    return a;
}

/// Dynamic viscosity at temperature T under the configured law.
/// Sutherland: mu = (T/T_inf)^{3/2} (T_inf + S)/(T + S), normalised so that
/// mu(T_inf) = 1; the constant law returns 1 identically.
inline double sutherland_mu(double T, const GasModel& gas) {
    if (gas.viscosity_law == ViscosityLaw::constant) return 1.0;
    if (!(T > 0.0))
        throw NonPositiveTemperature("sutherland_mu: T = " + std::to_string(T));
    const double Ti = gas.t_inf(), S = gas.s_nondim();
    const double r = T / Ti;
    return r * std::sqrt(r) * (Ti + S) / (T + S);
}

/// d(mu)/dT for the configured viscosity law.
inline double sutherland_dmu_dT(double T, const GasModel& gas) {
    if (gas.viscosity_law == ViscosityLaw::constant) return 0.0;
    const double mu = sutherland_mu(T, gas);
    return mu * (1.5 / T - 1.0 / (T + gas.s_nondim()));
}

/// Velocity derivative w.r.t. the conservative state: column j is dv/dU_j.
inline Eigen::Matrix<double, nsd, nvar> dv_dU(const Vec4& U) {
    const double rho = U[0];
    const Vec2 v(U[1] / rho, U[2] / rho);
    Eigen::Matrix<double, nsd, nvar> D = Eigen::Matrix<double, nsd, nvar>::Zero();
    D(0, 0) = -v.x() / rho;
    D(1, 0) = -v.y() / rho;
    D(0, 1) = 1.0 / rho;
    D(1, 2) = 1.0 / rho;
    return D;
}

/// Temperature gradient w.r.t. the conservative state (row vector).
inline Vec4 dT_dU(const Vec4& U, const GasModel& gas) {
    const double rho = U[0];
    const Vec2 v(U[1] / rho, U[2] / rho);
    const double E = U[3] / rho;
    Vec4 g;
    g[0] = gas.gamma * (-E + v.squaredNorm()) / rho;
    g[1] = -gas.gamma * v.x() / rho;
    g[2] = -gas.gamma * v.y() / rho;
    g[3] = gas.gamma / rho;
    return g;
}

}  // namespace hdgflow
