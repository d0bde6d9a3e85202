/** \file exact_solutions.hpp
 * \brief Closed-form reference flows used by the verification cases: the
 *        transonic hodograph solution of the Euler equations on a square and
 *        the forced compressible Couette flow.
 */
#pragma once

#include <cmath>
#include <vector>

#include "hdgflow/gas.hpp"

namespace hdgflow {

/// One point of the hodograph solution, with its intermediate quantities.
struct RinglebPoint {
    double c = 0.0;      ///< speed-of-sound root in (0, 1)
    double rho = 0.0;    ///< density c^(2/(gamma-1))
    double V = 0.0;      ///< speed sqrt(2 (1 - c^2) / (gamma - 1))
    double J = 0.0;      ///< hodograph auxiliary function of c
    double theta = 0.0;  ///< flow angle off the +y axis, in [0, pi/2]
    double p = 0.0;      ///< pressure c^(2 gamma/(gamma-1)) / gamma
    Vec4 u = Vec4::Zero();  ///< conservative state
    double residual = 0.0;  ///< implicit-relation residual at the root
};

namespace detail {

struct RinglebRelations {
    double rho, V, J, g;  ///< g = 1 / (4 rho^2 V^4)
};

inline RinglebRelations ringleb_relations(double c, double gamma) {
    RinglebRelations r;
    r.rho = std::pow(c, 2.0 / (gamma - 1.0));
    r.V = std::sqrt(2.0 * (1.0 - c * c) / (gamma - 1.0));
    const double c2 = c * c, c3 = c2 * c, c5 = c3 * c2;
    r.J = 1.0 / c + 1.0 / (3.0 * c3) + 1.0 / (5.0 * c5) -
          0.5 * std::log((1.0 + c) / (1.0 - c));
    const double v2 = r.V * r.V;
    r.g = 1.0 / (4.0 * r.rho * r.rho * v2 * v2);
    return r;
}

/// Residual of the implicit relation (x + J/2)^2 + y^2 = 1 / (4 rho^2 V^4).
inline double ringleb_residual(double c, double x, double y, double gamma) {
    const RinglebRelations r = ringleb_relations(c, gamma);
    const double a = x + 0.5 * r.J;
    return a * a + y * y - r.g;
}

/// Derivative of the residual with respect to c (for the Newton polish).
inline double ringleb_residual_dc(double c, double x, double y, double gamma) {
    (void)y;
    const RinglebRelations r = ringleb_relations(c, gamma);
    const double c2 = c * c;
    const double dJ = -1.0 / c2 - 1.0 / (c2 * c2) - 1.0 / (c2 * c2 * c2) -
                      1.0 / (1.0 - c2);
    const double drho_rho = 2.0 / ((gamma - 1.0) * c);
    const double dV_V = -2.0 * c / ((gamma - 1.0) * r.V * r.V);
    const double dg = -r.g * (2.0 * drho_rho + 4.0 * dV_V);
    return (x + 0.5 * r.J) * dJ - dg;
}

}  // namespace detail

/// Solve the hodograph point at (x, y): scan c in (0.1, 0.999) for sign
/// changes, bisect 200 times, then polish with safeguarded Newton until the
/// implicit-relation residual drops below `tol`.  When several brackets turn
/// up, a finite `seed` selects the one nearest to it; without a seed the
/// ambiguity is an error.  The flow direction comes from the stable
/// identities sin 2theta = 2 rho V^2 |y| and cos 2theta = 2 rho V^2 (x + J/2),
/// never from the ill-conditioned square root of the stream function.  Theta
/// is the flow angle off the +y axis: v = (-sgn(y) V sin theta, V cos theta),
/// so theta = 0 is the turning locus (v_x = 0, the y = 0 symmetry line with
/// x + J/2 > 0) and theta = pi/2 the dividing streamline (v_y = 0).
inline RinglebPoint ringleb_point(
    double x, double y, double gamma = 1.4, double tol = 1e-14,
    double seed = std::numeric_limits<double>::quiet_NaN()) {
    constexpr double c_lo = 0.1, c_hi = 0.999;
    constexpr int scan = 256;

    auto f = [&](double c) { return detail::ringleb_residual(c, x, y, gamma); };

    // Bracket the root; the residual is smooth, so a fixed scan both finds
    // the brackets and detects extra branches.
    struct Bracket {
        double a, b, fa;
    };
    std::vector<Bracket> brackets;
    double prev_c = c_lo, prev_f = f(c_lo);
    for (int i = 1; i <= scan; ++i) {
        const double c = c_lo + (c_hi - c_lo) * i / scan;
        const double fc = f(c);
        if (prev_f == 0.0 || prev_f * fc < 0.0)
            brackets.push_back({prev_c, c, prev_f});
        prev_c = c;
        prev_f = fc;
    }
    if (brackets.empty())
        throw NoRoot("ringleb: no speed-of-sound root in (0.1, 0.999) at (" +
                     std::to_string(x) + ", " + std::to_string(y) + ")");
    if (brackets.size() > 1 && std::isnan(seed))
        throw AmbiguousBranch("ringleb: " + std::to_string(brackets.size()) +
                              " speed-of-sound roots at (" + std::to_string(x) +
                              ", " + std::to_string(y) +
                              "); pass a seed to choose a branch");
    size_t pick = 0;
    if (!std::isnan(seed))
        for (size_t i = 1; i < brackets.size(); ++i)
            if (std::abs(0.5 * (brackets[i].a + brackets[i].b) - seed) <
                std::abs(0.5 * (brackets[pick].a + brackets[pick].b) - seed))
                pick = i;
    double a = brackets[pick].a, b = brackets[pick].b, fa = brackets[pick].fa;

    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fa * fm <= 0.0)
            b = m;
        else {
            a = m;
            fa = fm;
        }
    }
    double c = 0.5 * (a + b);
    for (int i = 0; i < 50 && std::abs(f(c)) > tol; ++i) {
        const double step = f(c) / detail::ringleb_residual_dc(c, x, y, gamma);
        double next = c - step;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        c = next;
    }

    RinglebPoint out;
    const detail::RinglebRelations r = detail::ringleb_relations(c, gamma);
    out.c = c;
    out.rho = r.rho;
    out.V = r.V;
    out.J = r.J;
    out.p = std::pow(c, 2.0 * gamma / (gamma - 1.0)) / gamma;
    out.residual = f(c);

    // 2 theta from the signed closed forms, using |y| so theta lands in
    // [0, pi/2]; the mirror below the symmetry line enters through sgn(y).
    out.theta = 0.5 * std::atan2(std::abs(y), x + 0.5 * r.J);
    const double sgn_y = y < 0.0 ? -1.0 : 1.0;
    const Vec2 v(-sgn_y * r.V * std::sin(out.theta), r.V * std::cos(out.theta));

    out.u[0] = r.rho;
    out.u[1] = r.rho * v.x();
    out.u[2] = r.rho * v.y();
    out.u[3] = out.p / (gamma - 1.0) + 0.5 * r.rho * r.V * r.V;
    return out;
}

/// Conservative state of the hodograph solution at (x, y).
inline Vec4 ringleb_exact(
    double x, double y, double gamma = 1.4, double tol = 1e-14,
    double seed = std::numeric_limits<double>::quiet_NaN()) {
    return ringleb_point(x, y, gamma, tol, seed).u;
}

/// Forward map of the hodograph solution: physical coordinates of the point
/// with speed-of-sound c on the streamline psi (an oracle for round-trip
/// testing; psi V must not exceed one).
inline Vec2 ringleb_coordinates(double c, double psi, double gamma = 1.4) {
    const detail::RinglebRelations r = detail::ringleb_relations(c, gamma);
    const double sin_t = psi * r.V;
    if (!(sin_t >= 0.0 && sin_t <= 1.0))
        throw DegenerateState("ringleb_coordinates: psi V outside [0, 1]");
    const double x =
        (psi * psi - 0.5 / (r.V * r.V)) / r.rho - 0.5 * r.J;
    const double y = psi * std::sqrt(1.0 - sin_t * sin_t) / (r.rho * r.V);
    return Vec2(x, y);
}

/// Forced Couette flow: horizontal shear v = (y log(1 + y), 0) with a linear
/// plus parabolic temperature profile between the wall values alpha_c T_inf
/// and beta_c T_inf, at uniform pressure.
inline Vec4 couette_exact(double y, const GasModel& gas, double alpha_c = 0.8,
                          double beta_c = 0.85) {
    const double t_inf = gas.t_inf();
    const double pr = gas.prandtl;
    const double ma2 = gas.mach_inf * gas.mach_inf;
    const double T =
        t_inf * (alpha_c + y * (beta_c - alpha_c) +
                 0.5 * (gas.gamma - 1.0) * ma2 * pr * y * (1.0 - y));
    const double p = gas.p_inf();
    const double rho = gas.gamma * p / ((gas.gamma - 1.0) * T);
    const Vec2 v(y * std::log1p(y), 0.0);
    Vec4 u;
    u[0] = rho;
    u[1] = rho * v.x();
    u[2] = rho * v.y();
    u[3] = p / (gas.gamma - 1.0) + 0.5 * rho * v.squaredNorm();
    return u;
}

/// Scaled strain rate of the Couette profile in storage order
/// (eps11, eps22, eps12): the off-diagonal entry carries the full du/dy.
inline Vec3 couette_strain(double y) {
    const double du = std::log1p(y) + y / (1.0 + y);
    return Vec3(0.0, 0.0, du);
}

/// Temperature gradient of the Couette profile, (0, dT/dy).
inline Vec2 couette_temperature_gradient(double y, const GasModel& gas,
                                         double alpha_c = 0.8,
                                         double beta_c = 0.85) {
    const double t_inf = gas.t_inf();
    const double ma2 = gas.mach_inf * gas.mach_inf;
    const double dT =
        t_inf * ((beta_c - alpha_c) +
                 0.5 * (gas.gamma - 1.0) * ma2 * gas.prandtl * (1.0 - 2.0 * y));
    return Vec2(0.0, dT);
}

/// Momentum and energy forcing that makes the Couette profile an exact
/// steady solution (constant viscosity): the shear u(y) = y log(1 + y) and
/// the prescribed temperature leave the viscous balance short by
/// (0, -u''/Re, 0, -[u'' u + u'^2 + T''/Pr]/Re) with T'' = -Pr.
inline Vec4 couette_source(double y, const GasModel& gas) {
    const double re = gas.reynolds;
    const double u = y * std::log1p(y);
    const double du = std::log1p(y) + y / (1.0 + y);
    const double ddu = 1.0 / (1.0 + y) + 1.0 / ((1.0 + y) * (1.0 + y));
    Vec4 s = Vec4::Zero();
    s[1] = -ddu / re;
    s[3] = -(ddu * u + du * du - 1.0) / re;
    return s;
}

}  // namespace hdgflow
