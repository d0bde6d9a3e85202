/** \file viscous.hpp
 * \brief Diffusive flux tensor built from the mixed variables: deviatoric
 *        strain rate (Voigt storage) and temperature gradient.
 */
#pragma once

#include "hdgflow/gas.hpp"

namespace hdgflow {

/// Expand Voigt storage (e11, e22, e12) into the symmetric tensor.
inline Mat2 voigt_to_tensor(const Vec3& eps) {
    Mat2 E;
    E << eps[0], eps[2], eps[2], eps[1];
    return E;
}

/// Diffusive flux tensor G(U, eps^d, phi) with rows (0; sigma^d; sigma^d v + q).
///
/// The deviatoric strain rate is defined with a built-in factor two,
/// eps^d = 2 grad^s v - (2/3)(div v) I, so the deviatoric stress is simply
/// sigma^d = (mu/Re) eps^d and the heat flux q = mu/(Re Pr) phi with
/// phi = grad T. Throws InviscidModel when Re = inf.
inline Flux viscous_flux(const Vec4& U, const Vec3& eps, const Vec2& phi,
                         const GasModel& gas) {
    if (gas.inviscid())
        throw InviscidModel("viscous_flux: Re = inf");
    const Primitives q = primitives(U, gas);
    const double mu = sutherland_mu(q.T, gas);
    const Mat2 sigma = (mu / gas.reynolds) * voigt_to_tensor(eps);
    const Vec2 heat = (mu / (gas.reynolds * gas.prandtl)) * phi;
    Flux G;
    G.row(0).setZero();
    G.block<2, 2>(1, 0) = sigma;
    G.row(3) = (sigma * q.v + heat).transpose();
    return G;
}

/// Normal diffusive flux G(U, eps, phi) . n.
inline Vec4 viscous_flux_normal(const Vec4& U, const Vec3& eps, const Vec2& phi,
                                const Vec2& n, const GasModel& gas) {
    return viscous_flux(U, eps, phi, gas) * n;
}

/// Derivatives of G(U, eps, phi) . n with respect to (U, eps, phi).
/// G is linear in the mixed variables at fixed U; the U-dependence enters
/// through mu(T(U)) and the velocity in the energy row.
struct ViscousNormalJacobian {
    Mat4 dU;                                  ///< d(G.n)/dU
    Eigen::Matrix<double, nvar, msd> dEps;    ///< d(G.n)/d(eps Voigt)
    Eigen::Matrix<double, nvar, nsd> dPhi;    ///< d(G.n)/d(phi)
};

inline ViscousNormalJacobian viscous_flux_normal_jacobian(
    const Vec4& U, const Vec3& eps, const Vec2& phi, const Vec2& n,
    const GasModel& gas) {
    if (gas.inviscid())
        throw InviscidModel("viscous_flux_normal_jacobian: Re = inf");
    const Primitives q = primitives(U, gas);
    const double mu = sutherland_mu(q.T, gas);
    const double dmu = sutherland_dmu_dT(q.T, gas);
    const double cRe = 1.0 / gas.reynolds;
    const double cPr = 1.0 / (gas.reynolds * gas.prandtl);
    const Mat2 E = voigt_to_tensor(eps);
    const Vec2 En = E * n;

    ViscousNormalJacobian J;
    J.dU.setZero();
    J.dEps.setZero();
    J.dPhi.setZero();

    // Voigt basis tensors applied to n:  d(E n)/d eps_a.
    const Vec2 B[msd] = {Vec2(n.x(), 0.0), Vec2(0.0, n.y()), Vec2(n.y(), n.x())};
    for (int a = 0; a < msd; ++a) {
        J.dEps(1, a) = cRe * mu * B[a].x();
        J.dEps(2, a) = cRe * mu * B[a].y();
        J.dEps(3, a) = cRe * mu * B[a].dot(q.v);
    }
    J.dPhi(3, 0) = cPr * mu * n.x();
    J.dPhi(3, 1) = cPr * mu * n.y();

    // U-dependence: through mu(T(U)) in all rows and v(U) in the energy row.
    const Vec4 dT = dT_dU(U, gas);
    const auto dv = dv_dU(U);
    const Vec2 momentum_part = cRe * En;              // coefficient of mu in rows 1-2
    const double energy_mu = cRe * En.dot(q.v) + cPr * phi.dot(n);
    for (int j = 0; j < nvar; ++j) {
        const double dmu_j = dmu * dT[j];
        J.dU(1, j) = momentum_part.x() * dmu_j;
        J.dU(2, j) = momentum_part.y() * dmu_j;
        J.dU(3, j) = energy_mu * dmu_j + cRe * mu * En.dot(dv.col(j));
    }
    return J;
}

/// Diffusive stabilisation matrix tau^d = Re^{-1} diag(0, 1, 1, [(gamma-1) Ma^2 Pr]^{-1}).
inline Vec4 tau_diffusive(const GasModel& gas) {
    if (gas.inviscid()) return Vec4::Zero();
    const double cRe = 1.0 / gas.reynolds;
    const double te = 1.0 / ((gas.gamma - 1.0) * gas.mach_inf * gas.mach_inf * gas.prandtl);
    return Vec4(0.0, cRe, cRe, cRe * te);
}

}  // namespace hdgflow
