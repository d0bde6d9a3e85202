/** \file euler.hpp
 * \brief Convective flux tensor, its normal Jacobian and the closed-form
 *        spectral decomposition used by characteristic boundary conditions
 *        and Riemann-solver stabilisation matrices.
 */
#pragma once

#include "hdgflow/gas.hpp"

namespace hdgflow {

/// Convective (Euler) flux tensor F(U): rows (rho v; rho v x v + p I; (rhoE+p) v).
inline Flux inviscid_flux(const Vec4& U, const GasModel& gas) {
    const Primitives q = primitives(U, gas);
    Flux F;
    F.row(0) = U[0] * q.v.transpose();
    F.block<2, 2>(1, 0) = U[0] * q.v * q.v.transpose() + q.p * Mat2::Identity();
    F.row(3) = (U[3] + q.p) * q.v.transpose();
    return F;
}

/// Normal convective-flux Jacobian A_n = [dF/dU] . n evaluated at U.
/// The normal is defensively normalised; geometry code should pass |n| = 1.
inline Mat4 normal_jacobian(const Vec4& U, const Vec2& n_in, const GasModel& gas) {
    const Vec2 n = n_in.normalized();
    const Primitives q = primitives(U, gas);
    const double g = gas.gamma, gm1 = g - 1.0;
    const double u = q.v.x(), v = q.v.y();
    const double vn = q.v.dot(n);
    const double q2 = q.v.squaredNorm();
    const double phi2 = 0.5 * gm1 * q2;
    const double H = q.E + q.p / q.rho;  // total enthalpy
    Mat4 A;
    A << 0.0, n.x(), n.y(), 0.0,
        phi2 * n.x() - u * vn, vn + (2.0 - g) * u * n.x(), u * n.y() - gm1 * v * n.x(), gm1 * n.x(),
        phi2 * n.y() - v * vn, v * n.x() - gm1 * u * n.y(), vn + (2.0 - g) * v * n.y(), gm1 * n.y(),
        (phi2 - H) * vn, H * n.x() - gm1 * u * vn, H * n.y() - gm1 * v * vn, g * vn;
    return A;
}

/// Spectral decomposition A_n = R Lambda L with L = R^{-1}.
/// Eigenvalue ordering: (v.n - c, v.n, v.n + c, v.n); the repeated v.n pair
/// carries the entropy and shear characteristic fields.
struct EigenSystem {
    Mat4 R;      ///< right eigenvectors (columns)
    Mat4 L;      ///< left eigenvectors (rows), L = R^{-1}
    Vec4 lambda; ///< eigenvalues in the ordering above
};

/// Closed-form eigendecomposition of the 2D normal Euler Jacobian.
/// Throws DegenerateState when the speed of sound is not strictly positive.
inline EigenSystem eigendecompose(const Vec4& U, const Vec2& n_in, const GasModel& gas) {
    const Vec2 n = n_in.normalized();
    const Primitives q = primitives(U, gas);
    if (!(q.c > 0.0))
        throw DegenerateState("eigendecompose: c^2 <= 0");
    const double g = gas.gamma, gm1 = g - 1.0;
    const double u = q.v.x(), v = q.v.y(), c = q.c;
    const double vn = q.v.dot(n);
    const double vt = -u * n.y() + v * n.x();  // tangential velocity
    const double q2 = q.v.squaredNorm();
    const double H = c * c / gm1 + 0.5 * q2;

    EigenSystem es;
    es.lambda = Vec4(vn - c, vn, vn + c, vn);
    es.R.col(0) << 1.0, u - c * n.x(), v - c * n.y(), H - c * vn;
    es.R.col(1) << 1.0, u, v, 0.5 * q2;
    es.R.col(2) << 1.0, u + c * n.x(), v + c * n.y(), H + c * vn;
    es.R.col(3) << 0.0, -n.y(), n.x(), vt;

    const double b = gm1 / (c * c);
    es.L.row(0) << 0.5 * (0.5 * b * q2 + vn / c), 0.5 * (-b * u - n.x() / c),
        0.5 * (-b * v - n.y() / c), 0.5 * b;
    es.L.row(1) << 1.0 - 0.5 * b * q2, b * u, b * v, -b;
    es.L.row(2) << 0.5 * (0.5 * b * q2 - vn / c), 0.5 * (-b * u + n.x() / c),
        0.5 * (-b * v + n.y() / c), 0.5 * b;
    es.L.row(3) << -vt, -n.y(), n.x(), 0.0;
    return es;
}

/// R f(Lambda) L for an elementwise eigenvalue map f.
template <class F>
inline Mat4 eigen_apply(const EigenSystem& es, F&& f) {
    Vec4 d;
    for (int i = 0; i < nvar; ++i) d[i] = f(es.lambda[i]);
    return es.R * d.asDiagonal() * es.L;
}

/// |A_n| = R |Lambda| L.
inline Mat4 abs_jacobian(const Vec4& U, const Vec2& n, const GasModel& gas) {
    return eigen_apply(eigendecompose(U, n, gas), [](double l) { return std::abs(l); });
}

/// Characteristic splitting A_n^{+/-} = (A_n +/- |A_n|)/2.
inline std::pair<Mat4, Mat4> split_jacobians(const Vec4& U, const Vec2& n,
                                             const GasModel& gas) {
    const EigenSystem es = eigendecompose(U, n, gas);
    const Mat4 Ap = eigen_apply(es, [](double l) { return std::max(l, 0.0); });
    const Mat4 Am = eigen_apply(es, [](double l) { return std::min(l, 0.0); });
    return {Ap, Am};
}

}  // namespace hdgflow
