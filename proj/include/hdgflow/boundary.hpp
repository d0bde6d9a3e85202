/** \file boundary.hpp
 * \brief Weak boundary operators: the residual B-hat imposed on boundary
 *        faces of the trace system, together with its derivatives.
 */
#pragma once

#include <functional>

#include "hdgflow/euler.hpp"
#include "hdgflow/viscous.hpp"

namespace hdgflow {

/// Supported boundary condition families.
enum class BoundaryKind {
    far_field,              ///< characteristic treatment against prescribed data
    pressure_outflow,       ///< static pressure imposed, other quantities extrapolated
    adiabatic_wall,         ///< no-slip, zero heat flux
    isothermal_wall,        ///< no-slip, wall temperature imposed
    moving_isothermal_wall, ///< tangentially sliding lid at fixed temperature
    inviscid_wall,          ///< slip wall / symmetry plane
};

/// Pointwise data a boundary operator needs at one face quadrature point.
struct BoundaryData {
    BoundaryKind kind = BoundaryKind::far_field;
    Vec4 u_ref = Vec4::Zero();       ///< far-field state at this point
    double p_out = 0.0;              ///< imposed static pressure
    double t_wall = 0.0;             ///< imposed wall temperature
    Vec2 v_wall = Vec2::Zero();      ///< wall velocity (moving lid)
};

/// Boundary condition bound to a mesh tag.  The far-field state may vary in
/// space (exact-solution data imposed through the characteristic operator);
/// a constant state is the common case.
struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::far_field;
    Vec4 u_ref = Vec4::Zero();
    double p_out = 0.0;
    double t_wall = 0.0;
    Vec2 v_wall = Vec2::Zero();
    std::function<Vec4(const Vec2&)> spatial_ref;  ///< optional pointwise far-field data

    /// Resolve the pointwise data at position x.
    BoundaryData at(const Vec2& x) const {
        BoundaryData d;
        d.kind = kind;
        d.u_ref = spatial_ref ? spatial_ref(x) : u_ref;
        d.p_out = p_out;
        d.t_wall = t_wall;
        d.v_wall = v_wall;
        return d;
    }
};

/// True when the operator involves viscous quantities and needs a finite
/// Reynolds number to make sense.
inline bool requires_viscous_model(BoundaryKind kind) {
    return kind == BoundaryKind::adiabatic_wall ||
           kind == BoundaryKind::isothermal_wall ||
           kind == BoundaryKind::moving_isothermal_wall;
}

/// Value and derivatives of the boundary operator at one quadrature point.
struct BoundaryFlux {
    Vec4 value = Vec4::Zero();
    Mat4 d_ue = Mat4::Zero();    ///< derivative w.r.t. the element-side state
    Mat4 d_uhat = Mat4::Zero();  ///< derivative w.r.t. the trace state
    Eigen::Matrix<double, nvar, msd> d_eps =
        Eigen::Matrix<double, nvar, msd>::Zero();
    Eigen::Matrix<double, nvar, nsd> d_phi =
        Eigen::Matrix<double, nvar, nsd>::Zero();
};

namespace detail {

/// Far-field operator value at a given trace state:
/// A_n^+(u_hat) (u_e - u_hat) + A_n^-(u_hat) (u_ref - u_hat).
inline Vec4 far_field_value(const Vec4& ue, const Vec4& uhat, const Vec4& uref,
                            const Vec2& n, const GasModel& gas) {
    const auto [a_plus, a_minus] = split_jacobians(uhat, n, gas);
    return a_plus * (ue - uhat) + a_minus * (uref - uhat);
}

inline constexpr double fd_step = 6e-6;

}  // namespace detail

/// Evaluate the boundary operator B-hat and its derivatives for one face
/// quadrature point.  `ue` is the element-side state, `uhat` the trace state,
/// `eps`/`phi` the element-side mixed variables (ignored by operators that do
/// not involve them), `n` the outward unit normal.
inline BoundaryFlux boundary_flux(const BoundaryData& bc, const Vec4& ue,
                                  const Vec4& uhat,
                                  [[maybe_unused]] const Vec3& eps,
                                  const Vec2& phi, const Vec2& n,
                                  const GasModel& gas) {
    BoundaryFlux out;
    const double g = gas.gamma;
    switch (bc.kind) {
        case BoundaryKind::far_field: {
            const auto [a_plus, a_minus] = split_jacobians(uhat, n, gas);
            out.value = a_plus * (ue - uhat) + a_minus * (bc.u_ref - uhat);
            out.d_ue = a_plus;
            // The trace enters both through the split matrices and through
            // the explicit -u_hat arguments; differentiate the whole map.
            for (int j = 0; j < nvar; ++j) {
                const double h = detail::fd_step * std::max(1.0, std::abs(uhat[j]));
                Vec4 up = uhat, dn = uhat;
                up[j] += h;
                dn[j] -= h;
                out.d_uhat.col(j) =
                    (detail::far_field_value(ue, up, bc.u_ref, n, gas) -
                     detail::far_field_value(ue, dn, bc.u_ref, n, gas)) /
                    (2.0 * h);
            }
            break;
        }
        case BoundaryKind::pressure_outflow: {
            const double ke = 0.5 * (ue[1] * ue[1] + ue[2] * ue[2]) / ue[0];
            out.value[0] = ue[0] - uhat[0];
            out.value[1] = ue[1] - uhat[1];
            out.value[2] = ue[2] - uhat[2];
            out.value[3] = bc.p_out / (g - 1.0) + ke - uhat[3];
            out.d_ue.setIdentity();
            out.d_ue(3, 3) = 0.0;
            out.d_ue(3, 0) = -ke / ue[0];
            out.d_ue(3, 1) = ue[1] / ue[0];
            out.d_ue(3, 2) = ue[2] / ue[0];
            out.d_uhat = -Mat4::Identity();
            break;
        }
        case BoundaryKind::adiabatic_wall: {
            const Primitives qh = primitives(uhat, gas);
            const double mu = sutherland_mu(qh.T, gas);
            const double dmu = sutherland_dmu_dT(qh.T, gas);
            const double cPr = 1.0 / (gas.reynolds * gas.prandtl);
            const double tau_e = tau_diffusive(gas)[3];
            out.value[0] = ue[0] - uhat[0];
            out.value[1] = uhat[1];
            out.value[2] = uhat[2];
            out.value[3] = cPr * mu * phi.dot(n) - tau_e * (ue[3] - uhat[3]);
            out.d_ue(0, 0) = 1.0;
            out.d_ue(3, 3) = -tau_e;
            out.d_uhat(0, 0) = -1.0;
            out.d_uhat(1, 1) = 1.0;
            out.d_uhat(2, 2) = 1.0;
            out.d_uhat.row(3) =
                (cPr * dmu * phi.dot(n)) * dT_dU(uhat, gas).transpose();
            out.d_uhat(3, 3) += tau_e;
            out.d_phi(3, 0) = cPr * mu * n.x();
            out.d_phi(3, 1) = cPr * mu * n.y();
            break;
        }
        case BoundaryKind::isothermal_wall: {
            out.value[0] = ue[0] - uhat[0];
            out.value[1] = uhat[1];
            out.value[2] = uhat[2];
            out.value[3] = ue[0] * bc.t_wall / g - uhat[3];
            out.d_ue(0, 0) = 1.0;
            out.d_ue(3, 0) = bc.t_wall / g;
            out.d_uhat(0, 0) = -1.0;
            out.d_uhat(1, 1) = 1.0;
            out.d_uhat(2, 2) = 1.0;
            out.d_uhat(3, 3) = -1.0;
            break;
        }
        case BoundaryKind::moving_isothermal_wall: {
            const double e_wall =
                bc.t_wall / g + 0.5 * bc.v_wall.squaredNorm();
            out.value[0] = ue[0] - uhat[0];
            out.value[1] = uhat[1] - ue[0] * bc.v_wall.x();
            out.value[2] = uhat[2] - ue[0] * bc.v_wall.y();
            out.value[3] = ue[0] * e_wall - uhat[3];
            out.d_ue(0, 0) = 1.0;
            out.d_ue(1, 0) = -bc.v_wall.x();
            out.d_ue(2, 0) = -bc.v_wall.y();
            out.d_ue(3, 0) = e_wall;
            out.d_uhat(0, 0) = -1.0;
            out.d_uhat(1, 1) = 1.0;
            out.d_uhat(2, 2) = 1.0;
            out.d_uhat(3, 3) = -1.0;
            break;
        }
        case BoundaryKind::inviscid_wall: {
            const Mat2 tang = Mat2::Identity() - n * n.transpose();
            const Vec2 m(ue[1], ue[2]);
            const Vec2 mt = tang * m;
            out.value[0] = ue[0] - uhat[0];
            out.value[1] = mt.x() - uhat[1];
            out.value[2] = mt.y() - uhat[2];
            out.value[3] = ue[3] - uhat[3];
            out.d_ue(0, 0) = 1.0;
            out.d_ue.block<2, 2>(1, 1) = tang;
            out.d_ue(3, 3) = 1.0;
            out.d_uhat = -Mat4::Identity();
            break;
        }
    }
    return out;
}

/// Parse a boundary kind keyword as used in configuration files.
inline BoundaryKind parse_boundary_kind(const std::string& text) {
    if (text == "far_field") return BoundaryKind::far_field;
    if (text == "pressure_outflow") return BoundaryKind::pressure_outflow;
    if (text == "adiabatic_wall") return BoundaryKind::adiabatic_wall;
    if (text == "isothermal_wall") return BoundaryKind::isothermal_wall;
    if (text == "moving_isothermal_wall")
        return BoundaryKind::moving_isothermal_wall;
    if (text == "inviscid_wall" || text == "symmetry")
        return BoundaryKind::inviscid_wall;
    throw ParseError("unknown boundary kind '" + text + "'");
}

}  // namespace hdgflow
