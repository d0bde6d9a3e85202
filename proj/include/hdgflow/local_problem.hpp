/** \file local_problem.hpp
 * \brief Element-local residuals and Jacobian blocks of the hybridised
 *        mixed system: the conservation equation with the trace numerical
 *        flux, the two mixed equations driven by the trace velocity and
 *        temperature, and the per-side contributions to the trace system.
 */
#pragma once

#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "hdgflow/boundary.hpp"
#include "hdgflow/geometry.hpp"
#include "hdgflow/riemann.hpp"
#include "hdgflow/shock.hpp"

namespace hdgflow {

/// Index map of the element-local unknown vector z = [U | eps | phi]
/// (node-major, variable-minor) and of the per-element trace slots
/// (face-major, node-major, variable-minor).
struct LocalLayout {
    int n_en = 0;          ///< nodes per element
    int n_fn = 0;          ///< nodes per face (k+1)
    bool viscous = false;  ///< whether the mixed blocks exist

    int nz() const { return (viscous ? nvar + msd + nsd : nvar) * n_en; }
    int nhat() const { return 3 * nvar * n_fn; }
    int u(int i, int m) const { return nvar * i + m; }
    int eps(int i, int a) const { return nvar * n_en + msd * i + a; }
    int phi(int i, int d) const { return (nvar + msd) * n_en + nsd * i + d; }
    int hat(int lf, int j, int m) const { return nvar * (lf * n_fn + j) + m; }
};

/// Residuals and Jacobian blocks of one element: z-rows (local equations)
/// and hat-rows (this element's contribution to the trace equations of its
/// three faces; boundary faces carry the boundary operator instead of the
/// transmission flux).
struct LocalResult {
    VecX r_z, r_hat;
    MatX a_zz, a_zh, a_hz, a_hh;
};

/// Assembles the local problems.  Immutable and safe to share across threads
/// once constructed.
class LocalAssembler {
  public:
    LocalAssembler(const GeometryCache& geo, const GasModel& gas,
                   RiemannConfig riemann,
                   std::map<int, BoundaryCondition> boundary,
                   SensorConfig shock = {},
                   std::function<Vec4(const Vec2&)> source = {})
        : geo_(geo),
          gas_(gas),
          riemann_(riemann),
          boundary_(std::move(boundary)),
          shock_(shock),
          source_(std::move(source)),
          tau_d_(tau_diffusive(gas)) {
        layout_.n_en = geo.solution_element().num_nodes();
        layout_.n_fn = geo.solution_element().degree() + 1;
        layout_.viscous = !gas.inviscid();
        validate_boundary();
        build_hat_tables();
        if (shock_.mode == ShockMode::bulk && !layout_.viscous)
            throw MissingSpec(
                "bulk shock capture requires a viscous model (mixed variables "
                "supply the dilatation)");
    }

    const LocalLayout& layout() const { return layout_; }
    const GeometryCache& geometry() const { return geo_; }
    const GasModel& gas() const { return gas_; }
    const RiemannConfig& riemann() const { return riemann_; }
    const std::map<int, BoundaryCondition>& boundary() const { return boundary_; }
    const SensorConfig& shock() const { return shock_; }

    /// Dilatation samples at the volume quadrature points of one element,
    /// recovered from the mixed variable (bulk shock capture input).
    VecX dilatation_samples(int e, const VecX& z) const {
        const auto& L = layout_;
        NodalView eps_nodal(z.data() + nvar * L.n_en, L.n_en, msd);
        const MatX epsq = geo_.volume_shape() * eps_nodal;
        // tr(eps^d) = (2 - 2 nsd / 3) div v, so div v = (3/2)(eps11 + eps22).
        (void)e;
        return 1.5 * (epsq.col(0) + epsq.col(1));
    }

    /// Outward numerical flux integrated over one element side,
    /// \int (Fhat - Ghat) . n ds, using the same trace flux as the residual.
    /// Summed over a closed boundary at steady state this recovers the
    /// integral balance of mass, momentum and energy.
    Vec4 side_flux_integral(int e, int lf, const VecX& z, const VecX& uhat,
                            const SmoothedField& art = {}) const {
        const auto& L = layout_;
        const bool rev = geo_.side_reversed(e, lf);
        const std::vector<int> snodes = geo_.side_nodes(lf, rev);
        const SideGeometry& sg = geo_.side(e, lf);
        const MatX& ts = geo_.trace_shape();
        NodalView u_nodal(z.data(), L.n_en, nvar);
        MatX ue_f(L.n_fn, nvar), uh_f(L.n_fn, nvar);
        MatX eps_f = MatX::Zero(L.n_fn, msd), phi_f = MatX::Zero(L.n_fn, nsd);
        for (int j = 0; j < L.n_fn; ++j) {
            ue_f.row(j) = u_nodal.row(snodes[j]);
            for (int m = 0; m < nvar; ++m) uh_f(j, m) = uhat[L.hat(lf, j, m)];
            if (L.viscous) {
                for (int a = 0; a < msd; ++a)
                    eps_f(j, a) = z[L.eps(snodes[j], a)];
                for (int d = 0; d < nsd; ++d)
                    phi_f(j, d) = z[L.phi(snodes[j], d)];
            }
        }
        const MatX ueq = ts * ue_f;
        const MatX uhq = ts * uh_f;
        const MatX epsq = ts * eps_f;
        const MatX phiq = ts * phi_f;
        const bool bulk = shock_.mode == ShockMode::bulk && !art.empty();
        const Vec3 art_corners = art.corners(e);
        const MatX& fhat = face_hat_[lf][rev];
        Vec4 total = Vec4::Zero();
        for (int q = 0; q < static_cast<int>(sg.wds.size()); ++q) {
            const Vec2 n = sg.normal.row(q).transpose();
            const Vec4 ue = ueq.row(q).transpose();
            const Vec4 uh = uhq.row(q).transpose();
            const Vec4 sides[1] = {ue};
            const Stabilization stab =
                stabilization_tau(riemann_, uh, n, gas_, sides);
            Vec4 H = inviscid_flux(uh, gas_) * n + stab.tau * (ue - uh);
            if (L.viscous) {
                const Vec3 eps = epsq.row(q).transpose();
                const Vec2 phi = phiq.row(q).transpose();
                H -= viscous_flux_normal(uh, eps, phi, n, gas_);
                H += tau_d_.cwiseProduct(ue - uh);
                if (bulk) {
                    const double beta = fhat.row(q).dot(art_corners);
                    const double divv = 1.5 * (eps[0] + eps[1]);
                    H -= bulk_viscous_flux(uh, phi, beta, divv, shock_, gas_) *
                         n;
                }
            }
            total += sg.wds[q] * H;
        }
        return total;
    }

    /// Assemble residuals (and optionally Jacobian blocks) of element e.
    ///
    /// `z`:      local unknowns, layout().nz() entries;
    /// `uhat`:   trace values of the element's three faces, layout().nhat();
    /// `u_prev`: previous-step conserved nodal values (nvar * n_en), used by
    ///           the backward-Euler term when dt is finite;
    /// `art`:    smoothed artificial-viscosity field (may be empty).
    LocalResult assemble(int e, const VecX& z, const VecX& uhat,
                         const VecX& u_prev, double dt,
                         const SmoothedField& art,
                         bool with_jacobian = true) const {
        const auto& L = layout_;
        LocalResult out;
        out.r_z = VecX::Zero(L.nz());
        out.r_hat = VecX::Zero(L.nhat());
        if (with_jacobian) {
            out.a_zz = MatX::Zero(L.nz(), L.nz());
            out.a_zh = MatX::Zero(L.nz(), L.nhat());
            out.a_hz = MatX::Zero(L.nhat(), L.nz());
            out.a_hh = MatX::Zero(L.nhat(), L.nhat());
        }
        volume_terms(e, z, u_prev, dt, art, with_jacobian, out);
        for (int lf = 0; lf < 3; ++lf)
            face_terms(e, lf, z, uhat, art, with_jacobian, out);
        return out;
    }

  private:
    using NodalView =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>;

    void validate_boundary() {
        const Mesh& mesh = geo_.mesh();
        for (int f = 0; f < mesh.num_faces(); ++f) {
            const Face& face = mesh.face(f);
            if (!face.boundary()) continue;
            const auto it = boundary_.find(face.tag);
            if (it == boundary_.end())
                throw MissingSpec("boundary tag '" + mesh.tag_names()[face.tag] +
                                  "' has no boundary condition bound");
            if (gas_.inviscid() && requires_viscous_model(it->second.kind))
                throw MissingSpec("boundary tag '" + mesh.tag_names()[face.tag] +
                                  "' needs a viscous model");
        }
    }

    /// Linear vertex hat functions at the volume and side quadrature points,
    /// used to sample the C0 artificial-viscosity field.
    void build_hat_tables() {
        const MatX& vp = geo_.volume_rule().points;
        vol_hat_.resize(vp.rows(), 3);
        for (Eigen::Index q = 0; q < vp.rows(); ++q) {
            vol_hat_(q, 0) = 1.0 - vp(q, 0) - vp(q, 1);
            vol_hat_(q, 1) = vp(q, 0);
            vol_hat_(q, 2) = vp(q, 1);
        }
        const VecX& sc = geo_.face_rule().points.col(0);
        for (int rev = 0; rev < 2; ++rev)
            for (int lf = 0; lf < 3; ++lf) {
                MatX& tab = face_hat_[lf][rev];
                tab.resize(sc.size(), 3);
                for (Eigen::Index q = 0; q < sc.size(); ++q) {
                    const double s = rev ? 1.0 - sc[q] : sc[q];
                    const Vec2 p = ReferenceElement::face_point(lf, s);
                    tab(q, 0) = 1.0 - p.x() - p.y();
                    tab(q, 1) = p.x();
                    tab(q, 2) = p.y();
                }
            }
    }

    void volume_terms(int e, const VecX& z, const VecX& u_prev, double dt,
                      const SmoothedField& art, bool with_jacobian,
                      LocalResult& out) const {
        const auto& L = layout_;
        const ElementGeometry& g = geo_.element(e);
        const MatX& N = geo_.volume_shape();
        const int nq = static_cast<int>(g.wdet.size());
        const double inv_dt = std::isfinite(dt) ? 1.0 / dt : 0.0;

        NodalView u_nodal(z.data(), L.n_en, nvar);
        NodalView prev_nodal(u_prev.data(), L.n_en, nvar);
        const MatX uq = N * u_nodal;
        const MatX uprevq = N * prev_nodal;
        MatX epsq, phiq;
        if (L.viscous) {
            NodalView eps_nodal(z.data() + nvar * L.n_en, L.n_en, msd);
            NodalView phi_nodal(z.data() + (nvar + msd) * L.n_en, L.n_en, nsd);
            epsq = N * eps_nodal;
            phiq = N * phi_nodal;
        }
        const bool laplacian = shock_.mode == ShockMode::laplacian && !art.empty();
        const bool bulk = shock_.mode == ShockMode::bulk && !art.empty();
        const Vec3 art_corners = art.corners(e);

        // x-gradients of the conserved fields, needed by the Laplacian term.
        MatX dudx, dudy;
        if (laplacian) {
            dudx = g.dndx * u_nodal;
            dudy = g.dndy * u_nodal;
        }

        for (int q = 0; q < nq; ++q) {
            const double w = g.wdet[q];
            const Vec4 U = uq.row(q).transpose();
            Flux FG = inviscid_flux(U, gas_);
            Vec3 eps = Vec3::Zero();
            Vec2 phi = Vec2::Zero();
            Primitives prim;
            if (L.viscous) {
                eps = epsq.row(q).transpose();
                phi = phiq.row(q).transpose();
                FG -= viscous_flux(U, eps, phi, gas_);
            }
            double beta = 0.0, divv = 0.0;
            if (bulk) {
                beta = vol_hat_.row(q).dot(art_corners);
                divv = 1.5 * (eps[0] + eps[1]);
                FG -= bulk_viscous_flux(U, phi, beta, divv, shock_, gas_);
            }
            const double eps_art =
                laplacian ? vol_hat_.row(q).dot(art_corners) : 0.0;
            const Vec4 S =
                source_ ? source_(g.xq.row(q).transpose()) : Vec4::Zero();
            const Vec4 dU_dt =
                inv_dt * (uq.row(q) - uprevq.row(q)).transpose();

            // Conservation equation rows.
            for (int i = 0; i < L.n_en; ++i) {
                const double Ni = N(q, i);
                const double dx = g.dndx(q, i), dy = g.dndy(q, i);
                for (int m = 0; m < nvar; ++m) {
                    double r = Ni * (dU_dt[m] - S[m]) - dx * FG(m, 0) - dy * FG(m, 1);
                    if (laplacian)
                        r += eps_art * (dx * dudx(q, m) + dy * dudy(q, m));
                    out.r_z[L.u(i, m)] += w * r;
                }
            }
            if (L.viscous) {
                prim = primitives(U, gas_);
                const Vec3 wts(eps[0], eps[1], 2.0 * eps[2]);
                for (int i = 0; i < L.n_en; ++i) {
                    const double Ni = N(q, i);
                    const double dx = g.dndx(q, i), dy = g.dndy(q, i);
                    // Deviatoric test tensors applied to the gradient:
                    // C_1 grad = (4/3 dx, -2/3 dy), C_2 grad = (-2/3 dx, 4/3 dy),
                    // C_3 grad = (2 dy, 2 dx).
                    const Vec2 cgrad[msd] = {
                        Vec2(4.0 / 3.0 * dx, -2.0 / 3.0 * dy),
                        Vec2(-2.0 / 3.0 * dx, 4.0 / 3.0 * dy),
                        Vec2(2.0 * dy, 2.0 * dx)};
                    for (int a = 0; a < msd; ++a)
                        out.r_z[L.eps(i, a)] +=
                            w * (Ni * wts[a] + cgrad[a].dot(prim.v));
                    for (int d = 0; d < nsd; ++d) {
                        const double grad_d = d == 0 ? dx : dy;
                        out.r_z[L.phi(i, d)] +=
                            w * (Ni * phi[d] + grad_d * prim.T);
                    }
                }
            }
            if (!with_jacobian) continue;

            // Directional flux Jacobians d(F-G)/d(U, eps, phi) per axis.
            const Mat4 Ax = normal_jacobian(U, Vec2(1.0, 0.0), gas_);
            const Mat4 Ay = normal_jacobian(U, Vec2(0.0, 1.0), gas_);
            Mat4 Bx = Ax, By = Ay;
            Eigen::Matrix<double, nvar, msd> Ex, Ey;
            Eigen::Matrix<double, nvar, nsd> Px, Py;
            Ex.setZero(); Ey.setZero(); Px.setZero(); Py.setZero();
            Eigen::Matrix<double, nsd, nvar> dv;
            Vec4 dT;
            if (L.viscous) {
                const auto Jx = viscous_flux_normal_jacobian(
                    U, eps, phi, Vec2(1.0, 0.0), gas_);
                const auto Jy = viscous_flux_normal_jacobian(
                    U, eps, phi, Vec2(0.0, 1.0), gas_);
                Bx -= Jx.dU; By -= Jy.dU;
                Ex = -Jx.dEps; Ey = -Jy.dEps;
                Px = -Jx.dPhi; Py = -Jy.dPhi;
                dv = dv_dU(U);
                dT = dT_dU(U, gas_);
            }
            if (bulk) {
                if (!L.viscous) dv = dv_dU(U);
                const Vec2 v = Vec2(U[1], U[2]) / U[0];
                // x-column of G*: (0, divv, 0, divv v_x + phi_x / Pr_beta).
                Bx.row(3) -= beta * divv * dv.row(0);
                By.row(3) -= beta * divv * dv.row(1);
                const double ddivv = 1.5;  // d(div v)/d eps_11 = d/d eps_22
                for (int a = 0; a < 2; ++a) {
                    Ex(1, a) -= beta * ddivv;
                    Ex(3, a) -= beta * ddivv * v.x();
                    Ey(2, a) -= beta * ddivv;
                    Ey(3, a) -= beta * ddivv * v.y();
                }
                Px(3, 0) -= beta / shock_.pr_beta;
                Py(3, 1) -= beta / shock_.pr_beta;
            }

            for (int i = 0; i < L.n_en; ++i) {
                const double Ni = N(q, i);
                const double dx = g.dndx(q, i), dy = g.dndy(q, i);
                for (int j = 0; j < L.n_en; ++j) {
                    const double Nj = N(q, j);
                    const double mass = w * Ni * Nj;
                    for (int m = 0; m < nvar; ++m) {
                        for (int n = 0; n < nvar; ++n)
                            out.a_zz(L.u(i, m), L.u(j, n)) -=
                                w * (dx * Bx(m, n) + dy * By(m, n)) * Nj;
                        out.a_zz(L.u(i, m), L.u(j, m)) += mass * inv_dt;
                    }
                    if (laplacian) {
                        const double lap = w * eps_art *
                            (dx * g.dndx(q, j) + dy * g.dndy(q, j));
                        for (int m = 0; m < nvar; ++m)
                            out.a_zz(L.u(i, m), L.u(j, m)) += lap;
                    }
                    if (!L.viscous) continue;
                    for (int m = 0; m < nvar; ++m) {
                        for (int a = 0; a < msd; ++a)
                            out.a_zz(L.u(i, m), L.eps(j, a)) -=
                                w * (dx * Ex(m, a) + dy * Ey(m, a)) * Nj;
                        for (int d = 0; d < nsd; ++d)
                            out.a_zz(L.u(i, m), L.phi(j, d)) -=
                                w * (dx * Px(m, d) + dy * Py(m, d)) * Nj;
                    }
                    const Vec2 cgrad[msd] = {
                        Vec2(4.0 / 3.0 * dx, -2.0 / 3.0 * dy),
                        Vec2(-2.0 / 3.0 * dx, 4.0 / 3.0 * dy),
                        Vec2(2.0 * dy, 2.0 * dx)};
                    const double wvq[msd] = {1.0, 1.0, 2.0};
                    for (int a = 0; a < msd; ++a) {
                        out.a_zz(L.eps(i, a), L.eps(j, a)) += mass * wvq[a];
                        const Eigen::RowVector4d row =
                            cgrad[a].transpose() * dv;
                        for (int n = 0; n < nvar; ++n)
                            out.a_zz(L.eps(i, a), L.u(j, n)) += w * row[n] * Nj;
                    }
                    for (int d = 0; d < nsd; ++d) {
                        out.a_zz(L.phi(i, d), L.phi(j, d)) += mass;
                        const double grad_d = d == 0 ? dx : dy;
                        for (int n = 0; n < nvar; ++n)
                            out.a_zz(L.phi(i, d), L.u(j, n)) +=
                                w * grad_d * dT[n] * Nj;
                    }
                }
            }
        }
    }

    /// Central finite difference of the inviscid trace flux in the trace
    /// state; captures the stabilisation-matrix dependence for every scheme.
    Mat4 fd_trace_flux_duhat(const Vec4& uhat, const Vec4& ue,
                             const Vec2& n) const {
        Mat4 out;
        const Vec4 sides[1] = {ue};
        for (int j = 0; j < nvar; ++j) {
            const double h = 6e-6 * std::max(1.0, std::abs(uhat[j]));
            Vec4 up = uhat, dn = uhat;
            up[j] += h;
            dn[j] -= h;
            out.col(j) = (trace_flux(riemann_, up, ue, n, gas_, sides) -
                          trace_flux(riemann_, dn, ue, n, gas_, sides)) /
                         (2.0 * h);
        }
        return out;
    }

    /// Finite difference of the inviscid trace flux in the element-side
    /// state (HLLE: the wave-speed candidates involve u_e).
    Mat4 fd_trace_flux_due(const Vec4& uhat, const Vec4& ue,
                           const Vec2& n) const {
        Mat4 out;
        for (int j = 0; j < nvar; ++j) {
            const double h = 6e-6 * std::max(1.0, std::abs(ue[j]));
            Vec4 up = ue, dn = ue;
            up[j] += h;
            dn[j] -= h;
            const Vec4 sp[1] = {up}, sn[1] = {dn};
            out.col(j) = (trace_flux(riemann_, uhat, up, n, gas_, sp) -
                          trace_flux(riemann_, uhat, dn, n, gas_, sn)) /
                         (2.0 * h);
        }
        return out;
    }

    void face_terms(int e, int lf, const VecX& z, const VecX& uhat,
                    const SmoothedField& art, bool with_jacobian,
                    LocalResult& out) const {
        const auto& L = layout_;
        const bool rev = geo_.side_reversed(e, lf);
        const std::vector<int> snodes = geo_.side_nodes(lf, rev);
        const SideGeometry& sg = geo_.side(e, lf);
        const MatX& ts = geo_.trace_shape();
        const int nq = static_cast<int>(sg.wds.size());
        const Face& face = geo_.mesh().face(geo_.mesh().element_faces(e)[lf]);
        const BoundaryCondition* bc =
            face.boundary() ? &boundary_.at(face.tag) : nullptr;

        NodalView u_nodal(z.data(), L.n_en, nvar);
        // Face-node values in canonical order.
        MatX ue_f(L.n_fn, nvar), uh_f(L.n_fn, nvar);
        MatX eps_f = MatX::Zero(L.n_fn, msd), phi_f = MatX::Zero(L.n_fn, nsd);
        for (int j = 0; j < L.n_fn; ++j) {
            ue_f.row(j) = u_nodal.row(snodes[j]);
            for (int m = 0; m < nvar; ++m) uh_f(j, m) = uhat[L.hat(lf, j, m)];
            if (L.viscous) {
                for (int a = 0; a < msd; ++a)
                    eps_f(j, a) = z[L.eps(snodes[j], a)];
                for (int d = 0; d < nsd; ++d)
                    phi_f(j, d) = z[L.phi(snodes[j], d)];
            }
        }
        // Nodal trace velocity/temperature and their nodal derivatives.
        MatX vhat_f(L.n_fn, nsd);
        VecX that_f(L.n_fn);
        std::vector<Eigen::Matrix<double, nsd, nvar>> dv_f(L.n_fn);
        std::vector<Vec4> dt_f(L.n_fn);
        if (L.viscous) {
            for (int j = 0; j < L.n_fn; ++j) {
                const Vec4 uh = uh_f.row(j).transpose();
                const Primitives prim = primitives(uh, gas_);
                vhat_f.row(j) = prim.v.transpose();
                that_f[j] = prim.T;
                if (with_jacobian) {
                    dv_f[j] = dv_dU(uh);
                    dt_f[j] = dT_dU(uh, gas_);
                }
            }
        }
        const MatX uq = ts * ue_f;
        const MatX uhq = ts * uh_f;
        const MatX epsq = ts * eps_f;
        const MatX phiq = ts * phi_f;
        MatX vhatq, thatq;
        if (L.viscous) {
            vhatq = ts * vhat_f;
            thatq = ts * that_f;
        }
        const bool bulk = shock_.mode == ShockMode::bulk && !art.empty();
        const Vec3 art_corners = art.corners(e);
        const MatX& fhat = face_hat_[lf][rev];

        for (int q = 0; q < nq; ++q) {
            const double w = sg.wds[q];
            const Vec2 n = sg.normal.row(q).transpose();
            const Vec4 ue = uq.row(q).transpose();
            const Vec4 uh = uhq.row(q).transpose();
            const Vec3 eps = epsq.row(q).transpose();
            const Vec2 phi = phiq.row(q).transpose();
            const Vec4 sides[1] = {ue};
            const Stabilization stab =
                stabilization_tau(riemann_, uh, n, gas_, sides);

            // Trace flux (F-hat - G-hat) . n at this point.
            Vec4 H = inviscid_flux(uh, gas_) * n + stab.tau * (ue - uh);
            double beta = 0.0, divv = 0.0;
            if (L.viscous) {
                H -= viscous_flux_normal(uh, eps, phi, n, gas_);
                H += tau_d_.cwiseProduct(ue - uh);
            }
            if (bulk) {
                beta = fhat.row(q).dot(art_corners);
                divv = 1.5 * (eps[0] + eps[1]);
                H -= bulk_viscous_flux(uh, phi, beta, divv, shock_, gas_) * n;
            }

            for (int j = 0; j < L.n_fn; ++j) {
                const double tj = w * ts(q, j);
                for (int m = 0; m < nvar; ++m)
                    out.r_z[L.u(snodes[j], m)] += tj * H[m];
            }
            // Mixed-equation face terms with the nodal trace quantities.
            if (L.viscous) {
                const Vec2 vh = vhatq.row(q).transpose();
                const double Th = thatq(q, 0);
                const Vec2 cn[msd] = {
                    Vec2(4.0 / 3.0 * n.x(), -2.0 / 3.0 * n.y()),
                    Vec2(-2.0 / 3.0 * n.x(), 4.0 / 3.0 * n.y()),
                    Vec2(2.0 * n.y(), 2.0 * n.x())};
                for (int j = 0; j < L.n_fn; ++j) {
                    const double tj = w * ts(q, j);
                    for (int a = 0; a < msd; ++a)
                        out.r_z[L.eps(snodes[j], a)] -= tj * cn[a].dot(vh);
                    for (int d = 0; d < nsd; ++d)
                        out.r_z[L.phi(snodes[j], d)] -= tj * Th * n[d];
                }
            }

            // Trace rows: transmission flux on interior faces, boundary
            // operator on boundary faces.
            BoundaryFlux bf;
            if (bc) {
                bf = boundary_flux(bc->at(sg.xq.row(q).transpose()), ue, uh,
                                   eps, phi, n, gas_);
                for (int j = 0; j < L.n_fn; ++j) {
                    const double tj = w * ts(q, j);
                    for (int m = 0; m < nvar; ++m)
                        out.r_hat[L.hat(lf, j, m)] += tj * bf.value[m];
                }
            } else {
                for (int j = 0; j < L.n_fn; ++j) {
                    const double tj = w * ts(q, j);
                    for (int m = 0; m < nvar; ++m)
                        out.r_hat[L.hat(lf, j, m)] += tj * H[m];
                }
            }
            if (!with_jacobian) continue;

            // Derivatives of H.  The HLLE wave speeds scan the element-side
            // state, so its stabilisation depends on u_e as well; a finite
            // difference captures that extra coupling.
            Mat4 dH_due = riemann_.scheme == RiemannScheme::hlle
                              ? fd_trace_flux_due(uh, ue, n)
                              : stab.tau;
            Mat4 dH_duh = fd_trace_flux_duhat(uh, ue, n);
            Eigen::Matrix<double, nvar, msd> dH_deps;
            Eigen::Matrix<double, nvar, nsd> dH_dphi;
            dH_deps.setZero();
            dH_dphi.setZero();
            if (L.viscous) {
                dH_due.diagonal() += tau_d_;
                dH_duh.diagonal() -= tau_d_;
                const auto Jv =
                    viscous_flux_normal_jacobian(uh, eps, phi, n, gas_);
                dH_duh -= Jv.dU;
                dH_deps -= Jv.dEps;
                dH_dphi -= Jv.dPhi;
            }
            if (bulk) {
                const Vec2 vh2 = Vec2(uh[1], uh[2]) / uh[0];
                const auto dvh = dv_dU(uh);
                dH_duh.row(3) -= beta * divv * (n.transpose() * dvh);
                for (int a = 0; a < 2; ++a) {
                    dH_deps(1, a) -= beta * 1.5 * n.x();
                    dH_deps(2, a) -= beta * 1.5 * n.y();
                    dH_deps(3, a) -= beta * 1.5 * vh2.dot(n);
                }
                dH_dphi(3, 0) -= beta / shock_.pr_beta * n.x();
                dH_dphi(3, 1) -= beta / shock_.pr_beta * n.y();
            }

            for (int jr = 0; jr < L.n_fn; ++jr) {
                const double tr = w * ts(q, jr);
                for (int jc = 0; jc < L.n_fn; ++jc) {
                    const double tc = ts(q, jc);
                    const double wrc = tr * tc;
                    // Conservation rows.
                    for (int m = 0; m < nvar; ++m)
                        for (int n2 = 0; n2 < nvar; ++n2) {
                            out.a_zz(L.u(snodes[jr], m), L.u(snodes[jc], n2)) +=
                                wrc * dH_due(m, n2);
                            out.a_zh(L.u(snodes[jr], m), L.hat(lf, jc, n2)) +=
                                wrc * dH_duh(m, n2);
                        }
                    if (L.viscous) {
                        for (int m = 0; m < nvar; ++m) {
                            for (int a = 0; a < msd; ++a)
                                out.a_zz(L.u(snodes[jr], m),
                                         L.eps(snodes[jc], a)) +=
                                    wrc * dH_deps(m, a);
                            for (int d = 0; d < nsd; ++d)
                                out.a_zz(L.u(snodes[jr], m),
                                         L.phi(snodes[jc], d)) +=
                                    wrc * dH_dphi(m, d);
                        }
                        // Mixed rows: trace velocity/temperature derivatives
                        // act through the nodal values.
                        const Vec2 cn[msd] = {
                            Vec2(4.0 / 3.0 * n.x(), -2.0 / 3.0 * n.y()),
                            Vec2(-2.0 / 3.0 * n.x(), 4.0 / 3.0 * n.y()),
                            Vec2(2.0 * n.y(), 2.0 * n.x())};
                        for (int a = 0; a < msd; ++a) {
                            const Eigen::RowVector4d row =
                                cn[a].transpose() * dv_f[jc];
                            for (int n2 = 0; n2 < nvar; ++n2)
                                out.a_zh(L.eps(snodes[jr], a),
                                         L.hat(lf, jc, n2)) -= wrc * row[n2];
                        }
                        for (int d = 0; d < nsd; ++d)
                            for (int n2 = 0; n2 < nvar; ++n2)
                                out.a_zh(L.phi(snodes[jr], d),
                                         L.hat(lf, jc, n2)) -=
                                    wrc * n[d] * dt_f[jc][n2];
                    }
                    // Trace rows.
                    if (bc) {
                        for (int m = 0; m < nvar; ++m) {
                            for (int n2 = 0; n2 < nvar; ++n2) {
                                out.a_hz(L.hat(lf, jr, m),
                                         L.u(snodes[jc], n2)) +=
                                    wrc * bf.d_ue(m, n2);
                                out.a_hh(L.hat(lf, jr, m),
                                         L.hat(lf, jc, n2)) +=
                                    wrc * bf.d_uhat(m, n2);
                            }
                            if (L.viscous) {
                                for (int a = 0; a < msd; ++a)
                                    out.a_hz(L.hat(lf, jr, m),
                                             L.eps(snodes[jc], a)) +=
                                        wrc * bf.d_eps(m, a);
                                for (int d = 0; d < nsd; ++d)
                                    out.a_hz(L.hat(lf, jr, m),
                                             L.phi(snodes[jc], d)) +=
                                        wrc * bf.d_phi(m, d);
                            }
                        }
                    } else {
                        for (int m = 0; m < nvar; ++m) {
                            for (int n2 = 0; n2 < nvar; ++n2) {
                                out.a_hz(L.hat(lf, jr, m),
                                         L.u(snodes[jc], n2)) +=
                                    wrc * dH_due(m, n2);
                                out.a_hh(L.hat(lf, jr, m),
                                         L.hat(lf, jc, n2)) +=
                                    wrc * dH_duh(m, n2);
                            }
                            if (L.viscous) {
                                for (int a = 0; a < msd; ++a)
                                    out.a_hz(L.hat(lf, jr, m),
                                             L.eps(snodes[jc], a)) +=
                                        wrc * dH_deps(m, a);
                                for (int d = 0; d < nsd; ++d)
                                    out.a_hz(L.hat(lf, jr, m),
                                             L.phi(snodes[jc], d)) +=
                                        wrc * dH_dphi(m, d);
                            }
                        }
                    }
                }
            }
        }
    }

    const GeometryCache& geo_;
    GasModel gas_;
    RiemannConfig riemann_;
    std::map<int, BoundaryCondition> boundary_;
    SensorConfig shock_;
    std::function<Vec4(const Vec2&)> source_;
    Vec4 tau_d_;
    LocalLayout layout_;
    MatX vol_hat_;
    std::array<std::array<MatX, 2>, 3> face_hat_;
};

}  // namespace hdgflow
