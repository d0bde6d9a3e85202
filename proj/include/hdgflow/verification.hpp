/** \file verification.hpp
 * \brief Error norms, observed convergence rates, entropy deviation and
 *        surface force coefficients for the verification cases.
 */
#pragma once

#include <functional>
#include <vector>

#include "hdgflow/newton.hpp"
#include "hdgflow/viscous.hpp"

namespace hdgflow {

/// Per-variable L2 error norms of one solve.  Momentum combines both
/// components, and the mixed-field entries combine their stored components;
/// both are zero when the corresponding exact field is not supplied.
struct ErrorNorms {
    double rho = 0.0;
    double momentum = 0.0;
    double energy = 0.0;
    double eps = 0.0;
    double phi = 0.0;

    /// Combined norm of the conserved-variable error.
    double conserved() const {
        return std::sqrt(rho * rho + momentum * momentum + energy * energy);
    }
};

/// L2 errors of the element solution against exact fields, integrated with
/// the cached volume rule (order 2k + 4, comfortably above the 2k + 2 needed
/// to keep the quadrature error below the interpolation error).
inline ErrorNorms l2_error(const Solver& solver,
                           const std::function<Vec4(const Vec2&)>& exact,
                           const std::function<Vec3(const Vec2&)>& exact_eps = {},
                           const std::function<Vec2(const Vec2&)>& exact_phi = {}) {
    const GeometryCache& geo = solver.geometry();
    const LocalLayout& L = solver.layout();
    const MatX& shape = geo.volume_shape();
    const bool mixed = L.viscous && (exact_eps || exact_phi);

    double acc[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
    MatX un(L.n_en, nvar), en(L.n_en, msd), pn(L.n_en, nsd);
    for (int e = 0; e < geo.mesh().num_elements(); ++e) {
        const ElementGeometry& eg = geo.element(e);
        const VecX& z = solver.element_state(e);
        for (int i = 0; i < L.n_en; ++i)
            for (int m = 0; m < nvar; ++m) un(i, m) = z[L.u(i, m)];
        const MatX uq = shape * un;
        MatX eq, pq;
        if (mixed) {
            for (int i = 0; i < L.n_en; ++i) {
                for (int a = 0; a < msd; ++a) en(i, a) = z[L.eps(i, a)];
                for (int d = 0; d < nsd; ++d) pn(i, d) = z[L.phi(i, d)];
            }
            eq = shape * en;
            pq = shape * pn;
        }
        for (Eigen::Index q = 0; q < eg.wdet.size(); ++q) {
            const Vec2 x = eg.xq.row(q).transpose();
            const double w = eg.wdet[q];
            const Vec4 du = uq.row(q).transpose() - exact(x);
            acc[0] += w * du[0] * du[0];
            acc[1] += w * (du[1] * du[1] + du[2] * du[2]);
            acc[2] += w * du[3] * du[3];
            if (mixed && exact_eps) {
                const Vec3 de = eq.row(q).transpose() - exact_eps(x);
                acc[3] += w * de.squaredNorm();
            }
            if (mixed && exact_phi) {
                const Vec2 dp = pq.row(q).transpose() - exact_phi(x);
                acc[4] += w * dp.squaredNorm();
            }
        }
    }
    ErrorNorms out;
    out.rho = std::sqrt(acc[0]);
    out.momentum = std::sqrt(acc[1]);
    out.energy = std::sqrt(acc[2]);
    out.eps = std::sqrt(acc[3]);
    out.phi = std::sqrt(acc[4]);
    return out;
}

/// Observed convergence rates of an (h, error) table.
struct RateEstimate {
    double slope = 0.0;              ///< least-squares slope of log e vs log h
    double last = 0.0;               ///< pairwise rate of the finest interval
    std::vector<double> pairwise;    ///< rate of every interval, coarse first
};

/// Fit the observed order of convergence.  Requires at least two rows with
/// strictly positive mesh sizes and errors; invariant under uniform scaling
/// of all errors.
inline RateEstimate convergence_rate(const std::vector<double>& h,
                                     const std::vector<double>& err) {
    const size_t n = h.size();
    if (n != err.size())
        throw DegenerateTable("convergence_rate: h and error sizes differ");
    if (n < 2) throw DegenerateTable("convergence_rate: need at least 2 rows");
    for (size_t i = 0; i < n; ++i)
        if (!(h[i] > 0.0) || !(err[i] > 0.0))
            throw DegenerateTable("convergence_rate: nonpositive entry at row " +
                                  std::to_string(i));

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = std::log(h[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (!(std::abs(denom) > 0.0))
        throw DegenerateTable("convergence_rate: all mesh sizes equal");

    RateEstimate out;
    out.slope = (n * sxy - sx * sy) / denom;
    out.pairwise.reserve(n - 1);
    for (size_t i = 1; i < n; ++i) {
        if (h[i] == h[i - 1])
            throw DegenerateTable("convergence_rate: repeated mesh size");
        out.pairwise.push_back(std::log(err[i] / err[i - 1]) /
                               std::log(h[i] / h[i - 1]));
    }
    out.last = out.pairwise.back();
    return out;
}

/// Pointwise entropy deviation (p / p_inf)(rho_inf / rho)^gamma - 1; zero for
/// any state isentropic with the free stream.  Admissibility failures
/// propagate from the primitive conversion.
inline double entropy_deviation(const Vec4& u, const GasModel& gas) {
    const Primitives q = primitives(u, gas);
    return (q.p / gas.p_inf()) * std::pow(1.0 / q.rho, gas.gamma) - 1.0;
}

/// Nodal entropy-deviation field, one value per solution node per element.
inline std::vector<VecX> entropy_field(const Solver& solver) {
    const LocalLayout& L = solver.layout();
    const GasModel& gas = solver.local().gas();
    std::vector<VecX> out(static_cast<size_t>(solver.mesh().num_elements()));
    for (int e = 0; e < solver.mesh().num_elements(); ++e) {
        const VecX& z = solver.element_state(e);
        VecX field(L.n_en);
        for (int i = 0; i < L.n_en; ++i) {
            Vec4 u;
            for (int m = 0; m < nvar; ++m) u[m] = z[L.u(i, m)];
            field[i] = entropy_deviation(u, gas);
        }
        out[static_cast<size_t>(e)] = std::move(field);
    }
    return out;
}

/// L2 norm of the entropy deviation over the boundary faces carrying `tag`,
/// normalised by the surface length:  sqrt( int_G ev^2 ds / |G| ).
inline double entropy_surface_norm(const Solver& solver, int tag) {
    const GeometryCache& geo = solver.geometry();
    const LocalLayout& L = solver.layout();
    const GasModel& gas = solver.local().gas();
    const Mesh& mesh = solver.mesh();

    double acc = 0.0, length = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& face = mesh.face(f);
        if (!face.boundary() || face.tag != tag) continue;
        const int e = face.left_elem, lf = face.left_face;
        const auto snodes = geo.side_nodes(lf, face.left_reversed);
        const VecX& z = solver.element_state(e);
        MatX uf(L.n_fn, nvar);
        for (int j = 0; j < L.n_fn; ++j)
            for (int m = 0; m < nvar; ++m) uf(j, m) = z[L.u(snodes[j], m)];
        const MatX uq = geo.trace_shape() * uf;
        const SideGeometry& sg = geo.side(e, lf);
        for (Eigen::Index q = 0; q < sg.wds.size(); ++q) {
            const double ev = entropy_deviation(uq.row(q).transpose(), gas);
            acc += sg.wds[q] * ev * ev;
            length += sg.wds[q];
        }
    }
    if (!(length > 0.0))
        throw MissingSpec("entropy_surface_norm: no boundary face carries tag " +
                          std::to_string(tag));
    return std::sqrt(acc / length);
}

/// One boundary sample of the pressure and skin-friction coefficients.
struct SurfaceSample {
    Vec2 x = Vec2::Zero();       ///< face-node position
    Vec2 normal = Vec2::Zero();  ///< outward unit normal (out of the fluid)
    double cp = 0.0;
    double cf = 0.0;             ///< zero when friction is not requested
};

/// Surface force summary over one tagged boundary.
struct SurfaceCoefficients {
    std::vector<SurfaceSample> samples;  ///< face-node values, faces in id order
    double cl = 0.0;                     ///< lift coefficient
    double cd = 0.0;                     ///< drag coefficient
    double length = 0.0;                 ///< arc length of the surface
};

namespace detail {

/// Physical tangent direction of the reference-face parameter.
inline Vec2 reference_face_direction(int lf) {
    switch (lf) {
        case 0: return Vec2(1.0, 0.0);
        case 1: return Vec2(-1.0, 1.0);
        default: return Vec2(0.0, -1.0);
    }
}

}  // namespace detail

/// Pressure and friction coefficients on the boundary faces carrying `tag`.
///
/// Cp = (p - p_inf) / (rho_inf v_inf^2 / 2) and Cf = (sigma n) . t over the
/// same dynamic pressure, sampled at the face nodes with t the unit tangent
/// of the counterclockwise boundary traversal.  Cl and Cd integrate the
/// force the fluid exerts on the boundary, F = int (p - p_inf) n - sigma n
/// ds with n
/// pointing out of the fluid, resolved against `flow_dir` (drag) and its
/// 90-degree counterclockwise rotation (lift).  With `friction` false the
/// viscous stress is omitted everywhere; requesting it on an inviscid run
/// throws MissingViscousData.
inline SurfaceCoefficients surface_coefficients(const Solver& solver, int tag,
                                                const Vec2& flow_dir,
                                                bool friction) {
    const GeometryCache& geo = solver.geometry();
    const LocalLayout& L = solver.layout();
    const GasModel& gas = solver.local().gas();
    const Mesh& mesh = solver.mesh();
    if (friction && !L.viscous)
        throw MissingViscousData(
            "surface_coefficients: friction requested on an inviscid run");

    const double q_inf = 0.5;  // rho_inf v_inf^2 / 2 in free-stream units
    const double p_inf = gas.p_inf();
    const Vec2 dhat = flow_dir.normalized();
    const Vec2 lhat(-dhat.y(), dhat.x());

    auto stress = [&](const Vec4& u, const Vec3& eps, const Vec2& n) -> Vec2 {
        const Primitives pr = primitives(u, gas);
        const double mu = sutherland_mu(pr.T, gas);
        return (mu / gas.reynolds) * (voigt_to_tensor(eps) * n);
    };

    SurfaceCoefficients out;
    Vec2 force = Vec2::Zero();
    bool found = false;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& face = mesh.face(f);
        if (!face.boundary() || face.tag != tag) continue;
        found = true;
        const int e = face.left_elem, lf = face.left_face;
        const auto snodes = geo.side_nodes(lf, face.left_reversed);
        const VecX& z = solver.element_state(e);

        // Nodal samples: geometry map at the side's solution nodes gives the
        // position and the tangent, hence the outward normal.
        MatX ref(L.n_fn, 2);
        const MatX& all_ref = geo.solution_element().nodes();
        for (int j = 0; j < L.n_fn; ++j) ref.row(j) = all_ref.row(snodes[j]);
        const auto mapped = map_element(mesh, e, geo.geometry_element(), ref);
        // Element-local traversal direction: counterclockwise around the
        // fluid, so (t_y, -t_x) is the outward normal (as in the side cache).
        const Vec2 dir = detail::reference_face_direction(lf);
        for (int j = 0; j < L.n_fn; ++j) {
            Vec4 u;
            for (int m = 0; m < nvar; ++m) u[m] = z[L.u(snodes[j], m)];
            const Vec2 t = (mapped[j].jacobian * dir).normalized();
            const Vec2 n(t.y(), -t.x());
            SurfaceSample smp;
            smp.x = mapped[j].x;
            smp.normal = n;
            smp.cp = (primitives(u, gas).p - p_inf) / q_inf;
            if (friction) {
                Vec3 eps;
                for (int a = 0; a < msd; ++a) eps[a] = z[L.eps(snodes[j], a)];
                smp.cf = stress(u, eps, n).dot(t) / q_inf;
            }
            out.samples.push_back(smp);
        }

        // Force integrals by face quadrature.
        MatX uf(L.n_fn, nvar);
        for (int j = 0; j < L.n_fn; ++j)
            for (int m = 0; m < nvar; ++m) uf(j, m) = z[L.u(snodes[j], m)];
        const MatX uq = geo.trace_shape() * uf;
        MatX eq;
        if (friction) {
            MatX ef(L.n_fn, msd);
            for (int j = 0; j < L.n_fn; ++j)
                for (int a = 0; a < msd; ++a) ef(j, a) = z[L.eps(snodes[j], a)];
            eq = geo.trace_shape() * ef;
        }
        const SideGeometry& sg = geo.side(e, lf);
        for (Eigen::Index q = 0; q < sg.wds.size(); ++q) {
            const Vec2 n = sg.normal.row(q).transpose();
            const Vec4 u = uq.row(q).transpose();
            Vec2 df = (primitives(u, gas).p - p_inf) * n;
            if (friction) df -= stress(u, eq.row(q).transpose(), n);
            force += sg.wds[q] * df;
            out.length += sg.wds[q];
        }
    }
    if (!found)
        throw MissingSpec("surface_coefficients: no boundary face carries tag " +
                          std::to_string(tag));
    out.cd = force.dot(dhat) / q_inf;
    out.cl = force.dot(lhat) / q_inf;
    return out;
}

/// Convenience overload: friction included exactly when the run is viscous.
inline SurfaceCoefficients surface_coefficients(
    const Solver& solver, int tag, const Vec2& flow_dir = Vec2(1.0, 0.0)) {
    return surface_coefficients(solver, tag, flow_dir,
                                solver.layout().viscous);
}

}  // namespace hdgflow
