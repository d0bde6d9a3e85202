/** \file newton.hpp
 * \brief Steady-state driver: backward-Euler pseudo-time continuation with a
 *        Newton solve of the condensed trace system at every step.
 */
#pragma once

#include <algorithm>
#include <optional>

#include "hdgflow/assembler.hpp"

namespace hdgflow {

/// What to do when the march produces an inadmissible state.
enum class NonPhysicalPolicy { abort_run, halve_dt };

/// Pseudo-time and Newton controls.
struct TimeConfig {
    double dt = inf;           ///< pseudo-time step; inf solves steady directly
    double growth = 1.0;       ///< dt multiplier per accepted step
    int max_steps = 200;       ///< pseudo-time budget
    int max_newton = 25;       ///< inner Newton budget per step
    double newton_rel_tol = 1e-10;
    double newton_abs_tol = 1e-11;
    double steady_tol = 1e-6;  ///< continuity steady-residual target
    double steady_drop = 1e-3; ///< alternative: drop from the running maximum
    NonPhysicalPolicy policy = NonPhysicalPolicy::abort_run;
    int threads = 1;
};

/// One line of the march history.
struct StepRecord {
    int step = 0;
    double time = 0.0;
    double res_continuity = 0.0;
    double res_total = 0.0;
    double min_rho = 0.0;
    double min_p = 0.0;
    int newton_iters = 0;
};

/// March outcome.
struct SolveReport {
    std::vector<StepRecord> history;
    bool converged = false;
    double trace_rel_residual = 0.0;  ///< last linear-solve residual
    std::vector<double> newton_residuals;  ///< inner history of the last step
};

/// Residual diagnostics at the current state.
struct ResidualNorms {
    double total = 0.0;
    double continuity = 0.0;
    double sensor_max = 0.0;  ///< largest artificial viscosity in the field
};

/// Owns the discrete state (element unknowns plus global trace) and runs the
/// pseudo-transient continuation.
class Solver {
  public:
    Solver(Mesh mesh, int degree, const GasModel& gas,
           const RiemannConfig& riemann,
           std::map<int, BoundaryCondition> boundary, SensorConfig shock = {},
           std::function<Vec4(const Vec2&)> source = {})
        : geo_(std::move(mesh), degree),
          local_(geo_, gas, riemann, std::move(boundary), shock,
                 std::move(source)) {
        map_.n_fn = local_.layout().n_fn;
        map_.num_faces = geo_.mesh().num_faces();
        build_node_coordinates();
        set_freestream();
    }

    /// The assembler holds a reference into this object's geometry cache, so
    /// the solver must stay where it was constructed.
    Solver(const Solver&) = delete;
    Solver& operator=(const Solver&) = delete;

    const GeometryCache& geometry() const { return geo_; }
    const LocalAssembler& local() const { return local_; }
    const LocalLayout& layout() const { return local_.layout(); }
    const TraceMap& trace_map() const { return map_; }
    const Mesh& mesh() const { return geo_.mesh(); }

    const VecX& element_state(int e) const {
        return z_[static_cast<size_t>(e)];
    }
    VecX& element_state(int e) { return z_[static_cast<size_t>(e)]; }
    const VecX& trace_state() const { return uhat_; }
    VecX& trace_state() { return uhat_; }

    /// Physical positions of the solution nodes of element e (n_en x 2).
    const MatX& element_node_coords(int e) const {
        return node_x_[static_cast<size_t>(e)];
    }

    /// Physical positions of the trace nodes of face f in canonical order.
    MatX face_node_coords(int f) const {
        const Face& face = mesh().face(f);
        const auto snodes = geo_.side_nodes(face.left_face, face.left_reversed);
        MatX out(layout().n_fn, 2);
        for (int j = 0; j < layout().n_fn; ++j)
            out.row(j) = node_x_[static_cast<size_t>(face.left_elem)].row(snodes[j]);
        return out;
    }

    /// Reset the whole state to the uniform free stream.
    void set_freestream(const Vec2& direction = Vec2(1.0, 0.0)) {
        const Vec4 uinf = local_.gas().freestream(direction);
        set_state([&](const Vec2&) { return uinf; });
    }

    /// Interpolate a conserved-state field (and, for viscous runs, optional
    /// mixed fields) into the element and trace unknowns.
    void set_state(const std::function<Vec4(const Vec2&)>& state,
                   const std::function<Vec3(const Vec2&)>& eps = {},
                   const std::function<Vec2(const Vec2&)>& phi = {}) {
        const auto& L = layout();
        z_.assign(static_cast<size_t>(mesh().num_elements()),
                  VecX::Zero(L.nz()));
        for (int e = 0; e < mesh().num_elements(); ++e) {
            VecX& z = z_[static_cast<size_t>(e)];
            for (int i = 0; i < L.n_en; ++i) {
                const Vec2 x = node_x_[static_cast<size_t>(e)].row(i).transpose();
                const Vec4 u = state(x);
                for (int m = 0; m < nvar; ++m) z[L.u(i, m)] = u[m];
                if (L.viscous) {
                    const Vec3 ev = eps ? eps(x) : Vec3::Zero();
                    const Vec2 pv = phi ? phi(x) : Vec2::Zero();
                    for (int a = 0; a < msd; ++a) z[L.eps(i, a)] = ev[a];
                    for (int d = 0; d < nsd; ++d) z[L.phi(i, d)] = pv[d];
                }
            }
        }
        uhat_ = VecX::Zero(map_.dofs());
        for (int f = 0; f < mesh().num_faces(); ++f) {
            const MatX xf = face_node_coords(f);
            for (int j = 0; j < L.n_fn; ++j) {
                const Vec4 u = state(xf.row(j).transpose());
                for (int m = 0; m < nvar; ++m)
                    uhat_[map_.global(f, j, m)] = u[m];
            }
        }
    }

    /// Smallest nodal density/pressure over element and trace nodes.
    std::pair<double, double> nodal_extrema() const {
        const auto& L = layout();
        const GasModel& gas = local_.gas();
        double rho = inf, p = inf;
        auto probe = [&](const Vec4& u) {
            const Admissibility a = admissible(u, gas);
            rho = std::min(rho, a.rho);
            p = std::min(p, a.p);
        };
        for (int e = 0; e < mesh().num_elements(); ++e)
            for (int i = 0; i < L.n_en; ++i) {
                Vec4 u;
                for (int m = 0; m < nvar; ++m)
                    u[m] = z_[static_cast<size_t>(e)][L.u(i, m)];
                probe(u);
            }
        for (int f = 0; f < mesh().num_faces(); ++f)
            for (int j = 0; j < L.n_fn; ++j) {
                Vec4 u;
                for (int m = 0; m < nvar; ++m)
                    u[m] = uhat_[map_.global(f, j, m)];
                probe(u);
            }
        return {rho, p};
    }

    /// Frozen artificial-viscosity field for the current state.
    SmoothedField shock_field() const {
        const auto& L = layout();
        const SensorConfig& sc = local_.shock();
        if (sc.mode == ShockMode::off) return {};
        if (sc.mode == ShockMode::laplacian) {
            MatX rho(mesh().num_elements(), L.n_en);
            for (int e = 0; e < mesh().num_elements(); ++e)
                for (int i = 0; i < L.n_en; ++i)
                    rho(e, i) = z_[static_cast<size_t>(e)][L.u(i, 0)];
            return laplacian_viscosity_field(mesh(), geo_.solution_element(),
                                             rho, sc);
        }
        MatX divv(mesh().num_elements(), geo_.volume_rule().size());
        for (int e = 0; e < mesh().num_elements(); ++e)
            divv.row(e) =
                local_.dilatation_samples(e, z_[static_cast<size_t>(e)])
                    .transpose();
        return bulk_viscosity_field(mesh(), divv,
                                    geo_.solution_element().degree(),
                                    local_.gas(), sc);
    }

    /// Steady residual (dt = inf) of the current state; no Jacobian work.
    ResidualNorms steady_residual(int threads = 1) const {
        const SmoothedField art = shock_field();
        std::vector<VecX> rz(static_cast<size_t>(mesh().num_elements()));
        VecX rhat = VecX::Zero(map_.dofs());
        std::vector<VecX> rhat_parts(static_cast<size_t>(mesh().num_elements()));
        for_each_element(mesh().num_elements(), threads, [&](int e) {
            const VecX ue = gather_element_trace(mesh(), map_, layout(), e, uhat_);
            LocalResult lr =
                local_.assemble(e, z_[static_cast<size_t>(e)], ue,
                                u_block(e), inf, art, false);
            rz[static_cast<size_t>(e)] = std::move(lr.r_z);
            rhat_parts[static_cast<size_t>(e)] = std::move(lr.r_hat);
        });
        for (int e = 0; e < mesh().num_elements(); ++e)
            scatter_hat(e, rhat_parts[static_cast<size_t>(e)], rhat);
        ResidualNorms out;
        out.sensor_max = art.max_value();
        double tot = rhat.squaredNorm(), cont = 0.0;
        for (int e = 0; e < mesh().num_elements(); ++e) {
            const VecX& r = rz[static_cast<size_t>(e)];
            tot += r.squaredNorm();
            for (int i = 0; i < layout().n_en; ++i)
                cont += r[layout().u(i, 0)] * r[layout().u(i, 0)];
        }
        out.total = std::sqrt(tot);
        out.continuity = std::sqrt(cont);
        return out;
    }

    /// Run the pseudo-transient continuation from the current state.
    SolveReport march(const TimeConfig& cfg) {
        SolveReport report;
        if (std::isinf(cfg.dt)) {
            march_steady(cfg, report);
            return report;
        }
        double dt = cfg.dt;
        double time = 0.0;
        double cont_max = 0.0;
        for (int step = 1; step <= cfg.max_steps; ++step) {
            const std::vector<VecX> saved_z = z_;
            const VecX saved_uhat = uhat_;
            const std::vector<VecX> u_prev = all_u_blocks();
            bool accepted = false;
            while (!accepted) {
                try {
                    report.newton_residuals.clear();
                    newton_solve(dt, u_prev, cfg, step, report);
                    accepted = true;
                } catch (const NonPhysicalState&) {
                    if (cfg.policy == NonPhysicalPolicy::abort_run) throw;
                    z_ = saved_z;
                    uhat_ = saved_uhat;
                    dt *= 0.5;
                    if (dt < 1e-12)
                        throw;  // halving exhausted; give up loudly
                }
            }
            time += dt;
            StepRecord rec;
            rec.step = step;
            rec.time = time;
            rec.newton_iters = static_cast<int>(report.newton_residuals.size());
            std::tie(rec.min_rho, rec.min_p) = nodal_extrema();
            std::tie(rec.res_continuity, rec.res_total) =
                time_term_norms(u_prev, dt);
            report.history.push_back(rec);
            cont_max = std::max(cont_max, rec.res_continuity);
            if (rec.res_continuity < cfg.steady_tol ||
                (cont_max > 0.0 &&
                 rec.res_continuity < cfg.steady_drop * cont_max)) {
                report.converged = true;
                return report;
            }
            dt *= cfg.growth;
        }
        return report;
    }

  private:
    /// Conserved nodal block of one element (copy).
    VecX u_block(int e) const {
        return z_[static_cast<size_t>(e)].head(nvar * layout().n_en);
    }
    std::vector<VecX> all_u_blocks() const {
        std::vector<VecX> out(static_cast<size_t>(mesh().num_elements()));
        for (int e = 0; e < mesh().num_elements(); ++e) out[e] = u_block(e);
        return out;
    }

    void scatter_hat(int e, const VecX& part, VecX& global) const {
        const auto& faces = mesh().element_faces(e);
        for (int lf = 0; lf < 3; ++lf)
            for (int j = 0; j < layout().n_fn; ++j)
                for (int m = 0; m < nvar; ++m)
                    global[map_.global(faces[lf], j, m)] +=
                        part[layout().hat(lf, j, m)];
    }

    void build_node_coordinates() {
        node_x_.resize(static_cast<size_t>(mesh().num_elements()));
        for (int e = 0; e < mesh().num_elements(); ++e) {
            const auto mapped =
                map_element(mesh(), e, geo_.geometry_element(),
                            geo_.solution_element().nodes());
            MatX& x = node_x_[static_cast<size_t>(e)];
            x.resize(layout().n_en, 2);
            for (int i = 0; i < layout().n_en; ++i)
                x.row(i) = mapped[static_cast<size_t>(i)].x.transpose();
        }
    }

    /// Norms of the backward-Euler mass term M (U - U_prev) / dt, which at an
    /// inner-converged step equals minus the steady residual.
    std::pair<double, double> time_term_norms(const std::vector<VecX>& u_prev,
                                              double dt) const {
        const auto& L = layout();
        const MatX& N = geo_.volume_shape();
        double cont = 0.0, tot = 0.0;
        for (int e = 0; e < mesh().num_elements(); ++e) {
            const ElementGeometry& g = geo_.element(e);
            NodalViewLocal cur(z_[static_cast<size_t>(e)].data(), L.n_en, nvar);
            NodalViewLocal prev(u_prev[static_cast<size_t>(e)].data(), L.n_en,
                                nvar);
            const MatX dq = (N * (cur - prev)) / dt;  // nq x nvar
            for (int i = 0; i < L.n_en; ++i) {
                Vec4 r = Vec4::Zero();
                for (int q = 0; q < static_cast<int>(g.wdet.size()); ++q)
                    r += g.wdet[q] * N(q, i) * dq.row(q).transpose();
                cont += r[0] * r[0];
                tot += r.squaredNorm();
            }
        }
        return {std::sqrt(cont), std::sqrt(tot)};
    }

    using NodalViewLocal =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>;

    /// Run the per-element assembly loop, converting physical-evaluation
    /// failures into NonPhysicalState.  A Newton update can pass the nodal
    /// admissibility check yet interpolate to a negative density or pressure
    /// at a quadrature point, which surfaces as a low-level evaluation error;
    /// the policy machinery needs the uniform exception type to react.
    template <typename Fn>
    void assemble_all(int ne, int threads, int step, Fn&& fn) const {
        try {
            for_each_element(ne, threads, std::forward<Fn>(fn));
        } catch (const NonPositiveDensity&) {
            const auto [rho, p] = nodal_extrema();
            throw NonPhysicalState(step, rho, p);
        } catch (const NonPositiveTemperature&) {
            const auto [rho, p] = nodal_extrema();
            throw NonPhysicalState(step, rho, p);
        } catch (const DegenerateState&) {
            const auto [rho, p] = nodal_extrema();
            throw NonPhysicalState(step, rho, p);
        }
    }

    /// One backward-Euler step solved by Newton; throws NonPhysicalState when
    /// the updated state loses admissibility.
    void newton_solve(double dt, const std::vector<VecX>& u_prev,
                      const TimeConfig& cfg, int step, SolveReport& report) {
        const int ne = mesh().num_elements();
        std::vector<CondensedElement> condensed(static_cast<size_t>(ne));
        std::vector<VecX> rhat_parts(static_cast<size_t>(ne));
        std::vector<double> rz_sq(static_cast<size_t>(ne));
        double first = -1.0;
        for (int it = 0; it < cfg.max_newton; ++it) {
            const SmoothedField art = shock_field();
            assemble_all(ne, cfg.threads, step, [&](int e) {
                const VecX ue =
                    gather_element_trace(mesh(), map_, layout(), e, uhat_);
                LocalResult lr = local_.assemble(e, z_[static_cast<size_t>(e)],
                                                 ue, u_prev[static_cast<size_t>(e)],
                                                 dt, art, true);
                rz_sq[static_cast<size_t>(e)] = lr.r_z.squaredNorm();
                rhat_parts[static_cast<size_t>(e)] = lr.r_hat;
                condensed[static_cast<size_t>(e)] = condense(std::move(lr));
            });
            VecX rhat = VecX::Zero(map_.dofs());
            for (int e = 0; e < ne; ++e)
                scatter_hat(e, rhat_parts[static_cast<size_t>(e)], rhat);
            double res = rhat.squaredNorm();
            for (const double s : rz_sq) res += s;
            res = std::sqrt(res);
            report.newton_residuals.push_back(res);
            if (first < 0.0) first = res;
            if (res <= std::max(cfg.newton_abs_tol,
                                cfg.newton_rel_tol * first))
                return;

            const TraceSystem sys =
                assemble_trace(mesh(), map_, layout(), condensed);
            const TraceSolution sol = solve_trace(sys);
            report.trace_rel_residual = sol.rel_residual;
            for_each_element(ne, cfg.threads, [&](int e) {
                const VecX du = gather_element_trace(mesh(), map_, layout(), e,
                                                     sol.duhat);
                z_[static_cast<size_t>(e)] +=
                    recover_local(condensed[static_cast<size_t>(e)], du);
            });
            uhat_ += sol.duhat;
            const auto [rho, p] = nodal_extrema();
            if (rho <= 0.0 || p <= 0.0) throw NonPhysicalState(step, rho, p);
        }
    }

    /// Direct steady solve (dt = inf): Newton with the steady-convergence
    /// bookkeeping on the continuity residual.
    void march_steady(const TimeConfig& cfg, SolveReport& report) {
        const int ne = mesh().num_elements();
        const std::vector<VecX> u_prev = all_u_blocks();
        std::vector<CondensedElement> condensed(static_cast<size_t>(ne));
        std::vector<VecX> rhat_parts(static_cast<size_t>(ne));
        std::vector<VecX> rz(static_cast<size_t>(ne));
        double first = -1.0, cont_max = 0.0;
        for (int it = 0; it < cfg.max_newton; ++it) {
            const SmoothedField art = shock_field();
            assemble_all(ne, cfg.threads, 0, [&](int e) {
                const VecX ue =
                    gather_element_trace(mesh(), map_, layout(), e, uhat_);
                LocalResult lr = local_.assemble(e, z_[static_cast<size_t>(e)],
                                                 ue, u_prev[static_cast<size_t>(e)],
                                                 inf, art, true);
                rz[static_cast<size_t>(e)] = lr.r_z;
                rhat_parts[static_cast<size_t>(e)] = lr.r_hat;
                condensed[static_cast<size_t>(e)] = condense(std::move(lr));
            });
            VecX rhat = VecX::Zero(map_.dofs());
            for (int e = 0; e < ne; ++e)
                scatter_hat(e, rhat_parts[static_cast<size_t>(e)], rhat);
            double res = rhat.squaredNorm(), cont = 0.0;
            for (int e = 0; e < ne; ++e) {
                res += rz[static_cast<size_t>(e)].squaredNorm();
                for (int i = 0; i < layout().n_en; ++i) {
                    const double r = rz[static_cast<size_t>(e)][layout().u(i, 0)];
                    cont += r * r;
                }
            }
            res = std::sqrt(res);
            cont = std::sqrt(cont);
            report.newton_residuals.push_back(res);
            cont_max = std::max(cont_max, cont);
            StepRecord rec;
            rec.step = it;
            rec.time = 0.0;
            rec.res_continuity = cont;
            rec.res_total = res;
            std::tie(rec.min_rho, rec.min_p) = nodal_extrema();
            rec.newton_iters = it + 1;
            report.history.push_back(rec);
            if (cont < cfg.steady_tol ||
                (cont_max > 0.0 && cont < cfg.steady_drop * cont_max))
                report.converged = true;
            if (first < 0.0) first = res;
            if (res <= std::max(cfg.newton_abs_tol,
                                cfg.newton_rel_tol * first))
                return;

            const TraceSystem sys =
                assemble_trace(mesh(), map_, layout(), condensed);
            const TraceSolution sol = solve_trace(sys);
            report.trace_rel_residual = sol.rel_residual;
            for_each_element(ne, cfg.threads, [&](int e) {
                const VecX du = gather_element_trace(mesh(), map_, layout(), e,
                                                     sol.duhat);
                z_[static_cast<size_t>(e)] +=
                    recover_local(condensed[static_cast<size_t>(e)], du);
            });
            uhat_ += sol.duhat;
            const auto [rho, p] = nodal_extrema();
            if (rho <= 0.0 || p <= 0.0)
                throw NonPhysicalState(0, rho, p);
        }
        if (!report.converged)
            throw MaxIterations("steady Newton budget exhausted");
    }

    GeometryCache geo_;
    LocalAssembler local_;
    TraceMap map_;
    std::vector<VecX> z_;
    VecX uhat_;
    std::vector<MatX> node_x_;
};

}  // namespace hdgflow
