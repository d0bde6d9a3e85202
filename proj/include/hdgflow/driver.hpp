/** \file driver.hpp
 * \brief Case orchestration: build a solver from a run configuration, march
 *        it, write field/history artifacts, and run convergence studies.
 */
#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdgflow/config.hpp"
#include "hdgflow/verification.hpp"

namespace hdgflow {

namespace detail {

/// Fixed 17-significant-digit decimal form: round-trips every double and is
/// bit-identical across runs.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Process exit statuses, stable for CI use.
enum ExitStatus : int {
    exit_converged = 0,
    exit_usage = 1,
    exit_non_physical = 2,
    exit_not_converged = 3,
};

/// Build the solver a configuration describes.  The level, degree and scheme
/// overrides serve the convergence-study loops; zero / empty means "as
/// configured".  Returned by pointer because solvers pin themselves in place.
inline std::unique_ptr<Solver> build_solver(const RunConfig& cfg,
                                            int level = 0, int k = 0,
                                            const std::string& scheme = {}) {
    Mesh mesh = build_mesh(cfg.mesh, level);
    validate_k_override(cfg, mesh);
    auto boundary = bind_boundaries(cfg, mesh);
    auto solver = std::make_unique<Solver>(
        std::move(mesh), k > 0 ? k : cfg.k, cfg.gas,
        parse_scheme(scheme.empty() ? cfg.scheme : scheme),
        std::move(boundary), cfg.shock, source_field(cfg));
    if (cfg.initial == "exact")
        solver->set_state(exact_state_field(cfg), exact_strain_field(cfg),
                          exact_gradient_field(cfg));
    return solver;
}

/// March history as CSV.
inline void write_history(std::ostream& out, const SolveReport& report) {
    out << "step,time,res_continuity,res_total,min_rho,min_p\n";
    for (const StepRecord& r : report.history)
        out << r.step << ',' << detail::fmt(r.time) << ','
            << detail::fmt(r.res_continuity) << ','
            << detail::fmt(r.res_total) << ',' << detail::fmt(r.min_rho)
            << ',' << detail::fmt(r.min_p) << '\n';
}

/// Nodal solution field, one row per element node:
/// `x y rho rhovx rhovy rhoE [eps11 eps22 eps12 phix phiy] [eps_art]`.
inline void write_field(std::ostream& out, const Solver& solver) {
    const LocalLayout& L = solver.layout();
    const bool art_col = solver.local().shock().mode != ShockMode::off;
    const SmoothedField art =
        art_col ? solver.shock_field() : SmoothedField{};
    const MatX& ref = solver.geometry().solution_element().nodes();
    out << "# x y rho rhovx rhovy rhoE";
    if (L.viscous) out << " eps11 eps22 eps12 phix phiy";
    if (art_col) out << " eps_art";
    out << '\n';
    for (int e = 0; e < solver.mesh().num_elements(); ++e) {
        const VecX& z = solver.element_state(e);
        const MatX& x = solver.element_node_coords(e);
        for (int i = 0; i < L.n_en; ++i) {
            out << detail::fmt(x(i, 0)) << ' ' << detail::fmt(x(i, 1));
            for (int m = 0; m < nvar; ++m)
                out << ' ' << detail::fmt(z[L.u(i, m)]);
            if (L.viscous) {
                for (int a = 0; a < msd; ++a)
                    out << ' ' << detail::fmt(z[L.eps(i, a)]);
                for (int d = 0; d < nsd; ++d)
                    out << ' ' << detail::fmt(z[L.phi(i, d)]);
            }
            if (art_col)
                out << ' ' << detail::fmt(art.at(e, ref(i, 0), ref(i, 1)));
            out << '\n';
        }
    }
}

/// Outcome of a single case run.
struct CaseResult {
    int status = exit_converged;
    std::string message;
    SolveReport report;
};

/// Run one case end to end: build, march, write the configured artifacts.
/// The field and history files are written whatever the outcome, so a failed
/// run still leaves its post-mortem on disk.
inline CaseResult run_case(const RunConfig& cfg, std::ostream& log) {
    CaseResult out;
    auto solver = build_solver(cfg);
    try {
        out.report = solver->march(cfg.time);
        if (!out.report.converged) {
            out.status = exit_not_converged;
            out.message = "pseudo-time budget exhausted before steady state";
        }
    } catch (const NonPhysicalState& e) {
        out.status = exit_non_physical;
        out.message = e.what();
    } catch (const MaxIterations& e) {
        out.status = exit_not_converged;
        out.message = e.what();
    }
    if (!cfg.history_path.empty()) {
        std::ofstream h(cfg.history_path);
        write_history(h, out.report);
    }
    if (!cfg.field_path.empty()) {
        std::ofstream f(cfg.field_path);
        write_field(f, *solver);
    }
    log << "case " << cfg.name << ": ";
    if (out.status == exit_converged) {
        const int steps = static_cast<int>(out.report.history.size());
        log << "converged in " << steps << " step"
            << (steps == 1 ? "" : "s");
        if (!out.report.history.empty())
            log << ", continuity residual "
                << detail::fmt(out.report.history.back().res_continuity);
        log << '\n';
    } else {
        log << out.message << '\n';
    }
    return out;
}

/// One block of a convergence study (fixed scheme and degree).
struct StudyBlock {
    std::string scheme;
    int k = 0;
    std::vector<double> h;
    std::vector<ErrorNorms> err;
    RateEstimate rate_rho, rate_mom, rate_energy, rate_eps, rate_phi;
    bool pass = true;
};

/// Study outcome: the emitted CSV plus per-block pass/fail.
struct StudyResult {
    bool pass = true;
    std::string csv;
    std::vector<StudyBlock> blocks;
};

/// Run the configured (scheme x degree x level) convergence study, check the
/// observed rates against (k + 1) - slack, and emit the study CSV.  Solver
/// failures propagate: a study that cannot finish has no table to judge.
inline StudyResult run_convergence_study(const RunConfig& cfg,
                                         std::ostream& log) {
    if (!cfg.study)
        throw MissingSpec("config " + cfg.name + " has no study block");
    if (cfg.exact.empty())
        throw MissingSpec("a convergence study needs an exact solution");
    const StudySpec& st = *cfg.study;
    if (st.levels.size() < 2)
        throw DegenerateTable("a convergence study needs at least two levels");

    const auto exact_u = exact_state_field(cfg);
    const auto exact_eps = exact_strain_field(cfg);
    const auto exact_phi = exact_gradient_field(cfg);
    const bool viscous = !cfg.gas.inviscid();

    StudyResult out;
    std::ostringstream csv;
    csv << "case,k,level,h,dofs,err_rho,err_mom,err_E";
    if (viscous) csv << ",err_eps,err_phi";
    csv << ",rate_rho,rate_mom,rate_E";
    if (viscous) csv << ",rate_eps,rate_phi";
    csv << '\n';

    for (const std::string& scheme : st.schemes) {
        for (const int k : st.ks) {
            StudyBlock blk;
            blk.scheme = scheme;
            blk.k = k;
            for (const int level : st.levels) {
                auto solver = build_solver(cfg, level, k, scheme);
                const SolveReport rep = solver->march(cfg.time);
                if (!rep.converged)
                    throw MaxIterations(
                        "study case " + cfg.name + " (" + scheme +
                        ", k=" + std::to_string(k) + ", level " +
                        std::to_string(level) + ") did not reach steady state");
                double h = 0.0;
                for (int e = 0; e < solver->mesh().num_elements(); ++e)
                    h = std::max(h,
                                 solver->mesh().element_circumdiameter(e));
                blk.h.push_back(h);
                blk.err.push_back(
                    l2_error(*solver, exact_u, exact_eps, exact_phi));
                const size_t row = blk.err.size() - 1;
                const ErrorNorms& en = blk.err[row];
                csv << cfg.name << ':' << scheme << ',' << k << ',' << level
                    << ',' << detail::fmt(h) << ','
                    << solver->trace_map().dofs() << ','
                    << detail::fmt(en.rho) << ',' << detail::fmt(en.momentum)
                    << ',' << detail::fmt(en.energy);
                if (viscous)
                    csv << ',' << detail::fmt(en.eps) << ','
                        << detail::fmt(en.phi);
                auto pairwise = [&](auto get) -> std::string {
                    if (row == 0) return "";
                    const double r =
                        std::log(get(blk.err[row - 1]) / get(en)) /
                        std::log(blk.h[row - 1] / blk.h[row]);
                    return detail::fmt(r);
                };
                csv << ',' << pairwise([](const ErrorNorms& n) { return n.rho; })
                    << ','
                    << pairwise([](const ErrorNorms& n) { return n.momentum; })
                    << ','
                    << pairwise([](const ErrorNorms& n) { return n.energy; });
                if (viscous)
                    csv << ','
                        << pairwise([](const ErrorNorms& n) { return n.eps; })
                        << ','
                        << pairwise([](const ErrorNorms& n) { return n.phi; });
                csv << '\n';
            }
            auto column = [&](auto get) {
                std::vector<double> v;
                for (const ErrorNorms& n : blk.err) v.push_back(get(n));
                return convergence_rate(blk.h, v);
            };
            blk.rate_rho = column([](const ErrorNorms& n) { return n.rho; });
            blk.rate_mom =
                column([](const ErrorNorms& n) { return n.momentum; });
            blk.rate_energy =
                column([](const ErrorNorms& n) { return n.energy; });
            const double want = k + 1.0 - st.slack;
            blk.pass = blk.rate_rho.last >= want &&
                       blk.rate_mom.last >= want &&
                       blk.rate_energy.last >= want;
            if (viscous) {
                blk.rate_eps =
                    column([](const ErrorNorms& n) { return n.eps; });
                blk.rate_phi =
                    column([](const ErrorNorms& n) { return n.phi; });
                blk.pass = blk.pass && blk.rate_eps.last >= want &&
                           blk.rate_phi.last >= want;
            }
            log << cfg.name << ':' << scheme << " k=" << k << " rates rho "
                << detail::fmt(blk.rate_rho.last) << " mom "
                << detail::fmt(blk.rate_mom.last) << " E "
                << detail::fmt(blk.rate_energy.last);
            if (viscous)
                log << " eps " << detail::fmt(blk.rate_eps.last) << " phi "
                    << detail::fmt(blk.rate_phi.last);
            log << " (want >= " << detail::fmt(want) << "): "
                << (blk.pass ? "pass" : "FAIL") << '\n';
            out.pass = out.pass && blk.pass;
            out.blocks.push_back(std::move(blk));
        }
    }
    out.csv = csv.str();
    if (!st.csv.empty()) {
        std::ofstream f(st.csv);
        f << out.csv;
    }
    return out;
}

/// Print the trace numerical flux decomposition at one interface sample:
/// the flux of the trace state, the stabilisation contribution, their sum
/// and the stabilisation matrix itself.
inline void flux_table(const std::string& scheme, const Vec4& uhat,
                       const Vec4& u_e, const Vec2& n, const GasModel& gas,
                       std::ostream& out) {
    const RiemannConfig rc = parse_scheme(scheme);
    const Vec4 flux_uhat = inviscid_flux(uhat, gas) * n;
    const Stabilization st = stabilization_tau(rc, uhat, n, gas);
    const Vec4 stab = st.tau * (u_e - uhat);
    out << "scheme " << scheme_label(rc) << '\n';
    out << "F(uhat) n   :";
    for (int m = 0; m < nvar; ++m) out << ' ' << detail::fmt(flux_uhat[m]);
    out << '\n' << "tau (ue-uhat):";
    for (int m = 0; m < nvar; ++m) out << ' ' << detail::fmt(stab[m]);
    out << '\n' << "trace flux  :";
    for (int m = 0; m < nvar; ++m)
        out << ' ' << detail::fmt(flux_uhat[m] + stab[m]);
    out << '\n' << "tau matrix";
    if (st.vanishing) out << " (vanishing: supersonic inflow)";
    out << ":\n";
    for (int i = 0; i < nvar; ++i) {
        out << " ";
        for (int j = 0; j < nvar; ++j) out << ' ' << detail::fmt(st.tau(i, j));
        out << '\n';
    }
}

}  // namespace hdgflow
