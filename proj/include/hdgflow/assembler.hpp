/** \file assembler.hpp
 * \brief Global trace system: dof map over skeleton faces, deterministic
 *        element-parallel evaluation, sparse assembly and direct solve, plus
 *        the uncondensed monolithic assembly used as an oracle.
 */
#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <exception>
#include <thread>
#include <vector>

#include "hdgflow/condensation.hpp"

namespace hdgflow {

/// Map from (face, face node, variable) to a global trace dof.
struct TraceMap {
    int n_fn = 0;
    int num_faces = 0;

    int dofs() const { return num_faces * nvar * n_fn; }
    int global(int fid, int j, int m) const {
        return nvar * (fid * n_fn + j) + m;
    }
};

/// Gather the trace values of an element's three faces into the local slot
/// order used by LocalAssembler.  Both sides store faces in the canonical
/// orientation, so no permutation is involved.
inline VecX gather_element_trace(const Mesh& mesh, const TraceMap& map,
                                 const LocalLayout& layout, int e,
                                 const VecX& uhat_global) {
    VecX out(layout.nhat());
    const auto& faces = mesh.element_faces(e);
    for (int lf = 0; lf < 3; ++lf)
        for (int j = 0; j < layout.n_fn; ++j)
            for (int m = 0; m < nvar; ++m)
                out[layout.hat(lf, j, m)] =
                    uhat_global[map.global(faces[lf], j, m)];
    return out;
}

/// Run fn(e) for every element, optionally across threads.  Results must be
/// written to per-element slots by the callee; the partition is static, so
/// the outcome does not depend on the thread count.  The first exception (in
/// element order) is rethrown.
template <typename Fn>
void for_each_element(int num_elements, int threads, Fn&& fn) {
    if (threads <= 1) {
        for (int e = 0; e < num_elements; ++e) fn(e);
        return;
    }
    const int nt = std::min(threads, num_elements);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(num_elements));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nt));
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (int e = t; e < num_elements; e += nt) {
                try {
                    fn(e);
                } catch (...) {
                    errors[static_cast<size_t>(e)] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

/// Assembled trace system K d(u-hat) = F.
struct TraceSystem {
    Eigen::SparseMatrix<double> k;
    VecX f;
};

/// Sum the condensed element contributions into the global trace system.
/// Triplets are emitted in element order: deterministic for any thread count
/// upstream.
inline TraceSystem assemble_trace(const Mesh& mesh, const TraceMap& map,
                                  const LocalLayout& layout,
                                  const std::vector<CondensedElement>& elems) {
    TraceSystem sys;
    sys.f = VecX::Zero(map.dofs());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(mesh.num_elements()) *
                 static_cast<size_t>(layout.nhat()) *
                 static_cast<size_t>(layout.nhat()));
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& faces = mesh.element_faces(e);
        const CondensedElement& ce = elems[static_cast<size_t>(e)];
        for (int lr = 0; lr < layout.nhat(); ++lr) {
            const int fr = lr / (nvar * layout.n_fn);
            const int row = map.global(faces[fr], (lr / nvar) % layout.n_fn,
                                       lr % nvar);
            sys.f[row] += ce.f[lr];
            for (int lc = 0; lc < layout.nhat(); ++lc) {
                const double v = ce.k(lr, lc);
                if (v == 0.0) continue;
                const int fc = lc / (nvar * layout.n_fn);
                const int col = map.global(faces[fc],
                                           (lc / nvar) % layout.n_fn,
                                           lc % nvar);
                trip.emplace_back(row, col, v);
            }
        }
    }
    sys.k.resize(map.dofs(), map.dofs());
    sys.k.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

/// Trace solve outcome.
struct TraceSolution {
    VecX duhat;
    double rel_residual = 0.0;  ///< ||K x - F|| / ||F||
};

/// Direct sparse factorisation of the trace system.
inline TraceSolution solve_trace(const TraceSystem& sys) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.k);
    if (lu.info() != Eigen::Success)
        throw SingularGlobalMatrix("trace matrix factorisation failed");
    TraceSolution out;
    out.duhat = lu.solve(sys.f);
    if (lu.info() != Eigen::Success)
        throw SingularGlobalMatrix("trace solve failed");
    const double fn = sys.f.norm();
    out.rel_residual =
        fn > 0.0 ? (sys.k * out.duhat - sys.f).norm() / fn : 0.0;
    return out;
}

/// Monolithic assembly of the full coupled Newton system over all local
/// unknowns followed by all trace unknowns; oracle for the condensed path.
/// Returns the system J dx = rhs with rhs = -[r_z; r_hat].
inline TraceSystem assemble_monolithic(const Mesh& mesh, const TraceMap& map,
                                       const LocalLayout& layout,
                                       const std::vector<LocalResult>& elems) {
    const int nz = layout.nz();
    const int offset = mesh.num_elements() * nz;
    const int total = offset + map.dofs();
    TraceSystem sys;
    sys.f = VecX::Zero(total);
    std::vector<Eigen::Triplet<double>> trip;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const LocalResult& lr = elems[static_cast<size_t>(e)];
        const auto& faces = mesh.element_faces(e);
        const int base = e * nz;
        auto hat_dof = [&](int slot) {
            return offset + map.global(faces[slot / (nvar * layout.n_fn)],
                                       (slot / nvar) % layout.n_fn,
                                       slot % nvar);
        };
        for (int r = 0; r < nz; ++r) {
            sys.f[base + r] -= lr.r_z[r];
            for (int c = 0; c < nz; ++c)
                if (lr.a_zz(r, c) != 0.0)
                    trip.emplace_back(base + r, base + c, lr.a_zz(r, c));
            for (int c = 0; c < layout.nhat(); ++c)
                if (lr.a_zh(r, c) != 0.0)
                    trip.emplace_back(base + r, hat_dof(c), lr.a_zh(r, c));
        }
        for (int r = 0; r < layout.nhat(); ++r) {
            const int row = hat_dof(r);
            sys.f[row] -= lr.r_hat[r];
            for (int c = 0; c < nz; ++c)
                if (lr.a_hz(r, c) != 0.0)
                    trip.emplace_back(row, base + c, lr.a_hz(r, c));
            for (int c = 0; c < layout.nhat(); ++c)
                if (lr.a_hh(r, c) != 0.0)
                    trip.emplace_back(row, hat_dof(c), lr.a_hh(r, c));
        }
    }
    sys.k.resize(total, total);
    sys.k.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

}  // namespace hdgflow
