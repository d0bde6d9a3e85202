/** \file condensation.hpp
 * \brief Static condensation of the element-local blocks: the trace-only
 *        Schur complement and the local recovery solve.
 */
#pragma once

#include <Eigen/LU>

#include "hdgflow/local_problem.hpp"

namespace hdgflow {

/// Condensed element system K^e d(u-hat) = F^e, plus the factors needed to
/// recover the local update afterwards.
struct CondensedElement {
    MatX k;                         ///< A_hh - A_hz A_zz^{-1} A_zh
    VecX f;                         ///< -r_hat + A_hz A_zz^{-1} r_z
    Eigen::FullPivLU<MatX> lu_zz;   ///< factorisation of A_zz
    MatX a_zh;                      ///< kept for the recovery solve
    VecX r_z;
};

/// Eliminate the local unknowns of one element.  Throws SingularLocalMatrix
/// when A_ZZ cannot be inverted reliably.
inline CondensedElement condense(LocalResult lr) {
    CondensedElement out;
    out.lu_zz.compute(lr.a_zz);
    if (!out.lu_zz.isInvertible())
        throw SingularLocalMatrix("condense: element matrix A_ZZ is singular");
    const MatX zinv_zh = out.lu_zz.solve(lr.a_zh);
    const VecX zinv_rz = out.lu_zz.solve(lr.r_z);
    out.k = lr.a_hh - lr.a_hz * zinv_zh;
    out.f = -lr.r_hat + lr.a_hz * zinv_rz;
    out.a_zh = std::move(lr.a_zh);
    out.r_z = std::move(lr.r_z);
    return out;
}

/// Local Newton update once the trace update of the element's faces is
/// known: dz = -A_zz^{-1} (r_z + A_zh d(u-hat)).
inline VecX recover_local(const CondensedElement& ce, const VecX& duhat) {
    return -ce.lu_zz.solve(ce.r_z + ce.a_zh * duhat);
}

}  // namespace hdgflow
