/** \file quadrature.hpp
 * \brief Quadrature rules on the reference interval and triangle.
 */
#pragma once

#include "hdgflow/jacobi.hpp"

namespace hdgflow {

/// A quadrature rule: points (one row per point) and weights.
struct QuadratureRule {
    MatX points;   ///< n_q x dim coordinates.
    VecX weights;  ///< n_q positive weights.

    int size() const { return static_cast<int>(weights.size()); }
};

/// Gauss-Legendre rule on [0, 1], exact through the requested polynomial
/// degree.
inline QuadratureRule interval_rule(int degree) {
    const int n = degree / 2 + 1;
    VecX x, w;
    jacobi_gauss(n, 0.0, 0.0, x, w);
    QuadratureRule rule;
    rule.points.resize(n, 1);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.points(i, 0) = 0.5 * (x[i] + 1.0);
        rule.weights[i] = 0.5 * w[i];
    }
    return rule;
}

/// Tensor-product rule on the unit triangle {x, y >= 0, x + y <= 1} built by
/// collapsing a Gauss-Legendre x Gauss-Jacobi(1,0) grid through the map
/// (a, b) -> (a (1 - b), b).  The (1,0) weight absorbs the Jacobian factor
/// (1 - b), so the rule integrates total degree `degree` exactly with
/// ceil((degree + 1) / 2) points per direction.
inline QuadratureRule triangle_rule(int degree) {
    const int n = degree / 2 + 1;
    VecX xa, wa, xb, wb;
    jacobi_gauss(n, 0.0, 0.0, xa, wa);
    jacobi_gauss(n, 1.0, 0.0, xb, wb);
    QuadratureRule rule;
    rule.points.resize(n * n, 2);
    rule.weights.resize(n * n);
    int q = 0;
    for (int j = 0; j < n; ++j) {
        const double b = 0.5 * (xb[j] + 1.0);
        // Jacobi(1,0) weights on [-1,1] carry (1 - x); mapped to [0,1] the
        // measure (1 - b) db picks up a factor 1/4.
        const double wj = 0.25 * wb[j];
        for (int i = 0; i < n; ++i, ++q) {
            const double a = 0.5 * (xa[i] + 1.0);
            rule.points(q, 0) = a * (1.0 - b);
            rule.points(q, 1) = b;
            rule.weights[q] = 0.5 * wa[i] * wj;
        }
    }
    return rule;
}

}  // namespace hdgflow
