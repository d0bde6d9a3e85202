/** \file jacobi.hpp
 * \brief Orthonormal Jacobi polynomials, their derivatives and Gauss-type
 *        quadrature rules on [-1, 1].
 */
#pragma once

#include "hdgflow/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace hdgflow {

/// Evaluate the Jacobi polynomial P_n^{(alpha,beta)}(x), normalised to unit
/// weighted L2 norm on [-1, 1].
inline double jacobi_p(int n, double alpha, double beta, double x) {
    const double ab = alpha + beta;
    const double gamma0 = std::pow(2.0, ab + 1) / (ab + 1) *
                          std::tgamma(alpha + 1) * std::tgamma(beta + 1) /
                          std::tgamma(ab + 1);
    double pm1 = 1.0 / std::sqrt(gamma0);
    if (n == 0) return pm1;
    const double gamma1 = (alpha + 1) * (beta + 1) / (ab + 3) * gamma0;
    double p = ((ab + 2) * x / 2 + (alpha - beta) / 2) / std::sqrt(gamma1);
    if (n == 1) return p;
    double aold = 2.0 / (2 + ab) * std::sqrt((alpha + 1) * (beta + 1) / (ab + 3));
    for (int i = 1; i < n; ++i) {
        const double h1 = 2 * i + ab;
        const double anew =
            2.0 / (h1 + 2) *
            std::sqrt((i + 1) * (i + 1 + ab) * (i + 1 + alpha) * (i + 1 + beta) /
                      ((h1 + 1) * (h1 + 3)));
        const double bnew = -(alpha * alpha - beta * beta) / (h1 * (h1 + 2));
        const double pnew = ((x - bnew) * p - aold * pm1) / anew;
        pm1 = p;
        p = pnew;
        aold = anew;
    }
    return p;
}

/// Derivative of the normalised Jacobi polynomial.
inline double grad_jacobi_p(int n, double alpha, double beta, double x) {
    if (n == 0) return 0.0;
    return std::sqrt(n * (n + alpha + beta + 1)) *
           jacobi_p(n - 1, alpha + 1, beta + 1, x);
}

/// Nodes and weights of the n-point Gauss-Jacobi rule (exact through degree
/// 2n - 1), computed from the symmetric tridiagonal recurrence matrix.
inline void jacobi_gauss(int n, double alpha, double beta, VecX& x, VecX& w) {
    x.resize(n);
    w.resize(n);
    const double ab = alpha + beta;
    if (n == 1) {
        x[0] = (beta - alpha) / (ab + 2);
        w[0] = std::pow(2.0, ab + 1) / (ab + 1) * std::tgamma(alpha + 1) *
               std::tgamma(beta + 1) / std::tgamma(ab + 1);
        return;
    }
    MatX J = MatX::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double h1 = 2.0 * i + ab;
        J(i, i) = (std::abs(alpha) + std::abs(beta) < 1e-14 && i == 0)
                      ? 0.0
                      : -(alpha * alpha - beta * beta) / (h1 * (h1 + 2));
        if (i < n - 1) {
            const double off =
                2.0 / (h1 + 2) *
                std::sqrt((i + 1) * (i + 1 + ab) * (i + 1 + alpha) *
                          (i + 1 + beta) / ((h1 + 1) * (h1 + 3)));
            J(i, i + 1) = J(i + 1, i) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(J);
    const double mu0 = std::pow(2.0, ab + 1) / (ab + 1) * std::tgamma(alpha + 1) *
                       std::tgamma(beta + 1) / std::tgamma(ab + 1);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        w[i] = v0 * v0 * mu0;
    }
}

/// Nodes of the n-point Gauss-Lobatto-Jacobi rule: the boundary points plus
/// the interior Gauss points of the (alpha+1, beta+1) family.
inline VecX jacobi_gauss_lobatto(int n, double alpha, double beta) {
    VecX x(n);
    if (n < 2) throw DegenerateTable("Gauss-Lobatto rule needs at least 2 points");
    x[0] = -1.0;
    x[n - 1] = 1.0;
    if (n > 2) {
        VecX xi, wi;
        jacobi_gauss(n - 2, alpha + 1, beta + 1, xi, wi);
        x.segment(1, n - 2) = xi;
    }
    return x;
}

}  // namespace hdgflow
