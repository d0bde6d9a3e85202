/** \file reference_element.hpp
 * \brief Nodal reference triangle: warp-and-blend interpolation points,
 *        orthonormal modal basis, Vandermonde operators and face traces.
 */
#pragma once

#include "hdgflow/quadrature.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace hdgflow {

/// Element shapes supported by the dimension bookkeeping helpers.
enum class ElementShape { simplex, tensor };

/// Number of interpolation nodes of a degree-k element of the given shape.
inline int shape_node_count(int dim, ElementShape shape, int k) {
    if (shape == ElementShape::tensor) {
        int n = 1;
        for (int d = 0; d < dim; ++d) n *= k + 1;
        return n;
    }
    int n = 1;
    for (int d = 0; d < dim; ++d) n = n * (k + 1 + d) / (d + 1);
    return n;
}

/// Size of the element-local unknown block of the mixed formulation: the
/// conserved variables plus the strain-rate (Voigt) and temperature-gradient
/// components, all interpolated on the element nodes.
inline int local_dimension(int dim, ElementShape shape, int k) {
    if (dim != 2 && dim != 3) throw UnsupportedShape("local_dimension: dim must be 2 or 3");
    const int ncomp = (dim == 2) ? (4 + 3 + 2) : (5 + 6 + 3);
    return ncomp * shape_node_count(dim, shape, k);
}

namespace detail {

/// Warp function moving equidistant 1D nodes to Gauss-Lobatto positions,
/// expressed through the Lagrange interpolants of the equidistant set.
inline VecX warp_factor(int k, const VecX& rout) {
    const VecX lgl = jacobi_gauss_lobatto(k + 1, 0.0, 0.0);
    VecX req(k + 1);
    for (int i = 0; i <= k; ++i) req[i] = -1.0 + 2.0 * i / k;

    MatX veq(k + 1, k + 1);
    for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= k; ++j) veq(i, j) = jacobi_p(j, 0.0, 0.0, req[i]);

    const auto n = rout.size();
    MatX pmat(k + 1, n);
    for (int j = 0; j <= k; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            pmat(j, i) = jacobi_p(j, 0.0, 0.0, rout[i]);
    const MatX lmat = veq.transpose().fullPivLu().solve(pmat);

    VecX warp = lmat.transpose() * (lgl - req);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool interior = std::abs(rout[i]) < 1.0 - 1e-10;
        const double sf = 1.0 - (interior ? rout[i] * rout[i] : 0.0);
        warp[i] = warp[i] / sf + warp[i] * (interior ? 0.0 : -1.0);
    }
    return warp;
}

/// Warp-and-blend nodes of degree k on the unit triangle, in the generator's
/// row-major order.
inline MatX warp_blend_nodes(int k) {
    static constexpr std::array<double, 15> alpopt = {
        0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
        1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258};
    const double alpha = (k < 16) ? alpopt[k - 1] : 5.0 / 3.0;

    const int np = (k + 1) * (k + 2) / 2;
    VecX l1(np), l3(np);
    int sk = 0;
    for (int n = 0; n <= k; ++n)
        for (int m = 0; m <= k - n; ++m, ++sk) {
            l1[sk] = static_cast<double>(n) / k;
            l3[sk] = static_cast<double>(m) / k;
        }
    const VecX l2 = VecX::Ones(np) - l1 - l3;

    VecX x = -l2 + l3;
    VecX y = (-l2 - l3 + 2.0 * l1) / std::sqrt(3.0);

    const VecX blend1 = 4.0 * l2.cwiseProduct(l3);
    const VecX blend2 = 4.0 * l1.cwiseProduct(l3);
    const VecX blend3 = 4.0 * l1.cwiseProduct(l2);
    const VecX wf1 = warp_factor(k, l3 - l2);
    const VecX wf2 = warp_factor(k, l1 - l3);
    const VecX wf3 = warp_factor(k, l2 - l1);
    VecX warp1(np), warp2(np), warp3(np);
    for (int i = 0; i < np; ++i) {
        warp1[i] = blend1[i] * wf1[i] * (1.0 + std::pow(alpha * l1[i], 2));
        warp2[i] = blend2[i] * wf2[i] * (1.0 + std::pow(alpha * l2[i], 2));
        warp3[i] = blend3[i] * wf3[i] * (1.0 + std::pow(alpha * l3[i], 2));
    }
    x += warp1 + std::cos(2.0 * M_PI / 3.0) * warp2 + std::cos(4.0 * M_PI / 3.0) * warp3;
    y += std::sin(2.0 * M_PI / 3.0) * warp2 + std::sin(4.0 * M_PI / 3.0) * warp3;

    // Equilateral coordinates back to barycentric, then to the unit triangle
    // (l2 -> vertex (0,0), l3 -> (1,0), l1 -> (0,1)).
    MatX nodes(np, 2);
    for (int i = 0; i < np; ++i) {
        const double b1 = (std::sqrt(3.0) * y[i] + 1.0) / 3.0;
        const double b3 = (3.0 * x[i] - std::sqrt(3.0) * y[i] + 2.0) / 6.0;
        nodes(i, 0) = b3;
        nodes(i, 1) = b1;
    }
    return nodes;
}

}  // namespace detail

/// Nodal reference triangle with vertices (0,0), (1,0), (0,1), counterclockwise
/// faces 0:(v0,v1), 1:(v1,v2), 2:(v2,v0), and a degree-graded orthonormal
/// modal basis.
class ReferenceElement {
  public:
    explicit ReferenceElement(int degree) : k_(degree) {
        if (degree < 1) throw UnsupportedShape("polynomial degree must be >= 1");
        build_nodes();
        build_modes();
        vandermonde_ = basis_at(nodes_);
        Eigen::FullPivLU<MatX> lu(vandermonde_);
        if (!lu.isInvertible())
            throw SingularLocalMatrix("reference Vandermonde matrix is singular");
        inv_vandermonde_ = lu.inverse();
        mass_ = inv_vandermonde_.transpose() * inv_vandermonde_;
        face_nodes_1d_ = jacobi_gauss_lobatto(k_ + 1, 0.0, 0.0);
        for (Eigen::Index i = 0; i < face_nodes_1d_.size(); ++i)
            face_nodes_1d_[i] = 0.5 * (face_nodes_1d_[i] + 1.0);
    }

    int degree() const { return k_; }
    int num_nodes() const { return static_cast<int>(nodes_.rows()); }
    int num_face_nodes() const { return k_ + 1; }

    /// Interpolation nodes (corners, then face interiors, then interior).
    const MatX& nodes() const { return nodes_; }
    /// Modal Vandermonde V(n, m) = psi_m(node n).
    const MatX& vandermonde() const { return vandermonde_; }
    const MatX& inv_vandermonde() const { return inv_vandermonde_; }
    /// Reference mass matrix of the nodal basis.
    const MatX& mass() const { return mass_; }
    /// Total polynomial degree of mode m in the graded ordering.
    int mode_degree(int m) const { return mode_i_[m] + mode_j_[m]; }

    /// Diagonal projector onto the top-degree modal coefficients: zeros on the
    /// k(k+1)/2 modes of degree <= k-1, ones on the k+1 modes of degree k.
    MatX top_mode_projector() const {
        MatX p = MatX::Zero(num_nodes(), num_nodes());
        for (int m = 0; m < num_nodes(); ++m)
            if (mode_degree(m) == k_) p(m, m) = 1.0;
        return p;
    }

    /// Corner ids bounding face f, counterclockwise.
    static std::array<int, 2> face_vertices(int f) {
        constexpr std::array<std::array<int, 2>, 3> fv = {{{0, 1}, {1, 2}, {2, 0}}};
        return fv[f];
    }
    /// Element-node indices lying on face f, ordered by the face parameter.
    const std::vector<int>& face_nodes(int f) const { return face_nodes_[f]; }
    /// Gauss-Lobatto face parameter values in [0, 1] for the face nodal set.
    const VecX& face_nodes_1d() const { return face_nodes_1d_; }

    /// Reference coordinates of the point at parameter s on face f.
    static Vec2 face_point(int f, double s) {
        constexpr std::array<std::array<double, 2>, 3> corner = {
            {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
        const auto [a, b] = face_vertices(f);
        return Vec2((1 - s) * corner[a][0] + s * corner[b][0],
                    (1 - s) * corner[a][1] + s * corner[b][1]);
    }

    /// Orthonormal modal basis evaluated at arbitrary points (rows) of the
    /// unit triangle; returns n_pts x n_modes.
    MatX basis_at(const MatX& pts) const {
        const auto n = pts.rows();
        MatX phi(n, num_nodes());
        for (Eigen::Index p = 0; p < n; ++p) {
            const double r = 2.0 * pts(p, 0) - 1.0, s = 2.0 * pts(p, 1) - 1.0;
            const double a = (std::abs(s - 1.0) > 1e-14)
                                 ? 2.0 * (1.0 + r) / (1.0 - s) - 1.0
                                 : -1.0;
            for (int m = 0; m < num_nodes(); ++m) {
                const int i = mode_i_[m], j = mode_j_[m];
                phi(p, m) = 2.0 * std::sqrt(2.0) * jacobi_p(i, 0, 0, a) *
                            jacobi_p(j, 2 * i + 1, 0, s) * std::pow(1.0 - s, i);
            }
        }
        return phi;
    }

    /// Gradients (d/dxi, d/deta) of the modal basis at arbitrary points.
    std::array<MatX, 2> grad_basis_at(const MatX& pts) const {
        const auto n = pts.rows();
        std::array<MatX, 2> d{MatX(n, num_nodes()), MatX(n, num_nodes())};
        for (Eigen::Index p = 0; p < n; ++p) {
            const double r = 2.0 * pts(p, 0) - 1.0, s = 2.0 * pts(p, 1) - 1.0;
            const double a = (std::abs(s - 1.0) > 1e-14)
                                 ? 2.0 * (1.0 + r) / (1.0 - s) - 1.0
                                 : -1.0;
            for (int m = 0; m < num_nodes(); ++m) {
                const int i = mode_i_[m], j = mode_j_[m];
                const double fa = jacobi_p(i, 0, 0, a);
                const double dfa = grad_jacobi_p(i, 0, 0, a);
                const double gb = jacobi_p(j, 2 * i + 1, 0, s);
                const double dgb = grad_jacobi_p(j, 2 * i + 1, 0, s);
                const double hb = (i > 0) ? std::pow(0.5 * (1.0 - s), i - 1) : 0.0;

                double dr = dfa * gb;
                if (i > 0) dr *= hb;
                double ds = dfa * gb * 0.5 * (1.0 + a);
                if (i > 0) ds *= hb;
                double tmp = dgb * ((i > 0) ? hb * 0.5 * (1.0 - s) : 1.0);
                if (i > 0) tmp -= 0.5 * i * gb * hb;
                ds += fa * tmp;

                // Map the bi-unit derivatives to the unit triangle (factor 2)
                // and account for the amplitude rescaling (another factor 2).
                const double scale = 4.0 * std::pow(2.0, i + 0.5);
                d[0](p, m) = scale * dr;
                d[1](p, m) = scale * ds;
            }
        }
        return d;
    }

    /// Orthonormal 1D basis on [0, 1] used for the face trace space.
    static MatX face_basis_at(int degree, const VecX& s) {
        MatX phi(s.size(), degree + 1);
        for (Eigen::Index p = 0; p < s.size(); ++p)
            for (int m = 0; m <= degree; ++m)
                phi(p, m) = std::sqrt(2.0) * jacobi_p(m, 0, 0, 2.0 * s[p] - 1.0);
        return phi;
    }

    /// Nodal (Lagrange) shape functions at arbitrary points: n_pts x n_nodes.
    MatX shape_at(const MatX& pts) const { return basis_at(pts) * inv_vandermonde_; }

    /// Nodal shape-function gradients at arbitrary points.
    std::array<MatX, 2> grad_shape_at(const MatX& pts) const {
        auto g = grad_basis_at(pts);
        return {g[0] * inv_vandermonde_, g[1] * inv_vandermonde_};
    }

  private:
    void build_nodes() {
        const MatX raw = detail::warp_blend_nodes(k_);
        const int np = static_cast<int>(raw.rows());
        constexpr double tol = 1e-9;
        const auto on_face = [&](int f, double xi, double eta) {
            switch (f) {
                case 0: return std::abs(eta) < tol;
                case 1: return std::abs(xi + eta - 1.0) < tol;
                default: return std::abs(xi) < tol;
            }
        };
        const auto face_param = [&](int f, double xi, double eta) {
            switch (f) {
                case 0: return xi;
                case 1: return eta;
                default: return 1.0 - eta;
            }
        };

        std::vector<int> order;
        std::vector<bool> used(np, false);
        // Corners first.
        constexpr std::array<std::array<double, 2>, 3> corner = {
            {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
        for (const auto& c : corner) {
            int best = -1;
            double dbest = 1e30;
            for (int i = 0; i < np; ++i) {
                const double d = std::hypot(raw(i, 0) - c[0], raw(i, 1) - c[1]);
                if (d < dbest) { dbest = d; best = i; }
            }
            order.push_back(best);
            used[best] = true;
        }
        // Face interiors by increasing parameter.
        for (int f = 0; f < 3; ++f) {
            std::vector<int> on;
            for (int i = 0; i < np; ++i)
                if (!used[i] && on_face(f, raw(i, 0), raw(i, 1))) on.push_back(i);
            std::sort(on.begin(), on.end(), [&](int a, int b) {
                return face_param(f, raw(a, 0), raw(a, 1)) <
                       face_param(f, raw(b, 0), raw(b, 1));
            });
            for (int i : on) { order.push_back(i); used[i] = true; }
        }
        // Interior nodes lexicographic by (eta, xi).
        std::vector<int> inner;
        for (int i = 0; i < np; ++i)
            if (!used[i]) inner.push_back(i);
        std::sort(inner.begin(), inner.end(), [&](int a, int b) {
            if (std::abs(raw(a, 1) - raw(b, 1)) > tol) return raw(a, 1) < raw(b, 1);
            return raw(a, 0) < raw(b, 0);
        });
        order.insert(order.end(), inner.begin(), inner.end());
        if (static_cast<int>(order.size()) != np)
            throw DegenerateTable("node classification failed");

        nodes_.resize(np, 2);
        for (int i = 0; i < np; ++i) nodes_.row(i) = raw.row(order[i]);
        // Snap face nodes exactly onto the edges.
        for (int i = 0; i < np; ++i) {
            if (std::abs(nodes_(i, 1)) < tol) nodes_(i, 1) = 0.0;
            if (std::abs(nodes_(i, 0)) < tol) nodes_(i, 0) = 0.0;
            const double excess = nodes_(i, 0) + nodes_(i, 1) - 1.0;
            if (std::abs(excess) < tol && excess != 0.0) {
                nodes_(i, 0) -= 0.5 * excess;
                nodes_(i, 1) -= 0.5 * excess;
            }
        }

        // Face connectivity in the canonical ordering.
        for (int f = 0; f < 3; ++f) {
            auto& fn = face_nodes_[f];
            const auto [a, b] = face_vertices(f);
            fn.push_back(a);
            for (int i = 0; i < np; ++i)
                if (i >= 3 && on_face(f, nodes_(i, 0), nodes_(i, 1))) fn.push_back(i);
            fn.push_back(b);
            std::sort(fn.begin(), fn.end(), [&](int p, int q) {
                return face_param(f, nodes_(p, 0), nodes_(p, 1)) <
                       face_param(f, nodes_(q, 0), nodes_(q, 1));
            });
            if (static_cast<int>(fn.size()) != k_ + 1)
                throw DegenerateTable("face node classification failed");
        }
    }

    void build_modes() {
        for (int d = 0; d <= k_; ++d)
            for (int i = 0; i <= d; ++i) {
                mode_i_.push_back(i);
                mode_j_.push_back(d - i);
            }
    }

    int k_;
    MatX nodes_, vandermonde_, inv_vandermonde_, mass_;
    std::vector<int> mode_i_, mode_j_;
    std::array<std::vector<int>, 3> face_nodes_;
    VecX face_nodes_1d_;
};

}  // namespace hdgflow
