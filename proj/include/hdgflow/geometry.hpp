/** \file geometry.hpp
 * \brief Isoparametric mappings and precomputed quadrature-point data for
 *        element volumes and skeleton faces.
 */
#pragma once

#include "hdgflow/generators.hpp"

namespace hdgflow {

/// Physical point, Jacobian and determinant of the geometric map of one
/// element at one reference point.
struct MappedPoint {
    Vec2 x;
    Mat2 jacobian;
    double det;
};

/// Evaluate the degree-k_geo nodal map of an element at reference points;
/// throws InvertedElement if the Jacobian determinant is not positive.
inline std::vector<MappedPoint> map_element(const Mesh& mesh, int e,
                                            const ReferenceElement& geom,
                                            const MatX& ref_points) {
    const MatX coords = mesh.element_coords(e);
    const MatX shape = geom.shape_at(ref_points);
    const auto grad = geom.grad_shape_at(ref_points);
    std::vector<MappedPoint> out(ref_points.rows());
    for (Eigen::Index q = 0; q < ref_points.rows(); ++q) {
        MappedPoint& m = out[q];
        m.x = (shape.row(q) * coords).transpose();
        m.jacobian.row(0) = grad[0].row(q) * coords;  // dx/dxi, dy/dxi
        m.jacobian.row(1) = grad[1].row(q) * coords;
        m.jacobian.transposeInPlace();                // J(i,j) = dx_i/dxi_j
        m.det = m.jacobian.determinant();
        if (m.det <= 0.0)
            throw InvertedElement("element " + std::to_string(e) +
                                  " has non-positive Jacobian determinant");
    }
    return out;
}

/// Volume quadrature data of one element.
struct ElementGeometry {
    MatX xq;          ///< n_q x 2 physical quadrature points.
    VecX wdet;        ///< Quadrature weights times |J|.
    MatX dndx, dndy;  ///< n_q x n_en physical shape-function derivatives.
};

/// Face quadrature data of one element side, sampled at the canonical face
/// parameter's Gauss points.
struct SideGeometry {
    MatX xq;      ///< n_q1 x 2 physical quadrature points.
    VecX wds;     ///< Quadrature weights times arc-length metric.
    MatX normal;  ///< n_q1 x 2 outward unit normals of this side.
};

/// Precomputed reference tables and per-element metric data for one mesh and
/// one solution degree; owns its mesh and is immutable after construction.
class GeometryCache {
  public:
    GeometryCache(Mesh mesh, int k_sol)
        : mesh_(std::move(mesh)),
          geom_(mesh_.geometry_degree()),
          sol_(k_sol),
          vol_rule_(triangle_rule(2 * k_sol + 4)),
          face_rule_(interval_rule(2 * (k_sol + 4) - 1)) {
        build_reference_tables();
        elements_.resize(mesh_.num_elements());
        sides_.resize(static_cast<size_t>(mesh_.num_elements()) * 3);
        for (int e = 0; e < mesh_.num_elements(); ++e) {
            build_element(e);
            for (int lf = 0; lf < 3; ++lf) build_side(e, lf);
        }
    }

    const Mesh& mesh() const { return mesh_; }
    const ReferenceElement& solution_element() const { return sol_; }
    const ReferenceElement& geometry_element() const { return geom_; }
    const QuadratureRule& volume_rule() const { return vol_rule_; }
    const QuadratureRule& face_rule() const { return face_rule_; }

    const ElementGeometry& element(int e) const { return elements_[e]; }
    const SideGeometry& side(int e, int lf) const { return sides_[3 * e + lf]; }

    /// Solution shape functions at the volume quadrature points (shared).
    const MatX& volume_shape() const { return vol_shape_; }
    /// Solution shape functions at the side quadrature points, per local face
    /// and orientation (0 = local parameter equals canonical, 1 = reversed).
    const MatX& side_shape(int lf, bool reversed) const {
        return side_shape_[lf][reversed];
    }
    /// Canonical-order face nodal shapes at the face quadrature points: the
    /// interpolation operator of the trace unknowns.
    const MatX& trace_shape() const { return trace_shape_; }
    /// Element node ids on a side, listed in canonical face order.
    std::vector<int> side_nodes(int lf, bool reversed) const {
        std::vector<int> out = sol_.face_nodes(lf);
        if (reversed) std::reverse(out.begin(), out.end());
        return out;
    }

    /// Whether a given element side opposes the canonical face direction.
    bool side_reversed(int e, int lf) const {
        const Face& f = mesh_.face(mesh_.element_faces(e)[lf]);
        return (f.left_elem == e && f.left_face == lf) ? f.left_reversed
                                                       : f.right_reversed;
    }

  private:
    /// 1D Lagrange shapes (and parameter derivatives) of a nodal set at given
    /// parameter values.
    static std::pair<MatX, MatX> lagrange_1d(const VecX& nodes, const VecX& at) {
        const int n = static_cast<int>(nodes.size());
        MatX v(n, n), p(at.size(), n), dp(at.size(), n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                v(i, j) = jacobi_p(j, 0, 0, 2.0 * nodes[i] - 1.0);
        for (Eigen::Index q = 0; q < at.size(); ++q)
            for (int j = 0; j < n; ++j) {
                p(q, j) = jacobi_p(j, 0, 0, 2.0 * at[q] - 1.0);
                dp(q, j) = 2.0 * grad_jacobi_p(j, 0, 0, 2.0 * at[q] - 1.0);
            }
        const MatX vinv = v.fullPivLu().inverse();
        return {p * vinv, dp * vinv};
    }

    void build_reference_tables() {
        vol_shape_ = sol_.shape_at(vol_rule_.points);
        vol_dshape_ = sol_.grad_shape_at(vol_rule_.points);
        geo_vol_dshape_ = geom_.grad_shape_at(vol_rule_.points);

        const VecX sc = face_rule_.points.col(0);
        VecX sr = VecX::Ones(sc.size()) - sc;
        for (int rev = 0; rev < 2; ++rev) {
            const VecX& s = rev ? sr : sc;
            for (int lf = 0; lf < 3; ++lf) {
                MatX ref(s.size(), 2);
                for (Eigen::Index q = 0; q < s.size(); ++q)
                    ref.row(q) = ReferenceElement::face_point(lf, s[q]).transpose();
                side_shape_[lf][rev] = sol_.shape_at(ref);
            }
            auto [l, dl] = lagrange_1d(geom_.face_nodes_1d(), s);
            geo_face_shape_[rev] = std::move(l);
            geo_face_dshape_[rev] = std::move(dl);
        }
        auto [lt, dlt] = lagrange_1d(sol_.face_nodes_1d(), sc);
        trace_shape_ = std::move(lt);
    }

    void build_element(int e) {
        const MatX coords = mesh_.element_coords(e);
        ElementGeometry& g = elements_[e];
        const int nq = vol_rule_.size(), nen = sol_.num_nodes();
        g.xq.resize(nq, 2);
        g.wdet.resize(nq);
        g.dndx.resize(nq, nen);
        g.dndy.resize(nq, nen);
        const MatX geo_shape = geom_.shape_at(vol_rule_.points);
        for (int q = 0; q < nq; ++q) {
            g.xq.row(q) = geo_shape.row(q) * coords;
            Mat2 J;
            J.row(0) = geo_vol_dshape_[0].row(q) * coords;
            J.row(1) = geo_vol_dshape_[1].row(q) * coords;
            J.transposeInPlace();
            const double det = J.determinant();
            if (det <= 0.0)
                throw InvertedElement("element " + std::to_string(e) +
                                      " has non-positive Jacobian determinant");
            g.wdet[q] = vol_rule_.weights[q] * det;
            const Mat2 Jit = J.inverse().transpose();
            for (int i = 0; i < nen; ++i) {
                const Vec2 dref(vol_dshape_[0](q, i), vol_dshape_[1](q, i));
                const Vec2 dphys = Jit * dref;
                g.dndx(q, i) = dphys.x();
                g.dndy(q, i) = dphys.y();
            }
        }
    }

    void build_side(int e, int lf) {
        const bool rev = side_reversed(e, lf);
        SideGeometry& g = sides_[3 * e + lf];
        const int nq = face_rule_.size();
        // Coordinates of the geometry face nodes in local traversal order.
        const auto& fnodes = geom_.face_nodes(lf);
        MatX xf(fnodes.size(), 2);
        for (size_t i = 0; i < fnodes.size(); ++i)
            xf.row(i) = mesh_.nodes().row(mesh_.element_nodes(e)[fnodes[i]]);
        // Quadrature runs over the canonical parameter; the local parameter is
        // s or 1-s, and tangents are taken along the local traversal, which is
        // counterclockwise for this element.
        g.xq = geo_face_shape_[rev] * xf;
        MatX t = geo_face_dshape_[rev] * xf;
        g.wds.resize(nq);
        g.normal.resize(nq, 2);
        for (int q = 0; q < nq; ++q) {
            const double len = t.row(q).norm();
            if (len <= 0.0) throw InvertedElement("degenerate face metric");
            g.wds[q] = face_rule_.weights[q] * len;
            g.normal(q, 0) = t(q, 1) / len;
            g.normal(q, 1) = -t(q, 0) / len;
        }
    }

    Mesh mesh_;
    ReferenceElement geom_, sol_;
    QuadratureRule vol_rule_, face_rule_;
    MatX vol_shape_;
    std::array<MatX, 2> vol_dshape_, geo_vol_dshape_;
    std::array<std::array<MatX, 2>, 3> side_shape_;
    std::array<MatX, 2> geo_face_shape_, geo_face_dshape_;
    MatX trace_shape_;
    std::vector<ElementGeometry> elements_;
    std::vector<SideGeometry> sides_;
};

}  // namespace hdgflow
