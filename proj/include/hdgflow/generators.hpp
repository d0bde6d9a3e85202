/** \file generators.hpp
 * \brief Built-in mesh generators: structured triangulations of the unit
 *        square, a curved variant, a four-element square and a supersonic
 *        wedge channel.
 */
#pragma once

#include "hdgflow/mesh.hpp"

#include <functional>

namespace hdgflow {

namespace detail {

/// Incremental builder that allocates shared edge nodes exactly once so the
/// generated meshes are conforming by construction.
class MeshBuilder {
  public:
    explicit MeshBuilder(int k_geo) : k_(k_geo), ref_(k_geo) {}

    int add_vertex(const Vec2& p) {
        coords_.push_back(p);
        return static_cast<int>(coords_.size()) - 1;
    }

    /// Add a counterclockwise triangle given its corner vertex ids.
    void add_triangle(int a, int b, int c) {
        const std::array<int, 3> corner{a, b, c};
        std::vector<int> en(corner.begin(), corner.end());
        for (int lf = 0; lf < 3; ++lf) {
            const auto [la, lb] = ReferenceElement::face_vertices(lf);
            for (int id : edge_nodes(corner[la], corner[lb])) en.push_back(id);
        }
        const int n_face = 3 + 3 * (k_ - 1);
        const MatX& rn = ref_.nodes();
        const Vec2 p0 = coords_[a], p1 = coords_[b], p2 = coords_[c];
        for (int i = n_face; i < ref_.num_nodes(); ++i) {
            const Vec2 p = p0 + rn(i, 0) * (p1 - p0) + rn(i, 1) * (p2 - p0);
            en.push_back(add_vertex(p));
        }
        elements_.push_back(std::move(en));
    }

    void tag(int elem, int local_face, std::string name) {
        boundary_.emplace_back(elem, local_face, std::move(name));
    }

    int num_elements() const { return static_cast<int>(elements_.size()); }

    /// Apply a coordinate map to every node (conformity is preserved because
    /// shared nodes are stored once).
    void transform(const std::function<Vec2(const Vec2&)>& map) {
        for (Vec2& p : coords_) p = map(p);
    }

    Mesh finish() {
        MatX nodes(coords_.size(), 2);
        for (size_t i = 0; i < coords_.size(); ++i) nodes.row(i) = coords_[i];
        return Mesh(k_, std::move(nodes), std::move(elements_), {}, boundary_);
    }

  private:
    /// Interior nodes of the undirected edge (a, b), listed in the direction
    /// a -> b; created on first use along the canonical low -> high direction.
    std::vector<int> edge_nodes(int a, int b) {
        if (k_ < 2) return {};
        const auto key = std::minmax(a, b);
        auto it = edges_.find(key);
        if (it == edges_.end()) {
            const Vec2 pa = coords_[key.first], pb = coords_[key.second];
            std::vector<int> ids;
            for (int i = 1; i < k_; ++i) {
                const double s = ref_.face_nodes_1d()[i];
                ids.push_back(add_vertex(pa + s * (pb - pa)));
            }
            it = edges_.emplace(key, std::move(ids)).first;
        }
        std::vector<int> out = it->second;
        if (a > b) std::reverse(out.begin(), out.end());
        return out;
    }

    int k_;
    ReferenceElement ref_;
    std::vector<Vec2> coords_;
    std::vector<std::vector<int>> elements_;
    std::vector<std::tuple<int, int, std::string>> boundary_;
    std::map<std::pair<int, int>, std::vector<int>> edges_;
};

/// Structured nx x ny lattice of [0,1]^2, each cell split along the
/// lower-left to upper-right diagonal; boundary tags left/right/bottom/top.
inline Mesh lattice_mesh(int nx, int ny, int k_geo,
                         const std::function<Vec2(const Vec2&)>& map = nullptr) {
    MeshBuilder b(k_geo);
    std::vector<int> vid((nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            vid[j * (nx + 1) + i] =
                b.add_vertex(Vec2(static_cast<double>(i) / nx, static_cast<double>(j) / ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int v00 = vid[j * (nx + 1) + i], v10 = vid[j * (nx + 1) + i + 1];
            const int v01 = vid[(j + 1) * (nx + 1) + i], v11 = vid[(j + 1) * (nx + 1) + i + 1];
            const int lower = b.num_elements();
            b.add_triangle(v00, v10, v11);
            b.add_triangle(v00, v11, v01);
            if (j == 0) b.tag(lower, 0, "bottom");
            if (i == nx - 1) b.tag(lower, 1, "right");
            if (j == ny - 1) b.tag(lower + 1, 1, "top");
            if (i == 0) b.tag(lower + 1, 2, "left");
        }
    if (map) b.transform(map);
    return b.finish();
}

}  // namespace detail

/// Uniform triangulation of [0,1]^2 with 4 * 2^(level-1) cells per side.
inline Mesh unit_square_mesh(int level, int k_geo = 1) {
    if (level < 1) throw UnsupportedShape("mesh level must be >= 1");
    const int n = 4 << (level - 1);
    return detail::lattice_mesh(n, n, k_geo);
}

/// Four triangles of [0,1]^2 meeting at the centre.
inline Mesh square4_mesh(int k_geo = 1) {
    detail::MeshBuilder b(k_geo);
    const int v0 = b.add_vertex(Vec2(0, 0)), v1 = b.add_vertex(Vec2(1, 0));
    const int v2 = b.add_vertex(Vec2(1, 1)), v3 = b.add_vertex(Vec2(0, 1));
    const int vc = b.add_vertex(Vec2(0.5, 0.5));
    b.add_triangle(v0, v1, vc);
    b.add_triangle(v1, v2, vc);
    b.add_triangle(v2, v3, vc);
    b.add_triangle(v3, v0, vc);
    b.tag(0, 0, "bottom");
    b.tag(1, 0, "right");
    b.tag(2, 0, "top");
    b.tag(3, 0, "left");
    return b.finish();
}

/// Unit-square triangulation with genuinely curved interior element edges:
/// every node is displaced by a smooth field that vanishes on the boundary.
inline Mesh curved_mesh(int level, int k_geo = 2) {
    if (level < 1) throw UnsupportedShape("mesh level must be >= 1");
    if (k_geo < 2) throw UnsupportedShape("a curved mesh needs geometry degree >= 2");
    const int n = 4 << (level - 1);
    const double amp = 0.4 / (n * M_PI);
    return detail::lattice_mesh(n, n, k_geo, [amp](const Vec2& p) {
        const double d = amp * std::sin(2.0 * M_PI * p.x()) * std::sin(2.0 * M_PI * p.y());
        return Vec2(p.x() + d, p.y() + d);
    });
}

/// Supersonic wedge channel: x in [0,3], a ramp of the given angle rising
/// from (1, 0), upper wall at y = 1; built by shearing a structured lattice.
inline Mesh wedge_mesh(int level, int k_geo = 1, double angle_deg = 20.0) {
    if (level < 1) throw UnsupportedShape("mesh level must be >= 1");
    const int nx = 12 << (level - 1), ny = 4 << (level - 1);
    const double slope = std::tan(angle_deg * M_PI / 180.0);
    return detail::lattice_mesh(nx, ny, k_geo, [slope](const Vec2& p) {
        const double x = 3.0 * p.x();
        const double yb = std::max(0.0, (x - 1.0) * slope);
        return Vec2(x, yb + p.y() * (1.0 - yb));
    });
}

/// Instantiate a built-in mesh by name; "ringleb" and "couette" are aliases
/// of the unit-square family used by the corresponding verification cases.
inline Mesh builtin_mesh(const std::string& name, int level, int k_geo = 1) {
    if (name == "unit_square" || name == "ringleb" || name == "couette")
        return unit_square_mesh(level, k_geo);
    if (name == "square4") return square4_mesh(k_geo);
    if (name == "curved") return curved_mesh(level, std::max(k_geo, 2));
    if (name == "wedge") return wedge_mesh(level, k_geo);
    throw MissingSpec("unknown built-in mesh '" + name + "'");
}

}  // namespace hdgflow
