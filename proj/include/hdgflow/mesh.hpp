/** \file mesh.hpp
 * \brief Conforming triangular meshes, their skeleton (face) connectivity and
 *        the plain-text mesh file format.
 */
#pragma once

#include "hdgflow/reference_element.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hdgflow {

/// One skeleton face.  The owning (left) side is the lower element index and
/// defines the canonical normal and the canonical face parameter, which runs
/// from the lower to the higher global corner id.
struct Face {
    int left_elem = -1;   ///< Owning element.
    int left_face = -1;   ///< Local face id (0..2) within the owner.
    int right_elem = -1;  ///< Neighbour element, -1 on the boundary.
    int right_face = -1;
    bool left_reversed = false;   ///< Owner's local parameter opposes canonical.
    bool right_reversed = false;  ///< Neighbour's local parameter opposes canonical.
    int tag = -1;                 ///< Boundary tag id, -1 for interior faces.

    bool boundary() const { return right_elem < 0; }
};

/// Conforming triangulation with degree-k_geo nodal geometry; immutable after
/// construction.
class Mesh {
  public:
    /// Assemble the skeleton from raw element connectivity.
    Mesh(int k_geo, MatX nodes, std::vector<std::vector<int>> elements,
         std::vector<std::string> tag_names,
         const std::vector<std::tuple<int, int, std::string>>& boundary)
        : k_geo_(k_geo),
          nodes_(std::move(nodes)),
          elements_(std::move(elements)),
          tag_names_(std::move(tag_names)) {
        const int npe = shape_node_count(2, ElementShape::simplex, k_geo_);
        for (const auto& e : elements_)
            if (static_cast<int>(e.size()) != npe)
                throw NonConforming("element node count does not match geometry degree");
        build_skeleton(boundary);
    }

    int geometry_degree() const { return k_geo_; }
    int num_nodes() const { return static_cast<int>(nodes_.rows()); }
    int num_elements() const { return static_cast<int>(elements_.size()); }
    int num_faces() const { return static_cast<int>(faces_.size()); }

    const MatX& nodes() const { return nodes_; }
    const std::vector<int>& element_nodes(int e) const { return elements_[e]; }
    const Face& face(int f) const { return faces_[f]; }
    const std::vector<Face>& faces() const { return faces_; }
    /// Face ids incident to element e, indexed by local face.
    const std::array<int, 3>& element_faces(int e) const { return elem_faces_[e]; }
    const std::vector<std::string>& tag_names() const { return tag_names_; }

    /// Id of a named boundary tag.
    int tag_id(const std::string& name) const {
        for (int t = 0; t < static_cast<int>(tag_names_.size()); ++t)
            if (tag_names_[t] == name) return t;
        throw UntaggedBoundary("unknown boundary tag '" + name + "'");
    }

    /// Physical coordinates of the element's nodal points (n_en x 2).
    MatX element_coords(int e) const {
        MatX x(elements_[e].size(), 2);
        for (size_t i = 0; i < elements_[e].size(); ++i) x.row(i) = nodes_.row(elements_[e][i]);
        return x;
    }

    /// Longest corner-to-corner edge of element e.
    double element_longest_edge(int e) const {
        double h = 0.0;
        for (int f = 0; f < 3; ++f) {
            const auto [a, b] = ReferenceElement::face_vertices(f);
            const Vec2 d = nodes_.row(elements_[e][b]) - nodes_.row(elements_[e][a]);
            h = std::max(h, d.norm());
        }
        return h;
    }

    /// Circumcircle diameter of the straight corner proxy of element e.
    double element_circumdiameter(int e) const {
        const Vec2 p0 = nodes_.row(elements_[e][0]);
        const Vec2 p1 = nodes_.row(elements_[e][1]);
        const Vec2 p2 = nodes_.row(elements_[e][2]);
        const double a = (p1 - p0).norm(), b = (p2 - p1).norm(), c = (p0 - p2).norm();
        const double area2 = std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                                      (p2.x() - p0.x()) * (p1.y() - p0.y()));
        if (area2 <= 0.0) throw InvertedElement("degenerate element");
        return a * b * c / area2;
    }

    /// Characteristic mesh size: the longest edge over all elements.
    double characteristic_size() const {
        double h = 0.0;
        for (int e = 0; e < num_elements(); ++e) h = std::max(h, element_longest_edge(e));
        return h;
    }

  private:
    void build_skeleton(const std::vector<std::tuple<int, int, std::string>>& boundary) {
        elem_faces_.assign(elements_.size(), {-1, -1, -1});
        std::map<std::pair<int, int>, int> lookup;
        for (int e = 0; e < num_elements(); ++e) {
            for (int lf = 0; lf < 3; ++lf) {
                const auto [la, lb] = ReferenceElement::face_vertices(lf);
                const int a = elements_[e][la], b = elements_[e][lb];
                const auto key = std::minmax(a, b);
                auto it = lookup.find(key);
                if (it == lookup.end()) {
                    Face f;
                    f.left_elem = e;
                    f.left_face = lf;
                    f.left_reversed = a > b;
                    lookup.emplace(key, static_cast<int>(faces_.size()));
                    elem_faces_[e][lf] = static_cast<int>(faces_.size());
                    faces_.push_back(f);
                } else {
                    Face& f = faces_[it->second];
                    if (f.right_elem >= 0)
                        throw NonConforming("face shared by more than two elements");
                    f.right_elem = e;
                    f.right_face = lf;
                    f.right_reversed = a > b;
                    elem_faces_[e][lf] = it->second;
                }
            }
        }
        // Conformity of the high-order edge nodes.
        const ReferenceElement geom(k_geo_);
        for (const Face& f : faces_) {
            if (f.boundary()) continue;
            auto side_nodes = [&](int e, int lf) {
                std::vector<int> ids;
                for (int i : geom.face_nodes(lf)) ids.push_back(elements_[e][i]);
                std::sort(ids.begin(), ids.end());
                return ids;
            };
            if (side_nodes(f.left_elem, f.left_face) != side_nodes(f.right_elem, f.right_face))
                throw NonConforming("edge nodes of adjacent elements disagree");
        }
        // Boundary tags.
        for (const auto& [e, lf, name] : boundary) {
            if (e < 0 || e >= num_elements() || lf < 0 || lf > 2)
                throw ParseError("boundary record references invalid element/face");
            int t = -1;
            for (int i = 0; i < static_cast<int>(tag_names_.size()); ++i)
                if (tag_names_[i] == name) t = i;
            if (t < 0) {
                t = static_cast<int>(tag_names_.size());
                tag_names_.push_back(name);
            }
            Face& f = faces_[elem_faces_[e][lf]];
            if (!f.boundary())
                throw NonConforming("boundary tag on an interior face");
            f.tag = t;
        }
        for (int i = 0; i < num_faces(); ++i)
            if (faces_[i].boundary() && faces_[i].tag < 0)
                throw UntaggedBoundary("boundary face of element " +
                                       std::to_string(faces_[i].left_elem) + " has no tag");
    }

    int k_geo_;
    MatX nodes_;
    std::vector<std::vector<int>> elements_;
    std::vector<std::string> tag_names_;
    std::vector<Face> faces_;
    std::vector<std::array<int, 3>> elem_faces_;
};

namespace detail {

/// Tokenised line reader that tracks line numbers for error reporting.
class LineReader {
  public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-empty, non-comment line split into tokens; empty at EOF.
    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            std::istringstream ls(line);
            std::vector<std::string> tok;
            std::string t;
            while (ls >> t) tok.push_back(t);
            if (!tok.empty()) return tok;
        }
        return {};
    }

    int line() const { return lineno_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("mesh line " + std::to_string(lineno_) + ": " + what);
    }

  private:
    std::istream& in_;
    int lineno_ = 0;
};

inline long parse_int(const std::string& s, const LineReader& r) {
    size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size()) r.fail("expected an integer, got '" + s + "'");
    return v;
}

inline double parse_double(const std::string& s, const LineReader& r) {
    size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size()) r.fail("expected a number, got '" + s + "'");
    return v;
}

}  // namespace detail

/// Parse a mesh from a stream in the plain-text format (see docs/FORMATS.md).
inline Mesh read_mesh(std::istream& in) {
    detail::LineReader r(in);

    auto tok = r.next();
    if (tok.size() != 3 || tok[0] != "mesh" || tok[1] != "2d" ||
        tok[2].rfind("k=", 0) != 0)
        r.fail("expected header 'mesh 2d k=<degree>'");
    const int k = static_cast<int>(detail::parse_int(tok[2].substr(2), r));
    if (k < 1) r.fail("geometry degree must be >= 1");

    tok = r.next();
    if (tok.size() != 2 || tok[0] != "nodes") r.fail("expected 'nodes <N>'");
    const long nn = detail::parse_int(tok[1], r);
    if (nn < 3) r.fail("mesh needs at least 3 nodes");
    MatX nodes(nn, 2);
    for (long i = 0; i < nn; ++i) {
        tok = r.next();
        if (tok.size() != 2) r.fail("expected 'x y'");
        nodes(i, 0) = detail::parse_double(tok[0], r);
        nodes(i, 1) = detail::parse_double(tok[1], r);
    }

    tok = r.next();
    if (tok.size() != 2 || tok[0] != "elements") r.fail("expected 'elements <E>'");
    const long ne = detail::parse_int(tok[1], r);
    if (ne < 1) r.fail("mesh needs at least 1 element");
    const int npe = shape_node_count(2, ElementShape::simplex, k);
    std::vector<std::vector<int>> elements(ne);
    for (long e = 0; e < ne; ++e) {
        tok = r.next();
        if (static_cast<int>(tok.size()) != npe)
            r.fail("expected " + std::to_string(npe) + " node indices");
        for (const auto& t : tok) {
            const long id = detail::parse_int(t, r);
            if (id < 0 || id >= nn) r.fail("node index " + t + " out of range");
            elements[e].push_back(static_cast<int>(id));
        }
    }

    tok = r.next();
    if (tok.size() != 2 || tok[0] != "boundary") r.fail("expected 'boundary <B>'");
    const long nb = detail::parse_int(tok[1], r);
    std::vector<std::tuple<int, int, std::string>> boundary;
    for (long i = 0; i < nb; ++i) {
        tok = r.next();
        if (tok.size() != 3) r.fail("expected 'elem local_face tag_name'");
        const long e = detail::parse_int(tok[0], r);
        const long lf = detail::parse_int(tok[1], r);
        if (e < 0 || e >= ne) r.fail("element index out of range");
        if (lf < 0 || lf > 2) r.fail("local face must be 0, 1 or 2");
        boundary.emplace_back(static_cast<int>(e), static_cast<int>(lf), tok[2]);
    }

    tok = r.next();
    if (!tok.empty()) r.fail("trailing content after the boundary block");

    return Mesh(k, std::move(nodes), std::move(elements), {}, boundary);
}

/// Parse a mesh file from disk.
inline Mesh read_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

/// Write a mesh in the plain-text format.
inline void write_mesh(const Mesh& mesh, std::ostream& out) {
    out << "mesh 2d k=" << mesh.geometry_degree() << "\n";
    out << "nodes " << mesh.num_nodes() << "\n";
    out.precision(17);
    for (int i = 0; i < mesh.num_nodes(); ++i)
        out << mesh.nodes()(i, 0) << " " << mesh.nodes()(i, 1) << "\n";
    out << "elements " << mesh.num_elements() << "\n";
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& en = mesh.element_nodes(e);
        for (size_t i = 0; i < en.size(); ++i) out << (i ? " " : "") << en[i];
        out << "\n";
    }
    std::vector<std::tuple<int, int, int>> btags;
    for (const Face& f : mesh.faces())
        if (f.boundary()) btags.emplace_back(f.left_elem, f.left_face, f.tag);
    out << "boundary " << btags.size() << "\n";
    for (const auto& [e, lf, t] : btags)
        out << e << " " << lf << " " << mesh.tag_names()[t] << "\n";
}

}  // namespace hdgflow
