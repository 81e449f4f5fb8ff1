#pragma once

// Triangulations of the unit square: a structured coarse mesh, per-element
// nested fine meshes obtained by uniform red refinement, and the conforming
// global fine mesh assembled from them.

#include "msfem/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace msfem {

using Point = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

/// Tolerance of all geometric predicates. Coordinates are dyadic rationals for
/// the structured meshes built here, so this is slack.
inline constexpr double geometry_tolerance = 1e-12;
/// Admissible undershoot of a barycentric coordinate in point location.
inline constexpr double barycentric_tolerance = 1e-10;

inline double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

inline Eigen::Vector3d barycentric(const std::array<Point, 3>& tri, const Point& p)
{
    const double area = signed_area(tri[0], tri[1], tri[2]);
    Eigen::Vector3d lambda;
    lambda[1] = signed_area(tri[0], p, tri[2]) / area;
    lambda[2] = signed_area(tri[0], tri[1], p) / area;
    lambda[0] = 1.0 - lambda[1] - lambda[2];
    return lambda;
}

struct Location {
    int triangle = -1;
    Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
};

/// Uniform bucket grid over the bounding box of a triangulation. Each bucket
/// lists, in increasing order, the triangles whose slightly enlarged bounding
/// box overlaps it.
class PointLocator {
public:
    void build(const std::vector<Point>& vertices, const std::vector<Triangle>& triangles)
    {
        if (triangles.empty())
            return;
        lo_ = vertices[triangles[0][0]];
        hi_ = lo_;
        for (const auto& v : vertices) {
            lo_ = lo_.cwiseMin(v);
            hi_ = hi_.cwiseMax(v);
        }
        const double side = std::max(hi_.x() - lo_.x(), hi_.y() - lo_.y());
        pad_ = 1e-9 * std::max(side, 1.0);
        cells_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(triangles.size()) / 2.0)));
        cell_ = (hi_ - lo_) / cells_;
        cell_ = cell_.cwiseMax(Point::Constant(1e-300));

        std::vector<int> counts(static_cast<std::size_t>(cells_ * cells_) + 1, 0);
        auto for_each_cell = [&](const Triangle& t, auto&& visit) {
            Point tlo = vertices[t[0]], thi = tlo;
            for (int k = 1; k < 3; ++k) {
                tlo = tlo.cwiseMin(vertices[t[k]]);
                thi = thi.cwiseMax(vertices[t[k]]);
            }
            const auto [i0, j0] = cell_of(tlo - Point::Constant(pad_));
            const auto [i1, j1] = cell_of(thi + Point::Constant(pad_));
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i)
                    visit(j * cells_ + i);
        };
        for (const auto& t : triangles)
            for_each_cell(t, [&](int c) { ++counts[c + 1]; });
        for (std::size_t c = 1; c < counts.size(); ++c)
            counts[c] += counts[c - 1];
        offsets_ = counts;
        ids_.assign(offsets_.back(), -1);
        for (int id = 0; id < static_cast<int>(triangles.size()); ++id)
            for_each_cell(triangles[id], [&](int c) { ids_[counts[c]++] = id; });
    }

    bool empty() const noexcept { return offsets_.empty(); }

    /// Lowest-id triangle containing p, or nullopt.
    std::optional<Location> locate(const std::vector<Point>& vertices,
                                   const std::vector<Triangle>& triangles, const Point& p) const
    {
        if ((p.array() < lo_.array() - pad_).any() || (p.array() > hi_.array() + pad_).any())
            return std::nullopt;
        const auto [i, j] = cell_of(p);
        const int c = j * cells_ + i;
        for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) {
            const int id = ids_[k];
            const auto& t = triangles[id];
            auto lambda = barycentric({vertices[t[0]], vertices[t[1]], vertices[t[2]]}, p);
            if (lambda.minCoeff() >= -barycentric_tolerance)
                return Location{id, lambda};
        }
        return std::nullopt;
    }

private:
    std::pair<int, int> cell_of(const Point& p) const
    {
        auto clampi = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, cells_ - 1); };
        return {clampi((p.x() - lo_.x()) / cell_.x()), clampi((p.y() - lo_.y()) / cell_.y())};
    }

    Point lo_ = Point::Zero(), hi_ = Point::Zero(), cell_ = Point::Ones();
    double pad_ = 0.0;
    int cells_ = 1;
    std::vector<int> offsets_;
    std::vector<int> ids_;
};

/// Vertices plus counterclockwise triangles.
struct TriMesh {
    std::vector<Point> vertices;
    std::vector<Triangle> triangles;
    PointLocator locator;

    int num_vertices() const noexcept { return static_cast<int>(vertices.size()); }
    int num_triangles() const noexcept { return static_cast<int>(triangles.size()); }

    std::array<Point, 3> corners(int t) const
    {
        const auto& tri = triangles[t];
        return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
    }

    double area(int t) const
    {
        const auto c = corners(t);
        return signed_area(c[0], c[1], c[2]);
    }

    double total_area() const
    {
        double sum = 0.0;
        for (int t = 0; t < num_triangles(); ++t)
            sum += area(t);
        return sum;
    }

    void build_locator() { locator.build(vertices, triangles); }
};

/// Mesh of the whole domain with homogeneous Dirichlet data on the boundary of
/// the unit square. Free unknowns are the interior vertices, numbered in
/// increasing vertex order.
struct DomainMesh : TriMesh {
    std::vector<int> interior_vertex_ids;
    std::vector<int> dof_of_vertex; // -1 on the boundary

    int num_dofs() const noexcept { return static_cast<int>(interior_vertex_ids.size()); }
    bool on_boundary(int v) const { return dof_of_vertex[v] < 0; }

    void number_interior_dofs()
    {
        interior_vertex_ids.clear();
        dof_of_vertex.assign(vertices.size(), -1);
        for (int v = 0; v < num_vertices(); ++v) {
            const auto& x = vertices[v];
            const bool boundary = std::abs(x.x()) <= geometry_tolerance || std::abs(x.y()) <= geometry_tolerance
                || std::abs(x.x() - 1.0) <= geometry_tolerance || std::abs(x.y() - 1.0) <= geometry_tolerance;
            if (!boundary) {
                dof_of_vertex[v] = num_dofs();
                interior_vertex_ids.push_back(v);
            }
        }
    }
};

/// Structured coarse triangulation T_H. The triangle list doubles as the
/// (element, local index) -> global vertex map.
struct CoarseMesh : DomainMesh {
    int divisions = 0;

    /// Diameter of every element, sqrt(2)/n.
    double diameter() const { return std::sqrt(2.0) / divisions; }
};

/// Nested mesh of one coarse element after `level` uniform red refinements.
/// Vertices are lattice points (i, j), i + j <= 2^level, of the parent's
/// barycentric grid, ordered row by row in j.
struct FineMesh : TriMesh {
    int parent = -1;
    int level = 0;
    std::vector<int> boundary_vertex_ids;
    std::vector<int> interior_vertex_ids;
    std::vector<int> dof_of_vertex; // -1 on the parent's boundary
    std::vector<Eigen::Vector3d> parent_barycentric;
    std::array<Point, 3> parent_corners;

    int num_dofs() const noexcept { return static_cast<int>(interior_vertex_ids.size()); }
    int subdivisions() const noexcept { return 1 << level; }
};

/// Conforming union of the fine meshes of all coarse elements. Coarse vertex v
/// keeps global fine id v.
struct GlobalFineMesh : DomainMesh {
    int level = 0;
    /// For each coarse element, local fine vertex -> global fine vertex.
    std::vector<std::vector<int>> element_injections;
    /// Coarse element containing each fine triangle.
    std::vector<int> coarse_parent;
    /// Largest fine edge length.
    double h = 0.0;
    /// Leg length 1/(n 2^level) of the structured fine grid.
    double cell_size = 0.0;
};

namespace detail {

inline int lattice_index(int i, int j, int n)
{
    return j * (n + 1) - j * (j - 1) / 2 + i;
}

} // namespace detail

inline CoarseMesh build_structured_coarse(int n)
{
    if (n < 2)
        throw InvalidArgument("build_structured_coarse: n must be at least 2 (got " + std::to_string(n) + ")");
    CoarseMesh mesh;
    mesh.divisions = n;
    mesh.vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            mesh.vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    mesh.triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            // every square is cut along its (i,j)-(i+1,j+1) diagonal
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    mesh.number_interior_dofs();
    mesh.build_locator();
    return mesh;
}

inline FineMesh refine_element(const CoarseMesh& mesh, int element, int level)
{
    if (element < 0 || element >= mesh.num_triangles())
        throw InvalidArgument("refine_element: no element " + std::to_string(element));
    if (level < 0 || level > 14)
        throw InvalidArgument("refine_element: refinement level out of range");

    const int n = 1 << level;
    const auto parent = mesh.corners(element);
    FineMesh fine;
    fine.parent = element;
    fine.level = level;
    fine.parent_corners = parent;
    const auto nv = static_cast<std::size_t>((n + 1) * (n + 2) / 2);
    fine.vertices.reserve(nv);
    fine.parent_barycentric.reserve(nv);
    fine.dof_of_vertex.reserve(nv);
    const Point e1 = parent[1] - parent[0];
    const Point e2 = parent[2] - parent[0];
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i + j <= n; ++i) {
            const int v = fine.num_vertices();
            if (i == 0 && j == 0)
                fine.vertices.push_back(parent[0]);
            else if (i == n)
                fine.vertices.push_back(parent[1]);
            else if (j == n)
                fine.vertices.push_back(parent[2]);
            else
                fine.vertices.push_back(parent[0] + (i * e1 + j * e2) / n);
            fine.parent_barycentric.emplace_back(static_cast<double>(n - i - j) / n, static_cast<double>(i) / n,
                                                 static_cast<double>(j) / n);
            if (i == 0 || j == 0 || i + j == n) {
                fine.boundary_vertex_ids.push_back(v);
                fine.dof_of_vertex.push_back(-1);
            } else {
                fine.dof_of_vertex.push_back(fine.num_dofs());
                fine.interior_vertex_ids.push_back(v);
            }
        }
    }
    fine.triangles.reserve(static_cast<std::size_t>(n * n));
    using detail::lattice_index;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i + j < n; ++i) {
            fine.triangles.push_back({lattice_index(i, j, n), lattice_index(i + 1, j, n), lattice_index(i, j + 1, n)});
            if (i + j + 2 <= n)
                fine.triangles.push_back(
                    {lattice_index(i + 1, j, n), lattice_index(i + 1, j + 1, n), lattice_index(i, j + 1, n)});
        }
    }
    return fine;
}

/// Global fine mesh numbering: coarse vertices, then the points interior to
/// each coarse edge (in order of first appearance, oriented from the lower to
/// the higher vertex id), then the points interior to each coarse element.
inline GlobalFineMesh build_global_fine(const CoarseMesh& mesh, int level)
{
    if (level < 0 || level > 14)
        throw InvalidArgument("build_global_fine: refinement level out of range");
    const int n = 1 << level;
    const int nv = mesh.num_vertices();
    const int nk = mesh.num_triangles();

    std::map<std::pair<int, int>, int> edge_ids;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            edge_ids.try_emplace({std::min(a, b), std::max(a, b)}, static_cast<int>(edge_ids.size()));
        }
    const int per_edge = n - 1;
    const int per_element = (n - 1) * (n - 2) / 2;
    const int edge_base = nv;
    const int element_base = edge_base + static_cast<int>(edge_ids.size()) * per_edge;

    GlobalFineMesh g;
    g.level = level;
    g.vertices.assign(static_cast<std::size_t>(element_base + nk * per_element), Point::Zero());
    std::vector<char> written(g.vertices.size(), 0);
    g.element_injections.resize(nk);
    g.triangles.reserve(static_cast<std::size_t>(nk) * n * n);
    g.coarse_parent.reserve(static_cast<std::size_t>(nk) * n * n);

    auto edge_point = [&](int a, int b, int t_from_a) {
        const int e = edge_ids.at({std::min(a, b), std::max(a, b)});
        const int t = a < b ? t_from_a : n - t_from_a;
        return edge_base + e * per_edge + (t - 1);
    };

    for (int k = 0; k < nk; ++k) {
        const FineMesh local = refine_element(mesh, k, level);
        const auto& cv = mesh.triangles[k];
        auto& inj = g.element_injections[k];
        inj.resize(local.vertices.size());
        int interior_counter = 0;
        for (int j = 0; j <= n; ++j) {
            for (int i = 0; i + j <= n; ++i) {
                const int lv = detail::lattice_index(i, j, n);
                int gv;
                if (i == 0 && j == 0)
                    gv = cv[0];
                else if (i == n)
                    gv = cv[1];
                else if (j == n)
                    gv = cv[2];
                else if (j == 0)
                    gv = edge_point(cv[0], cv[1], i);
                else if (i == 0)
                    gv = edge_point(cv[0], cv[2], j);
                else if (i + j == n)
                    gv = edge_point(cv[1], cv[2], j);
                else
                    gv = element_base + k * per_element + interior_counter++;
                inj[lv] = gv;
                if (!written[gv]) {
                    g.vertices[gv] = local.vertices[lv];
                    written[gv] = 1;
                }
            }
        }
        for (const auto& t : local.triangles) {
            g.triangles.push_back({inj[t[0]], inj[t[1]], inj[t[2]]});
            g.coarse_parent.push_back(k);
        }
    }
    for (const auto& t : g.triangles)
        for (int a = 0; a < 3; ++a)
            g.h = std::max(g.h, (g.vertices[t[a]] - g.vertices[t[(a + 1) % 3]]).norm());
    g.cell_size = 1.0 / (static_cast<double>(mesh.divisions) * n);
    g.number_interior_dofs();
    g.build_locator();
    return g;
}

/// Locates p in a mesh of the unit square. Ties (points on shared edges or
/// vertices) resolve to the lowest triangle id.
inline Location locate_point(const DomainMesh& mesh, const Point& p)
{
    if (!p.allFinite() || (p.array() < -geometry_tolerance).any() || (p.array() > 1.0 + geometry_tolerance).any())
        throw OutOfDomain("locate_point: point outside the unit square");
    std::optional<Location> loc;
    if (!mesh.locator.empty()) {
        loc = mesh.locator.locate(mesh.vertices, mesh.triangles, p);
    } else {
        for (int t = 0; t < mesh.num_triangles() && !loc; ++t) {
            auto lambda = barycentric(mesh.corners(t), p);
            if (lambda.minCoeff() >= -barycentric_tolerance)
                loc = Location{t, lambda};
        }
    }
    if (!loc)
        throw OutOfDomain("locate_point: no triangle contains the point");
    return *loc;
}

} // namespace msfem
