#include "msfem/mesh.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

namespace {

using namespace msfem;

/// Every edge is shared by at most two triangles and the edges used once
/// (the boundary) add up to the perimeter of the unit square. A hanging node
/// would leave an interior edge used once and break the perimeter sum.
void expect_conforming(const TriMesh& mesh, double perimeter = 4.0)
{
    std::map<std::pair<int, int>, int> uses;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    double boundary_length = 0.0;
    for (const auto& [edge, count] : uses) {
        ASSERT_LE(count, 2);
        if (count == 1)
            boundary_length += (mesh.vertices[edge.first] - mesh.vertices[edge.second]).norm();
    }
    EXPECT_NEAR(boundary_length, perimeter, 1e-12);
}

bool on_unit_square_boundary(const Point& x)
{
    return std::abs(x.x()) < 1e-12 || std::abs(x.y()) < 1e-12 || std::abs(x.x() - 1) < 1e-12
        || std::abs(x.y() - 1) < 1e-12;
}

TEST(StructuredCoarse, CountsFollowFormula)
{
    for (int n : {2, 3, 4, 7}) {
        const auto mesh = build_structured_coarse(n);
        EXPECT_EQ(mesh.num_vertices(), (n + 1) * (n + 1));
        EXPECT_EQ(mesh.num_triangles(), 2 * n * n);
        EXPECT_EQ(mesh.num_dofs(), (n - 1) * (n - 1));
    }
    const auto m2 = build_structured_coarse(2);
    EXPECT_EQ(m2.num_vertices(), 9);
    EXPECT_EQ(m2.num_triangles(), 8);
    EXPECT_EQ(m2.num_dofs(), 1);
    const auto m4 = build_structured_coarse(4);
    EXPECT_EQ(m4.num_vertices(), 25);
    EXPECT_EQ(m4.num_triangles(), 32);
    EXPECT_EQ(m4.num_dofs(), 9);
}

TEST(StructuredCoarse, AreasPartitionTheSquare)
{
    const auto mesh = build_structured_coarse(8);
    EXPECT_NEAR(mesh.total_area(), 1.0, 1e-12);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        EXPECT_GT(mesh.area(t), 0.0);
    EXPECT_NEAR(mesh.diameter(), std::sqrt(2.0) / 8, 1e-15);
}

TEST(StructuredCoarse, RejectsSingleDivision)
{
    EXPECT_THROW(build_structured_coarse(1), InvalidArgument);
    EXPECT_THROW(build_structured_coarse(0), InvalidArgument);
}

TEST(StructuredCoarse, BoundaryVerticesAreExactlyOnTheSquareBoundary)
{
    const auto mesh = build_structured_coarse(5);
    expect_conforming(mesh);
    for (int v = 0; v < mesh.num_vertices(); ++v)
        EXPECT_EQ(mesh.on_boundary(v), on_unit_square_boundary(mesh.vertices[v]));
}

TEST(RefineElement, LevelZeroIsTheParent)
{
    const auto mesh = build_structured_coarse(2);
    const auto fine = refine_element(mesh, 3, 0);
    EXPECT_EQ(fine.num_triangles(), 1);
    EXPECT_EQ(fine.num_vertices(), 3);
    EXPECT_EQ(fine.boundary_vertex_ids.size(), 3u);
    EXPECT_EQ(fine.num_dofs(), 0);
    const auto parent = mesh.corners(3);
    const auto child = fine.corners(0);
    for (int k = 0; k < 3; ++k)
        EXPECT_EQ(child[k], parent[k]);
}

TEST(RefineElement, CountsMatchEnumeration)
{
    const auto mesh = build_structured_coarse(3);
    for (int r = 0; r <= 5; ++r) {
        const auto fine = refine_element(mesh, 4, r);
        // oracle: count vertices strictly inside the parent by barycentric test
        int inside = 0;
        for (const auto& x : fine.vertices)
            inside += barycentric(mesh.corners(4), x).minCoeff() > 1e-12;
        const int m = 1 << r;
        EXPECT_EQ(fine.num_triangles(), m * m);
        EXPECT_EQ(fine.num_dofs(), inside);
        EXPECT_EQ(fine.num_dofs(), (m - 1) * (m - 2) / 2);
        EXPECT_NEAR(fine.total_area(), mesh.area(4), 1e-14);
    }
    const auto r2 = refine_element(mesh, 0, 2);
    EXPECT_EQ(r2.num_triangles(), 16);
    EXPECT_EQ(r2.num_vertices(), 15);
    EXPECT_EQ(r2.num_dofs(), 3);
}

TEST(RefineElement, LevelOneHasEdgeMidpointsOnTheBoundary)
{
    const auto mesh = build_structured_coarse(2);
    const auto fine = refine_element(mesh, 5, 1);
    const auto p = mesh.corners(5);
    for (int k = 0; k < 3; ++k) {
        const Point mid = 0.5 * (p[k] + p[(k + 1) % 3]);
        const auto it = std::find_if(fine.vertices.begin(), fine.vertices.end(),
                                     [&](const Point& x) { return (x - mid).norm() < 1e-12; });
        ASSERT_NE(it, fine.vertices.end());
        const int id = static_cast<int>(it - fine.vertices.begin());
        EXPECT_LT(fine.dof_of_vertex[id], 0);
    }
    EXPECT_EQ(fine.num_vertices(), 6);
}

TEST(RefineElement, FineTrianglesAreNestedAndPositive)
{
    const auto mesh = build_structured_coarse(4);
    for (int k : {0, 1, 17, 31}) {
        const auto fine = refine_element(mesh, k, 3);
        expect_conforming(fine, [&] {
            const auto c = mesh.corners(k);
            return (c[0] - c[1]).norm() + (c[1] - c[2]).norm() + (c[2] - c[0]).norm();
        }());
        for (int t = 0; t < fine.num_triangles(); ++t) {
            EXPECT_GT(fine.area(t), 0.0);
            for (const auto& x : fine.corners(t))
                EXPECT_GE(barycentric(mesh.corners(k), x).minCoeff(), -1e-12);
        }
        for (int v = 0; v < fine.num_vertices(); ++v) {
            const Eigen::Vector3d l = fine.parent_barycentric[v];
            const auto c = mesh.corners(k);
            EXPECT_LT((l[0] * c[0] + l[1] * c[1] + l[2] * c[2] - fine.vertices[v]).norm(), 1e-14);
        }
    }
}

TEST(RefineElement, RejectsInvalidIds)
{
    const auto mesh = build_structured_coarse(2);
    EXPECT_THROW(refine_element(mesh, 8, 1), InvalidArgument);
    EXPECT_THROW(refine_element(mesh, -1, 1), InvalidArgument);
    EXPECT_THROW(refine_element(mesh, 0, -1), InvalidArgument);
}

TEST(GlobalFine, CountsAndIdentityCase)
{
    const auto mesh = build_structured_coarse(2);
    EXPECT_EQ(build_global_fine(mesh, 1).num_triangles(), 32);

    const auto same = build_global_fine(mesh, 0);
    ASSERT_EQ(same.num_vertices(), mesh.num_vertices());
    ASSERT_EQ(same.num_triangles(), mesh.num_triangles());
    for (int v = 0; v < mesh.num_vertices(); ++v)
        EXPECT_EQ(same.vertices[v], mesh.vertices[v]);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        EXPECT_EQ(same.triangles[t], mesh.triangles[t]);
}

TEST(GlobalFine, ConformingSurjectiveAndNested)
{
    for (auto [n, r] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{4, 3}}) {
        const auto mesh = build_structured_coarse(n);
        const auto g = build_global_fine(mesh, r);
        const int m = n << r;
        EXPECT_EQ(g.num_triangles(), 2 * n * n * (1 << (2 * r)));
        EXPECT_EQ(g.num_vertices(), (m + 1) * (m + 1));
        EXPECT_EQ(g.num_dofs(), (m - 1) * (m - 1));
        EXPECT_NEAR(g.total_area(), 1.0, 1e-12);
        EXPECT_NEAR(g.cell_size, 1.0 / m, 1e-15);
        expect_conforming(g);

        std::vector<int> hits(g.vertices.size(), 0);
        for (const auto& inj : g.element_injections)
            for (int gv : inj)
                ++hits[gv];
        EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h > 0; }));

        for (int t = 0; t < g.num_triangles(); ++t) {
            const int k = g.coarse_parent[t];
            for (const auto& x : g.corners(t))
                EXPECT_GE(barycentric(mesh.corners(k), x).minCoeff(), -1e-12);
        }
        // coarse vertex v keeps global id v
        for (int v = 0; v < mesh.num_vertices(); ++v)
            EXPECT_EQ(g.vertices[v], mesh.vertices[v]);
    }
}

TEST(GlobalFine, SharedEdgesCarryIdenticalFineVertices)
{
    const auto mesh = build_structured_coarse(3);
    const int r = 3;
    std::map<std::pair<int, int>, std::vector<int>> edge_elements;
    for (int k = 0; k < mesh.num_triangles(); ++k)
        for (int a = 0; a < 3; ++a) {
            const int u = mesh.triangles[k][a], v = mesh.triangles[k][(a + 1) % 3];
            edge_elements[{std::min(u, v), std::max(u, v)}].push_back(k);
        }
    auto on_segment = [](const Point& p, const Point& a, const Point& b) {
        const Point d = b - a;
        const double t = (p - a).dot(d) / d.squaredNorm();
        return t >= -1e-12 && t <= 1 + 1e-12 && (a + t * d - p).norm() < 1e-12;
    };
    for (const auto& [edge, elems] : edge_elements) {
        if (elems.size() != 2)
            continue;
        const Point a = mesh.vertices[edge.first], b = mesh.vertices[edge.second];
        std::vector<std::vector<Point>> sets;
        for (int k : elems) {
            const auto fine = refine_element(mesh, k, r);
            std::vector<Point> pts;
            for (const auto& x : fine.vertices)
                if (on_segment(x, a, b))
                    pts.push_back(x);
            std::sort(pts.begin(), pts.end(), [](const Point& p, const Point& q) {
                return p.x() < q.x() - 1e-13 || (std::abs(p.x() - q.x()) <= 1e-13 && p.y() < q.y());
            });
            sets.push_back(pts);
        }
        ASSERT_EQ(sets[0].size(), static_cast<std::size_t>((1 << r) + 1));
        ASSERT_EQ(sets[0].size(), sets[1].size());
        for (std::size_t i = 0; i < sets[0].size(); ++i)
            EXPECT_LT((sets[0][i] - sets[1][i]).norm(), 1e-12);
    }
}

TEST(LocatePoint, CentroidAndVertex)
{
    const auto mesh = build_structured_coarse(4);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto c = mesh.corners(t);
        const Point centroid = (c[0] + c[1] + c[2]) / 3.0;
        const auto loc = locate_point(mesh, centroid);
        EXPECT_EQ(loc.triangle, t);
        EXPECT_LT((loc.barycentric - Eigen::Vector3d::Constant(1.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto loc = locate_point(mesh, mesh.vertices[12]);
    const auto& tri = mesh.triangles[loc.triangle];
    EXPECT_TRUE(std::find(tri.begin(), tri.end(), 12) != tri.end());
    EXPECT_NEAR(loc.barycentric.maxCoeff(), 1.0, 1e-12);
}

TEST(LocatePoint, TiesGoToLowestTriangleId)
{
    const auto mesh = build_structured_coarse(2);
    // (0.75, 0.5) lies on the edge shared by triangles 3 and 6
    EXPECT_EQ(locate_point(mesh, Point(0.75, 0.5)).triangle, 3);

    // brute-force oracle for points within tolerance of several triangles
    for (const Point& p : {Point(0.5 + 1e-13, 0.5), Point(0.25, 0.25), Point(1.0, 1.0), Point(0.0, 0.5)}) {
        int expected = -1;
        for (int t = 0; t < mesh.num_triangles() && expected < 0; ++t)
            if (barycentric(mesh.corners(t), p).minCoeff() >= -barycentric_tolerance)
                expected = t;
        const auto loc = locate_point(mesh, p);
        EXPECT_EQ(loc.triangle, expected);
        EXPECT_GE(loc.barycentric.minCoeff(), -1e-10);
        EXPECT_LE(loc.barycentric.maxCoeff(), 1 + 1e-10);
        EXPECT_NEAR(loc.barycentric.sum(), 1.0, 1e-12);
    }
}

TEST(LocatePoint, OutsideTheDomainThrows)
{
    const auto mesh = build_structured_coarse(2);
    EXPECT_THROW(locate_point(mesh, Point(1.1, 0.5)), OutOfDomain);
    EXPECT_THROW(locate_point(mesh, Point(-0.01, 0.5)), OutOfDomain);
}

TEST(LocatePoint, WorksOnLargeGlobalMesh)
{
    const auto mesh = build_structured_coarse(4);
    const auto g = build_global_fine(mesh, 4);
    for (int t = 0; t < g.num_triangles(); t += 97) {
        const auto c = g.corners(t);
        EXPECT_EQ(locate_point(g, (c[0] + c[1] + c[2]) / 3.0).triangle, t);
    }
}

} // namespace
