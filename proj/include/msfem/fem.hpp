#pragma once

// P1 finite-element primitives: element matrices, global assembly with
// homogeneous Dirichlet conditions, piecewise-linear fields and their norms.

#include "msfem/coefficient.hpp"
#include "msfem/errors.hpp"
#include "msfem/linear_solver.hpp"
#include "msfem/mesh.hpp"
#include "msfem/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace msfem {

using Gradients = std::array<Eigen::Vector2d, 3>;

/// Constant gradients of the three P1 shape functions and |K|.
struct P1Element {
    double area;
    Gradients grad;

    explicit P1Element(const std::array<Point, 3>& tri)
    {
        const double a = signed_area(tri[0], tri[1], tri[2]);
        const double scale = std::max({(tri[1] - tri[0]).squaredNorm(), (tri[2] - tri[1]).squaredNorm(),
                                       (tri[0] - tri[2]).squaredNorm()});
        if (!(std::abs(a) > 1e-14 * scale))
            throw DegenerateElement("degenerate triangle (zero area)");
        area = std::abs(a);
        for (int k = 0; k < 3; ++k) {
            const Point& p = tri[(k + 1) % 3];
            const Point& q = tri[(k + 2) % 3];
            // grad lambda_k is the inward normal of the opposite edge over twice the area
            grad[k] = Eigen::Vector2d(p.y() - q.y(), q.x() - p.x()) / (2.0 * a);
        }
    }
};

/// Entry (j, i) = sum_q w_q |K| grad phi_j . A(x_q) grad phi_i.
template <TensorField Coefficient>
Eigen::Matrix3d element_stiffness(const std::array<Point, 3>& tri, const Coefficient& coeff,
                                  const QuadratureRule& quad)
{
    const P1Element el(tri);
    Tensor a = Tensor::Zero();
    for (std::size_t q = 0; q < quad.size(); ++q)
        a += quad.weights[q] * Tensor(coeff(quad.map(tri, q)));
    a *= el.area;
    Eigen::Matrix3d k;
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i)
            k(j, i) = el.grad[j].dot(a * el.grad[i]);
    return k;
}

/// Entry j = sum_q w_q |K| f(x_q) phi_j(x_q).
template <ScalarField Source>
Eigen::Vector3d element_load(const std::array<Point, 3>& tri, const Source& f, const QuadratureRule& quad)
{
    const P1Element el(tri);
    Eigen::Vector3d load = Eigen::Vector3d::Zero();
    for (std::size_t q = 0; q < quad.size(); ++q)
        load += (quad.weights[q] * el.area * f(quad.map(tri, q))) * quad.points[q];
    return load;
}

/// Linear system over the interior vertices of a DomainMesh.
struct SparseSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    /// dof -> mesh vertex
    std::vector<int> dof_map;
    bool symmetric = true;

    int size() const noexcept { return static_cast<int>(rhs.size()); }
};

/// max |A - A^T|
inline double asymmetry(const SparseMatrix& a)
{
    const SparseMatrix t = a.transpose();
    const SparseMatrix d = a - t;
    double worst = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

inline double max_abs(const SparseMatrix& a)
{
    double worst = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

namespace detail {

/// Global assembly from per-element 3x3 matrices and 3-vectors. Rows and
/// columns of boundary vertices are dropped; triplets are merged in element
/// order so the result does not depend on how the element data was computed.
template <class ElementMatrix, class ElementLoad>
SparseSystem assemble_elements(const DomainMesh& mesh, ElementMatrix&& element_matrix, ElementLoad&& element_load_vec,
                               bool symmetric)
{
    SparseSystem sys;
    sys.dof_map = mesh.interior_vertex_ids;
    sys.symmetric = symmetric;
    const int n = mesh.num_dofs();
    sys.rhs = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const Eigen::Matrix3d ke = element_matrix(k);
        const Eigen::Vector3d fe = element_load_vec(k);
        const auto& t = mesh.triangles[k];
        for (int j = 0; j < 3; ++j) {
            const int row = mesh.dof_of_vertex[t[j]];
            if (row < 0)
                continue;
            sys.rhs[row] += fe[j];
            for (int i = 0; i < 3; ++i) {
                const int col = mesh.dof_of_vertex[t[i]];
                if (col >= 0)
                    triplets.emplace_back(row, col, ke(j, i));
            }
        }
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    return sys;
}

} // namespace detail

/// Standard P1 system for -div(A grad u) = f with u = 0 on the boundary.
template <TensorField Coefficient, ScalarField Source>
SparseSystem assemble(const DomainMesh& mesh, const Coefficient& coeff, const Source& f,
                      const QuadratureRule& quad = QuadratureRule::standard())
{
    return detail::assemble_elements(
        mesh, [&](int k) { return element_stiffness(mesh.corners(k), coeff, quad); },
        [&](int k) { return element_load(mesh.corners(k), f, quad); }, true);
}

/// P1 system with a piecewise-constant tensor, one per triangle.
template <ScalarField Source>
SparseSystem assemble(const DomainMesh& mesh, std::span<const Tensor> element_tensors, const Source& f,
                      const QuadratureRule& quad = QuadratureRule::standard())
{
    if (static_cast<int>(element_tensors.size()) != mesh.num_triangles())
        throw InvalidArgument("assemble: one tensor per element required");
    // tensors computed from a symmetric coefficient are symmetric up to roundoff
    bool symmetric = true;
    for (const auto& t : element_tensors)
        symmetric = symmetric && std::abs(t(0, 1) - t(1, 0)) <= 1e-12 * t.cwiseAbs().maxCoeff();
    return detail::assemble_elements(
        mesh,
        [&](int k) {
            const Tensor& a = element_tensors[static_cast<std::size_t>(k)];
            return element_stiffness(mesh.corners(k), [&a](const Point&) { return a; }, quad);
        },
        [&](int k) { return element_load(mesh.corners(k), f, quad); }, symmetric);
}

inline SolveResult solve_sparse(const SparseSystem& system, const SolverOptions& options = {})
{
    return solve_sparse(system.matrix, system.rhs, options, system.symmetric);
}

/// Piecewise-linear field: one value per mesh vertex. The mesh must outlive it.
struct FeFunction {
    const TriMesh* mesh = nullptr;
    Eigen::VectorXd values;

    static FeFunction zero(const TriMesh& m) { return {&m, Eigen::VectorXd::Zero(m.num_vertices())}; }

    /// Scatters dof values of a DomainMesh; boundary vertices get exactly 0.
    static FeFunction from_dofs(const DomainMesh& m, const Eigen::VectorXd& dofs)
    {
        if (dofs.size() != m.num_dofs())
            throw InvalidArgument("FeFunction::from_dofs: size mismatch");
        FeFunction u = zero(m);
        for (int d = 0; d < m.num_dofs(); ++d)
            u.values[m.interior_vertex_ids[d]] = dofs[d];
        return u;
    }

    template <ScalarField F>
    static FeFunction interpolate(const TriMesh& m, const F& f)
    {
        FeFunction u = zero(m);
        for (int v = 0; v < m.num_vertices(); ++v)
            u.values[v] = f(m.vertices[v]);
        return u;
    }

    Eigen::VectorXd dofs(const DomainMesh& m) const
    {
        Eigen::VectorXd out(m.num_dofs());
        for (int d = 0; d < m.num_dofs(); ++d)
            out[d] = values[m.interior_vertex_ids[d]];
        return out;
    }
};

/// Constant gradient of u on triangle t.
inline Eigen::Vector2d gradient_in_element(const FeFunction& u, int t)
{
    const P1Element el(u.mesh->corners(t));
    const auto& tri = u.mesh->triangles[t];
    return u.values[tri[0]] * el.grad[0] + u.values[tri[1]] * el.grad[1] + u.values[tri[2]] * el.grad[2];
}

inline Location locate(const TriMesh& mesh, const Point& p)
{
    if (!mesh.locator.empty()) {
        if (auto loc = mesh.locator.locate(mesh.vertices, mesh.triangles, p))
            return *loc;
        throw OutOfDomain("point outside the mesh");
    }
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        auto lambda = barycentric(mesh.corners(t), p);
        if (lambda.minCoeff() >= -barycentric_tolerance)
            return {t, lambda};
    }
    throw OutOfDomain("point outside the mesh");
}

inline double evaluate(const FeFunction& u, const Point& p)
{
    const Location loc = locate(*u.mesh, p);
    const auto& tri = u.mesh->triangles[loc.triangle];
    return loc.barycentric[0] * u.values[tri[0]] + loc.barycentric[1] * u.values[tri[1]]
        + loc.barycentric[2] * u.values[tri[2]];
}

namespace detail {

inline void require_same_mesh(const FeFunction& u, const FeFunction& v)
{
    if (u.mesh == nullptr || u.mesh != v.mesh)
        throw InvalidArgument("norm of a difference: functions live on different meshes");
    if (u.values.size() != v.values.size() || u.values.size() != u.mesh->num_vertices())
        throw InvalidArgument("norm of a difference: value vector does not match mesh");
}

} // namespace detail

/// |u - v|_{H^1}, exact for P1 fields.
inline double h1_seminorm_diff(const FeFunction& u, const FeFunction& v)
{
    detail::require_same_mesh(u, v);
    const FeFunction d{u.mesh, u.values - v.values};
    double sum = 0.0;
    for (int t = 0; t < d.mesh->num_triangles(); ++t)
        sum += d.mesh->area(t) * gradient_in_element(d, t).squaredNorm();
    return std::sqrt(sum);
}

/// ||u - v||_{L^2} via the exact P1 mass matrix.
inline double l2_norm_diff(const FeFunction& u, const FeFunction& v)
{
    detail::require_same_mesh(u, v);
    double sum = 0.0;
    for (int t = 0; t < u.mesh->num_triangles(); ++t) {
        const auto& tri = u.mesh->triangles[t];
        const Eigen::Vector3d e(u.values[tri[0]] - v.values[tri[0]], u.values[tri[1]] - v.values[tri[1]],
                                u.values[tri[2]] - v.values[tri[2]]);
        sum += std::abs(u.mesh->area(t)) / 12.0 * (e.squaredNorm() + e.sum() * e.sum());
    }
    return std::sqrt(sum);
}

inline double h1_norm_diff(const FeFunction& u, const FeFunction& v)
{
    const double semi = h1_seminorm_diff(u, v);
    const double l2 = l2_norm_diff(u, v);
    return std::sqrt(semi * semi + l2 * l2);
}

/// |u_h - u|_{H^1} against an analytic gradient, by quadrature per triangle.
template <class ExactGradient>
double h1_seminorm_error(const FeFunction& u, const ExactGradient& exact_gradient,
                         const QuadratureRule& quad = QuadratureRule::standard())
{
    double sum = 0.0;
    for (int t = 0; t < u.mesh->num_triangles(); ++t) {
        const auto tri = u.mesh->corners(t);
        const Eigen::Vector2d g = gradient_in_element(u, t);
        const double area = std::abs(u.mesh->area(t));
        for (std::size_t q = 0; q < quad.size(); ++q)
            sum += quad.weights[q] * area * (g - Eigen::Vector2d(exact_gradient(quad.map(tri, q)))).squaredNorm();
    }
    return std::sqrt(sum);
}

} // namespace msfem
