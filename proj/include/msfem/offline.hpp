#pragma once

// Offline phase: per-element fine-scale problems. Correctors V_K^alpha,
// effective tensors, and (optionally) the multiscale basis functions.

#include "msfem/coefficient.hpp"
#include "msfem/errors.hpp"
#include "msfem/fem.hpp"
#include "msfem/linear_solver.hpp"
#include "msfem/mesh.hpp"
#include "msfem/parallel.hpp"
#include "msfem/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace msfem {

/// V_K^1, V_K^2 on the fine mesh of K; zero on the boundary of K.
using CorrectorPair = std::array<FeFunction, 2>;
/// One discrete A-harmonic function per parent vertex, with hat-function trace.
using MultiscaleBasisLocal = std::array<FeFunction, 3>;

struct OfflineOptions {
    int workers = 1;
    bool with_basis = false;
    SolverOptions solver = SolverOptions::direct();
    QuadratureRule quad = QuadratureRule::standard();
};

/// Quadrature average of the coefficient on every fine triangle. With P1
/// gradients constant per triangle, every fine-scale integral of the form
/// int_T g . A h reduces to |T| g . A_T h.
inline std::vector<Tensor> averaged_coefficient(const TriMesh& fine, const CoefficientField& coeff,
                                                const QuadratureRule& quad)
{
    std::vector<Tensor> out(fine.triangles.size());
    for (int t = 0; t < fine.num_triangles(); ++t) {
        const auto tri = fine.corners(t);
        Tensor a = Tensor::Zero();
        for (std::size_t q = 0; q < quad.size(); ++q)
            a += quad.weights[q] * coeff(quad.map(tri, q));
        out[t] = a;
    }
    return out;
}

/// Discrete operator of one coarse element: P1 stiffness on its fine mesh,
/// factorized once on the interior unknowns and shared by all local solves.
class LocalProblem {
public:
    LocalProblem(const FineMesh& fine, const CoefficientField& coeff, const QuadratureRule& quad,
                 const SolverOptions& solver)
        : fine_(&fine), solver_(solver), coeff_avg_(averaged_coefficient(fine, coeff, quad))
    {
        elements_.reserve(fine.triangles.size());
        for (int t = 0; t < fine.num_triangles(); ++t)
            elements_.emplace_back(fine.corners(t));

        std::vector<Eigen::Triplet<double>> interior, rows;
        for (int t = 0; t < fine.num_triangles(); ++t) {
            const auto& tri = fine.triangles[t];
            const auto& el = elements_[t];
            for (int j = 0; j < 3; ++j) {
                const int row = fine.dof_of_vertex[tri[j]];
                if (row < 0)
                    continue;
                for (int i = 0; i < 3; ++i) {
                    const double kji = el.area * el.grad[j].dot(coeff_avg_[t] * el.grad[i]);
                    rows.emplace_back(row, tri[i], kji);
                    const int col = fine.dof_of_vertex[tri[i]];
                    if (col >= 0)
                        interior.emplace_back(row, col, kji);
                }
            }
        }
        const int ni = fine.num_dofs();
        interior_.resize(ni, ni);
        interior_.setFromTriplets(interior.begin(), interior.end());
        interior_rows_.resize(ni, fine.num_vertices());
        interior_rows_.setFromTriplets(rows.begin(), rows.end());

        if (solver_.method != SolverOptions::Method::cg)
            factor_.emplace(interior_);
    }

    const FineMesh& mesh() const noexcept { return *fine_; }
    const std::vector<Tensor>& coefficient() const noexcept { return coeff_avg_; }
    const std::vector<P1Element>& elements() const noexcept { return elements_; }
    const SparseMatrix& interior_matrix() const noexcept { return interior_; }

    /// Weak-form load -int grad w . A e_alpha for every interior fine hat w.
    Eigen::VectorXd corrector_load(int alpha) const
    {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(fine_->num_dofs());
        const Eigen::Vector2d e = Eigen::Vector2d::Unit(alpha);
        for (int t = 0; t < fine_->num_triangles(); ++t) {
            const auto& tri = fine_->triangles[t];
            const Eigen::Vector2d flux = coeff_avg_[t] * e;
            for (int j = 0; j < 3; ++j) {
                const int row = fine_->dof_of_vertex[tri[j]];
                if (row >= 0)
                    rhs[row] -= elements_[t].area * elements_[t].grad[j].dot(flux);
            }
        }
        return rhs;
    }

    CorrectorPair correctors() const
    {
        CorrectorPair out;
        for (int alpha = 0; alpha < 2; ++alpha)
            out[alpha] = scatter_interior(solve_interior(corrector_load(alpha)), Eigen::VectorXd::Zero(fine_->num_vertices()));
        return out;
    }

    /// Dirichlet lift of the affine hat trace plus an interior correction.
    MultiscaleBasisLocal basis() const
    {
        MultiscaleBasisLocal out;
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd lift(fine_->num_vertices());
            for (int v = 0; v < fine_->num_vertices(); ++v)
                lift[v] = fine_->parent_barycentric[v][i];
            const Eigen::VectorXd rhs = -(interior_rows_ * lift);
            out[i] = scatter_interior(solve_interior(rhs), lift);
        }
        return out;
    }

    Eigen::VectorXd solve_interior(const Eigen::VectorXd& rhs) const
    {
        if (factor_)
            return factor_->solve(rhs);
        return conjugate_gradient(interior_, rhs, solver_.tolerance, solver_.max_iterations).solution;
    }

private:
    /// base + interior increments, as a function on the fine mesh.
    FeFunction scatter_interior(const Eigen::VectorXd& interior, Eigen::VectorXd base) const
    {
        for (int d = 0; d < fine_->num_dofs(); ++d)
            base[fine_->interior_vertex_ids[d]] += interior[d];
        return {fine_, std::move(base)};
    }

    const FineMesh* fine_;
    SolverOptions solver_;
    std::vector<Tensor> coeff_avg_;
    std::vector<P1Element> elements_;
    SparseMatrix interior_;
    SparseMatrix interior_rows_;
    std::optional<CholeskyFactor> factor_;
};

inline CorrectorPair solve_correctors(const FineMesh& fine, const CoefficientField& coeff,
                                      const QuadratureRule& quad = QuadratureRule::standard(),
                                      const SolverOptions& solver = SolverOptions::direct())
{
    try {
        return LocalProblem(fine, coeff, quad, solver).correctors();
    } catch (const ElementFailure&) {
        throw;
    } catch (const Error& e) {
        throw ElementFailure(fine.parent, e.what());
    }
}

/// |K|^-1 int_K (e_beta + grad V^beta) . A (e_alpha + grad V^alpha), entry (beta, alpha).
inline Tensor effective_tensor(const FineMesh& fine, const CoefficientField& coeff, const CorrectorPair& correctors,
                               const QuadratureRule& quad = QuadratureRule::standard())
{
    const auto coeff_avg = averaged_coefficient(fine, coeff, quad);
    const auto& pc = fine.parent_corners;
    const double parent_area = std::abs(signed_area(pc[0], pc[1], pc[2]));
    Tensor sum = Tensor::Zero();
    for (int t = 0; t < fine.num_triangles(); ++t) {
        Eigen::Matrix2d columns; // column alpha = e_alpha + grad V^alpha
        for (int alpha = 0; alpha < 2; ++alpha)
            columns.col(alpha) = Eigen::Vector2d::Unit(alpha) + gradient_in_element(correctors[alpha], t);
        sum += std::abs(fine.area(t)) * (columns.transpose() * coeff_avg[t] * columns);
    }
    return sum / parent_area;
}

inline MultiscaleBasisLocal multiscale_basis_local(const FineMesh& fine, const CoefficientField& coeff,
                                                   const QuadratureRule& quad = QuadratureRule::standard(),
                                                   const SolverOptions& solver = SolverOptions::direct())
{
    try {
        return LocalProblem(fine, coeff, quad, solver).basis();
    } catch (const Error& e) {
        throw ElementFailure(fine.parent, e.what());
    }
}

/// max over fine vertices and parent vertices i of
/// |phi_i - (hat_i + sum_alpha (d_alpha hat_i) V^alpha)|.
inline double verify_expansion(const FineMesh& fine, const MultiscaleBasisLocal& basis, const CorrectorPair& correctors)
{
    const P1Element parent(fine.parent_corners);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector2d g = parent.grad[i];
        for (int v = 0; v < fine.num_vertices(); ++v) {
            const double expansion
                = fine.parent_barycentric[v][i] + g[0] * correctors[0].values[v] + g[1] * correctors[1].values[v];
            worst = std::max(worst, std::abs(basis[i].values[v] - expansion));
        }
    }
    return worst;
}

/// Margins of the bounds m|xi|^2 <= xi.A xi and |eta.A xi| <= M(1 + M/m)|xi||eta|.
/// Both are non-negative when the bounds hold.
struct BoundMargins {
    double lower = 0.0; // lambda_min(sym A) - m
    double upper = 0.0; // M(1 + M/m) - sigma_max(A)
};

inline BoundMargins tensor_bound_margins(const Tensor& a, const Bounds& bounds)
{
    const Tensor sym = 0.5 * (a + a.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Tensor>(sym).eigenvalues().minCoeff();
    const double smax = Eigen::JacobiSVD<Tensor>(a).singularValues().maxCoeff();
    return {lmin - bounds.m, bounds.M * (1.0 + bounds.M / bounds.m) - smax};
}

/// Checks both bounds on `probes` random unit pairs (xi, eta). Returns the
/// smallest slack observed over all probes (negative on violation).
inline double probe_tensor_bounds(const Tensor& a, const Bounds& bounds, std::mt19937_64& rng, int probes = 100)
{
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double upper = bounds.M * (1.0 + bounds.M / bounds.m);
    double slack = std::numeric_limits<double>::infinity();
    for (int p = 0; p < probes; ++p) {
        const double s = angle(rng), r = angle(rng);
        const Eigen::Vector2d xi(std::cos(s), std::sin(s));
        const Eigen::Vector2d eta(std::cos(r), std::sin(r));
        slack = std::min(slack, xi.dot(a * xi) - bounds.m);
        slack = std::min(slack, upper - std::abs(eta.dot(a * xi)));
    }
    return slack;
}

/// Result of the offline phase, keyed by coarse element id. Local fields
/// point into `fine_meshes`, so the object is move-only.
struct OfflineData {
    int level = 0;
    std::vector<FineMesh> fine_meshes;
    std::vector<CorrectorPair> correctors;
    std::vector<Tensor> tensors;
    std::vector<MultiscaleBasisLocal> basis; // empty unless requested

    OfflineData() = default;
    OfflineData(OfflineData&&) noexcept = default;
    OfflineData& operator=(OfflineData&&) noexcept = default;
    OfflineData(const OfflineData&) = delete;
    OfflineData& operator=(const OfflineData&) = delete;

    bool has_basis() const noexcept { return !basis.empty(); }
};

/// Solves the corrector problems of every coarse element (and the local basis
/// when requested). Elements are independent and may run on several workers;
/// the output does not depend on the worker count.
inline OfflineData run_offline(const CoarseMesh& mesh, const CoefficientField& coeff, int level,
                               const OfflineOptions& options = {})
{
    const auto nk = static_cast<std::size_t>(mesh.num_triangles());
    OfflineData data;
    data.level = level;
    data.fine_meshes.resize(nk);
    data.correctors.resize(nk);
    data.tensors.resize(nk);
    if (options.with_basis)
        data.basis.resize(nk);

    parallel_for(nk, options.workers, [&](std::size_t k) {
        const int element = static_cast<int>(k);
        try {
            data.fine_meshes[k] = refine_element(mesh, element, level);
            const FineMesh& fine = data.fine_meshes[k];
            const LocalProblem local(fine, coeff, options.quad, options.solver);
            data.correctors[k] = local.correctors();
            data.tensors[k] = effective_tensor(fine, coeff, data.correctors[k], options.quad);
            if (options.with_basis)
                data.basis[k] = local.basis();
        } catch (const ElementFailure&) {
            throw;
        } catch (const Error& e) {
            throw ElementFailure(element, e.what());
        }
    });
    return data;
}

} // namespace msfem
