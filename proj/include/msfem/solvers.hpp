#pragma once

// Global solve paths: intrusive Galerkin MsFEM, non-intrusive MsFEM (coarse P1
// solve with effective tensors plus corrector post-processing), Petrov-Galerkin
// MsFEM, standard coarse P1, and the fine-grid reference.

#include "msfem/coefficient.hpp"
#include "msfem/errors.hpp"
#include "msfem/fem.hpp"
#include "msfem/linear_solver.hpp"
#include "msfem/mesh.hpp"
#include "msfem/offline.hpp"
#include "msfem/parallel.hpp"
#include "msfem/quadrature.hpp"

#include <chrono>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace msfem {

enum class Variant { galerkin, petrov_galerkin, nonintrusive, reference, p1 };

inline std::string to_string(Variant v)
{
    switch (v) {
    case Variant::galerkin: return "galerkin";
    case Variant::petrov_galerkin: return "pg";
    case Variant::nonintrusive: return "nonintrusive";
    case Variant::reference: return "reference";
    case Variant::p1: return "p1";
    }
    return "unknown";
}

struct Diagnostics {
    double relative_residual = 0.0;
    std::map<std::string, double> timings; // seconds per phase
    std::vector<std::string> warnings;
};

struct MsfemSolution {
    FeFunction coarse; // on the CoarseMesh
    FeFunction fine;   // on the GlobalFineMesh
    Variant variant = Variant::nonintrusive;
    Diagnostics diagnostics;
};

struct SolveOptions {
    int workers = 1;
    SolverOptions solver{};
    QuadratureRule quad = QuadratureRule::standard();
};

namespace detail {

class Stopwatch {
public:
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline void require_matching(const CoarseMesh& mesh, const OfflineData& offline)
{
    if (offline.fine_meshes.size() != mesh.triangles.size())
        throw InvalidArgument("offline data does not match the coarse mesh");
}

inline void require_matching(const CoarseMesh& mesh, const GlobalFineMesh& global, const OfflineData& offline)
{
    require_matching(mesh, offline);
    if (global.element_injections.size() != mesh.triangles.size() || global.level != offline.level)
        throw InvalidArgument("global fine mesh does not match the coarse mesh / offline level");
}

/// Global system from per-element 3x3 blocks computed in parallel.
inline SparseSystem assemble_blocks(const DomainMesh& mesh, std::span<const Eigen::Matrix3d> blocks,
                                    std::span<const Eigen::Vector3d> loads, bool symmetric)
{
    return assemble_elements(
        mesh, [&](int k) { return blocks[static_cast<std::size_t>(k)]; },
        [&](int k) { return loads[static_cast<std::size_t>(k)]; }, symmetric);
}

/// Coarse P1 load F(phi_j) with the coarse-element rule; shared by the
/// non-intrusive and Petrov-Galerkin paths.
template <ScalarField Source>
std::vector<Eigen::Vector3d> coarse_p1_loads(const CoarseMesh& mesh, const Source& f, const QuadratureRule& quad)
{
    std::vector<Eigen::Vector3d> loads(mesh.triangles.size());
    for (int k = 0; k < mesh.num_triangles(); ++k)
        loads[k] = element_load(mesh.corners(k), f, quad);
    return loads;
}

} // namespace detail

/// Intrusive MsFEM system: A_ji = a(phi^eps_i, phi^eps_j), F_j = F(phi^eps_j),
/// both integrated triangle by triangle on the fine meshes.
template <ScalarField Source>
SparseSystem galerkin_system(const CoarseMesh& mesh, const CoefficientField& coeff, const Source& f,
                             const OfflineData& offline, const SolveOptions& options = {})
{
    detail::require_matching(mesh, offline);
    if (!offline.has_basis())
        throw InvalidArgument("galerkin_system: offline data lacks the multiscale basis");
    const auto nk = static_cast<std::size_t>(mesh.num_triangles());
    std::vector<Eigen::Matrix3d> blocks(nk);
    std::vector<Eigen::Vector3d> loads(nk);
    parallel_for(nk, options.workers, [&](std::size_t k) {
        const FineMesh& fine = offline.fine_meshes[k];
        const auto& basis = offline.basis[k];
        const auto coeff_avg = averaged_coefficient(fine, coeff, options.quad);
        Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
        Eigen::Vector3d load = Eigen::Vector3d::Zero();
        for (int t = 0; t < fine.num_triangles(); ++t) {
            const auto tri = fine.corners(t);
            const P1Element el(tri);
            const auto& ft = fine.triangles[t];
            Eigen::Matrix<double, 2, 3> grads; // column i = grad phi^eps_i on t
            Eigen::Matrix3d nodal;             // row i = values of phi^eps_i at the corners of t
            for (int i = 0; i < 3; ++i) {
                grads.col(i).setZero();
                for (int a = 0; a < 3; ++a) {
                    nodal(i, a) = basis[i].values[ft[a]];
                    grads.col(i) += nodal(i, a) * el.grad[a];
                }
            }
            block += el.area * (grads.transpose() * coeff_avg[t] * grads);
            for (std::size_t q = 0; q < options.quad.size(); ++q) {
                const double fq = f(options.quad.map(tri, q));
                load += (options.quad.weights[q] * el.area * fq) * (nodal * options.quad.points[q]);
            }
        }
        blocks[k] = block;
        loads[k] = load;
    });
    return detail::assemble_blocks(mesh, blocks, loads, coeff.is_symmetric());
}

/// Petrov-Galerkin system: A_ji = a(phi^eps_i, phi^P1_j) on the fine meshes;
/// right-hand side F(phi^P1_j) with the coarse rule.
template <ScalarField Source>
SparseSystem pg_system(const CoarseMesh& mesh, const CoefficientField& coeff, const Source& f,
                       const OfflineData& offline, const SolveOptions& options = {})
{
    detail::require_matching(mesh, offline);
    if (!offline.has_basis())
        throw InvalidArgument("pg_system: offline data lacks the multiscale basis");
    const auto nk = static_cast<std::size_t>(mesh.num_triangles());
    std::vector<Eigen::Matrix3d> blocks(nk);
    parallel_for(nk, options.workers, [&](std::size_t k) {
        const FineMesh& fine = offline.fine_meshes[k];
        const auto& basis = offline.basis[k];
        const P1Element parent(mesh.corners(static_cast<int>(k)));
        const auto coeff_avg = averaged_coefficient(fine, coeff, options.quad);
        Eigen::Matrix<double, 2, 3> test; // column j = grad phi^P1_j on K
        for (int j = 0; j < 3; ++j)
            test.col(j) = parent.grad[j];
        Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
        for (int t = 0; t < fine.num_triangles(); ++t) {
            Eigen::Matrix<double, 2, 3> trial;
            for (int i = 0; i < 3; ++i)
                trial.col(i) = gradient_in_element(basis[i], t);
            block += std::abs(fine.area(t)) * (test.transpose() * coeff_avg[t] * trial);
        }
        blocks[k] = block;
    });
    const auto loads = detail::coarse_p1_loads(mesh, f, options.quad);
    return detail::assemble_blocks(mesh, blocks, loads, false);
}

/// Non-intrusive online system: plain P1 assembly with the piecewise-constant
/// effective tensors and F(phi^P1_j).
template <ScalarField Source>
SparseSystem nonintrusive_system(const CoarseMesh& mesh, std::span<const Tensor> tensors, const Source& f,
                                 const QuadratureRule& quad = QuadratureRule::standard())
{
    return assemble(mesh, tensors, f, quad);
}

/// Fine field v_H + sum_K sum_alpha (d_alpha v_H)|_K V_K^alpha. Shared fine
/// vertices take the value computed in the lowest-id element.
inline FeFunction reconstruct(const FeFunction& coarse, const OfflineData& offline, const CoarseMesh& mesh,
                              const GlobalFineMesh& global)
{
    if (coarse.mesh != &mesh)
        throw InvalidArgument("reconstruct: coarse field does not live on this coarse mesh");
    detail::require_matching(mesh, global, offline);
    FeFunction out = FeFunction::zero(global);
    std::vector<char> written(static_cast<std::size_t>(global.num_vertices()), 0);
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& tri = mesh.triangles[k];
        const Eigen::Vector3d nodal(coarse.values[tri[0]], coarse.values[tri[1]], coarse.values[tri[2]]);
        const Eigen::Vector2d g = gradient_in_element(coarse, k);
        const FineMesh& fine = offline.fine_meshes[k];
        const auto& inj = global.element_injections[k];
        const auto& corr = offline.correctors[k];
        for (int v = 0; v < fine.num_vertices(); ++v) {
            const int gv = inj[v];
            if (written[gv])
                continue;
            written[gv] = 1;
            out.values[gv] = fine.parent_barycentric[v].dot(nodal) + g[0] * corr[0].values[v] + g[1] * corr[1].values[v];
        }
    }
    return out;
}

/// Coarse P1 field injected into the nested global fine mesh.
inline FeFunction prolongate(const FeFunction& coarse, const CoarseMesh& mesh, const GlobalFineMesh& global)
{
    if (coarse.mesh != &mesh || global.element_injections.size() != mesh.triangles.size())
        throw InvalidArgument("prolongate: mesh mismatch");
    FeFunction out = FeFunction::zero(global);
    const int n = 1 << global.level;
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& tri = mesh.triangles[k];
        const Eigen::Vector3d nodal(coarse.values[tri[0]], coarse.values[tri[1]], coarse.values[tri[2]]);
        const auto& inj = global.element_injections[k];
        int v = 0;
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i + j <= n; ++i, ++v) {
                const Eigen::Vector3d lambda(static_cast<double>(n - i - j) / n, static_cast<double>(i) / n,
                                             static_cast<double>(j) / n);
                out.values[inj[v]] = lambda.dot(nodal);
            }
    }
    return out;
}

inline MsfemSolution solve_nonintrusive(const CoarseMesh& mesh, const GlobalFineMesh& global,
                                        const OfflineData& offline, const SourceField& f,
                                        const SolveOptions& options = {})
{
    detail::require_matching(mesh, global, offline);
    detail::Stopwatch clock;
    MsfemSolution sol;
    sol.variant = Variant::nonintrusive;
    const SparseSystem sys = nonintrusive_system(mesh, offline.tensors, f, options.quad);
    sol.diagnostics.timings["assemble"] = clock.lap();
    const SolveResult res = solve_sparse(sys, options.solver);
    sol.diagnostics.relative_residual = res.relative_residual;
    sol.diagnostics.timings["solve"] = clock.lap();
    sol.coarse = FeFunction::from_dofs(mesh, res.solution);
    sol.fine = reconstruct(sol.coarse, offline, mesh, global);
    sol.diagnostics.timings["reconstruct"] = clock.lap();
    return sol;
}

inline MsfemSolution solve_msfem_pg(const CoarseMesh& mesh, const GlobalFineMesh& global,
                                    const CoefficientField& coeff, const SourceField& f, const OfflineData& offline,
                                    const SolveOptions& options = {})
{
    detail::require_matching(mesh, global, offline);
    detail::Stopwatch clock;
    MsfemSolution sol;
    sol.variant = Variant::petrov_galerkin;
    const SparseSystem sys = pg_system(mesh, coeff, f, offline, options);
    sol.diagnostics.timings["assemble"] = clock.lap();
    SolverOptions solver = options.solver;
    if (solver.method == SolverOptions::Method::cg)
        solver.method = SolverOptions::Method::direct; // not symmetric in floating point
    const SolveResult res = solve_sparse(sys, solver);
    sol.diagnostics.relative_residual = res.relative_residual;
    sol.diagnostics.timings["solve"] = clock.lap();
    sol.coarse = FeFunction::from_dofs(mesh, res.solution);
    sol.fine = reconstruct(sol.coarse, offline, mesh, global);
    sol.diagnostics.timings["reconstruct"] = clock.lap();
    return sol;
}

inline MsfemSolution solve_msfem_galerkin(const CoarseMesh& mesh, const GlobalFineMesh& global,
                                          const CoefficientField& coeff, const SourceField& f,
                                          const OfflineData& offline, const SolveOptions& options = {})
{
    detail::require_matching(mesh, global, offline);
    detail::Stopwatch clock;
    MsfemSolution sol;
    sol.variant = Variant::galerkin;
    const SparseSystem sys = galerkin_system(mesh, coeff, f, offline, options);
    sol.diagnostics.timings["assemble"] = clock.lap();
    const SolveResult res = solve_sparse(sys, options.solver);
    sol.diagnostics.relative_residual = res.relative_residual;
    sol.diagnostics.timings["solve"] = clock.lap();
    sol.coarse = FeFunction::from_dofs(mesh, res.solution);

    // u = sum_i U_i phi^eps_i, element by element, lowest element id wins
    sol.fine = FeFunction::zero(global);
    std::vector<char> written(static_cast<std::size_t>(global.num_vertices()), 0);
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& tri = mesh.triangles[k];
        const auto& basis = offline.basis[k];
        const auto& inj = global.element_injections[k];
        for (int v = 0; v < static_cast<int>(inj.size()); ++v) {
            if (written[inj[v]])
                continue;
            written[inj[v]] = 1;
            double value = 0.0;
            for (int i = 0; i < 3; ++i)
                value += sol.coarse.values[tri[i]] * basis[i].values[v];
            sol.fine.values[inj[v]] = value;
        }
    }
    sol.diagnostics.timings["reconstruct"] = clock.lap();
    return sol;
}

/// Standard P1 on the coarse mesh with the oscillatory coefficient sampled at
/// the coarse quadrature points.
inline MsfemSolution solve_p1(const CoarseMesh& mesh, const GlobalFineMesh& global, const CoefficientField& coeff,
                              const SourceField& f, const SolveOptions& options = {})
{
    MsfemSolution sol;
    sol.variant = Variant::p1;
    const SparseSystem sys = assemble(mesh, coeff, f, options.quad);
    const SolveResult res = solve_sparse(sys, options.solver);
    sol.diagnostics.relative_residual = res.relative_residual;
    sol.coarse = FeFunction::from_dofs(mesh, res.solution);
    sol.fine = prolongate(sol.coarse, mesh, global);
    return sol;
}

/// Message when the fine grid does not resolve the oscillation (h > eps/4), else empty.
inline std::string resolution_warning(double cell_size, double epsilon)
{
    if (epsilon > 0.0 && cell_size > epsilon / 4.0) {
        std::ostringstream os;
        os << "fine mesh size h = " << cell_size << " exceeds eps/4 = " << epsilon / 4.0
           << "; oscillations are under-resolved";
        return os.str();
    }
    return {};
}

/// Standard P1 solve on the global fine mesh.
inline MsfemSolution solve_reference(const GlobalFineMesh& global, const CoefficientField& coeff, const SourceField& f,
                                     const SolveOptions& options = {})
{
    detail::Stopwatch clock;
    MsfemSolution sol;
    sol.variant = Variant::reference;
    if (auto w = resolution_warning(global.cell_size, coeff.epsilon()); !w.empty())
        sol.diagnostics.warnings.push_back(w);
    const SparseSystem sys = assemble(global, coeff, f, options.quad);
    sol.diagnostics.timings["assemble"] = clock.lap();
    const SolveResult res = solve_sparse(sys, options.solver);
    sol.diagnostics.relative_residual = res.relative_residual;
    sol.diagnostics.timings["solve"] = clock.lap();
    sol.fine = FeFunction::from_dofs(global, res.solution);
    sol.coarse = sol.fine;
    return sol;
}

/// Nodal interpolation of u onto another mesh; exact for nested meshes.
inline FeFunction transfer(const FeFunction& u, const TriMesh& target)
{
    FeFunction out = FeFunction::zero(target);
    for (int v = 0; v < target.num_vertices(); ++v)
        out.values[v] = evaluate(u, target.vertices[v]);
    return out;
}

} // namespace msfem
