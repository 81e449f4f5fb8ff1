#include "msfem/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace msfem;

double relative_max(const SparseMatrix& a, const SparseMatrix& b)
{
    return max_abs(SparseMatrix(a - b)) / max_abs(b);
}

struct Problem {
    CoarseMesh mesh;
    GlobalFineMesh global;
    CoefficientField coeff;
    OfflineData offline;

    Problem(int n, int level, CoefficientField c, int workers = 1)
        : mesh(build_structured_coarse(n)), global(build_global_fine(mesh, level)), coeff(std::move(c))
    {
        OfflineOptions opts;
        opts.with_basis = true;
        opts.workers = workers;
        offline = run_offline(mesh, coeff, level, opts);
    }
};

TEST(Systems, GalerkinStiffnessEqualsEffectiveTensorAssembly)
{
    const Problem s(4, 3, CoefficientField::paper_periodic(std::numbers::pi / 50));
    const auto f = SourceField::paper();
    const auto g = galerkin_system(s.mesh, s.coeff, f, s.offline);
    const auto p1 = nonintrusive_system(s.mesh, s.offline.tensors, f);
    EXPECT_LT(relative_max(g.matrix, p1.matrix), 1e-10);
}

TEST(Systems, PetrovGalerkinMatchesNonIntrusive)
{
    const Problem s(4, 3, CoefficientField::paper_periodic(std::numbers::pi / 50));
    const auto f = SourceField::paper();
    const auto pg = pg_system(s.mesh, s.coeff, f, s.offline);
    const auto p1 = nonintrusive_system(s.mesh, s.offline.tensors, f);
    EXPECT_FALSE(pg.symmetric);
    EXPECT_LT(relative_max(pg.matrix, p1.matrix), 1e-10);
    EXPECT_LT((pg.rhs - p1.rhs).cwiseAbs().maxCoeff(), 1e-15);

    const auto u_pg = solve_msfem_pg(s.mesh, s.global, s.coeff, f, s.offline);
    const auto u_ni = solve_nonintrusive(s.mesh, s.global, s.offline, f);
    EXPECT_LT((u_pg.coarse.values - u_ni.coarse.values).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((u_pg.fine.values - u_ni.fine.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Solve, GalerkinFineFieldIsCorrectorReconstruction)
{
    const Problem s(4, 3, CoefficientField::paper_periodic(0.08));
    const auto u = solve_msfem_galerkin(s.mesh, s.global, s.coeff, SourceField::paper(), s.offline);
    const auto rec = reconstruct(u.coarse, s.offline, s.mesh, s.global);
    EXPECT_LT((u.fine.values - rec.values).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(u.diagnostics.relative_residual, 1e-10);
}

TEST(Solve, ConstantCoefficientAllVariantsAgreeWithP1)
{
    const Problem s(4, 2, CoefficientField::constant(2.0));
    const auto f = SourceField::paper();
    const auto p1 = solve_p1(s.mesh, s.global, s.coeff, f);
    for (const auto& u : {solve_nonintrusive(s.mesh, s.global, s.offline, f),
                          solve_msfem_pg(s.mesh, s.global, s.coeff, f, s.offline)}) {
        EXPECT_LT((u.coarse.values - p1.coarse.values).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((u.fine.values - p1.fine.values).cwiseAbs().maxCoeff(), 1e-12);
    }
    // the Galerkin load integrates f against fine hats, so only the matrix is shared
    const auto g = galerkin_system(s.mesh, s.coeff, f, s.offline);
    const auto a = assemble(s.mesh, s.coeff, f);
    EXPECT_LT(relative_max(g.matrix, a.matrix), 1e-12);
}

TEST(Solve, ZeroSourceGivesZeroEverywhere)
{
    const Problem s(4, 2, CoefficientField::paper_periodic(0.1));
    const auto f = SourceField::constant(0.0);
    EXPECT_EQ(solve_nonintrusive(s.mesh, s.global, s.offline, f).fine.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(solve_msfem_galerkin(s.mesh, s.global, s.coeff, f, s.offline).fine.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(solve_reference(s.global, s.coeff, f).fine.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Solve, CgAndCholeskyGiveTheSameReference)
{
    const auto mesh = build_structured_coarse(8);
    const auto global = build_global_fine(mesh, 3);
    const auto coeff = CoefficientField::paper_periodic(std::numbers::pi / 50);
    SolveOptions direct;
    direct.solver = SolverOptions::direct();
    SolveOptions cg;
    cg.solver = SolverOptions::cg(1e-12, 20000);
    const auto a = solve_reference(global, coeff, SourceField::paper(), direct);
    const auto b = solve_reference(global, coeff, SourceField::paper(), cg);
    EXPECT_LT(h1_norm_diff(a.fine, b.fine), 1e-8 * h1_norm_diff(a.fine, FeFunction::zero(global)));
}

TEST(Solve, DeterministicAcrossWorkerCounts)
{
    const Problem one(4, 3, CoefficientField::paper_periodic(0.07), 1);
    const Problem two(4, 3, CoefficientField::paper_periodic(0.07), 2);
    SolveOptions o1, o2;
    o2.workers = 2;
    const auto f = SourceField::paper();
    const auto a = solve_msfem_galerkin(one.mesh, one.global, one.coeff, f, one.offline, o1);
    const auto b = solve_msfem_galerkin(two.mesh, two.global, two.coeff, f, two.offline, o2);
    EXPECT_EQ(a.fine.values, b.fine.values);
    const auto c = solve_msfem_pg(one.mesh, one.global, one.coeff, f, one.offline, o1);
    const auto d = solve_msfem_pg(two.mesh, two.global, two.coeff, f, two.offline, o2);
    EXPECT_EQ(c.fine.values, d.fine.values);
}

TEST(Solve, MismatchedInputsRejected)
{
    const Problem s(4, 2, CoefficientField::constant(1.0));
    const auto other = build_structured_coarse(2);
    const auto other_global = build_global_fine(other, 2);
    const auto f = SourceField::paper();
    EXPECT_THROW(solve_nonintrusive(other, other_global, s.offline, f), InvalidArgument);
    const auto wrong_level = build_global_fine(s.mesh, 3);
    EXPECT_THROW(solve_nonintrusive(s.mesh, wrong_level, s.offline, f), InvalidArgument);
    const auto no_basis = run_offline(s.mesh, s.coeff, 2);
    EXPECT_THROW(galerkin_system(s.mesh, s.coeff, f, no_basis), InvalidArgument);
    EXPECT_THROW(pg_system(s.mesh, s.coeff, f, no_basis), InvalidArgument);
}

TEST(Solve, ResolutionWarning)
{
    EXPECT_TRUE(resolution_warning(1.0 / 256, std::numbers::pi / 50).empty());
    EXPECT_FALSE(resolution_warning(1.0 / 16, std::numbers::pi / 50).empty());
    EXPECT_TRUE(resolution_warning(1.0 / 16, 0.0).empty());

    const auto mesh = build_structured_coarse(4);
    const auto global = build_global_fine(mesh, 0);
    const auto u = solve_reference(global, CoefficientField::paper_periodic(0.1), SourceField::paper());
    EXPECT_EQ(u.diagnostics.warnings.size(), 1u);
}

TEST(Transfer, ExactForNestedMeshes)
{
    const auto mesh = build_structured_coarse(4);
    const auto global = build_global_fine(mesh, 2);
    const auto u = FeFunction::interpolate(mesh, SourceField::paper());
    const auto t = transfer(u, global);
    const auto p = prolongate(u, mesh, global);
    EXPECT_LT((t.values - p.values).cwiseAbs().maxCoeff(), 1e-14);
    // the interpolant of a linear function is reproduced everywhere
    const auto lin = FeFunction::interpolate(mesh, [](const Point& x) { return 3.0 * x.x() - x.y(); });
    const auto plin = prolongate(lin, mesh, global);
    for (int v = 0; v < global.num_vertices(); ++v)
        EXPECT_NEAR(plin.values[v], 3.0 * global.vertices[v].x() - global.vertices[v].y(), 1e-14);
}

TEST(Solve, MultiscaleBeatsCoarseP1OnOscillatoryProblem)
{
    const double eps = std::numbers::pi / 50;
    const Problem s(8, 5, CoefficientField::paper_periodic(eps));
    const auto f = SourceField::paper();
    const auto ref = solve_reference(s.global, s.coeff, f);
    const auto g = solve_msfem_galerkin(s.mesh, s.global, s.coeff, f, s.offline);
    const auto p1 = solve_p1(s.mesh, s.global, s.coeff, f);
    EXPECT_LT(h1_norm_diff(g.fine, ref.fine), h1_norm_diff(p1.fine, ref.fine));
}

} // namespace
