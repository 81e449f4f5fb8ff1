#include "msfem/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace msfem;

TEST(FitSlope, RecoversPowerLaws)
{
    EXPECT_NEAR(fit_slope({0.5, 0.25, 0.125}, {3 * 0.25, 3 * 0.0625, 3 * 0.015625}), 2.0, 1e-12);
    EXPECT_NEAR(fit_slope({1, 2, 4, 8}, {5, 5, 5, 5}), 0.0, 1e-12);
    EXPECT_TRUE(std::isnan(fit_slope({1, 2}, {0.0, 1.0})));
    EXPECT_TRUE(std::isnan(fit_slope({1}, {1})));
}

struct Fixture {
    CoarseMesh mesh;
    GlobalFineMesh global;
    CoefficientField coeff;
    OfflineData offline;

    Fixture(int n, int level, CoefficientField c)
        : mesh(build_structured_coarse(n)), global(build_global_fine(mesh, level)), coeff(std::move(c))
    {
        offline = run_offline(mesh, coeff, level);
    }

    FeFunction random_coarse(std::mt19937_64& rng) const
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd d(mesh.num_dofs());
        for (auto& x : d)
            x = u(rng);
        return FeFunction::from_dofs(mesh, d);
    }
};

double gradient_norm(const FeFunction& u)
{
    return h1_seminorm_diff(u, FeFunction::zero(*u.mesh));
}

TEST(CoarseComponent, RoundTripAndEnergyBound)
{
    const Fixture s(4, 3, CoefficientField::paper_periodic(std::numbers::pi / 50));
    std::mt19937_64 rng(2024);
    const double ratio = s.coeff.bounds().M / s.coeff.bounds().m;
    SolveOptions direct;
    direct.solver = SolverOptions::direct();
    for (int trial = 0; trial < 20; ++trial) {
        const FeFunction v = s.random_coarse(rng);
        const FeFunction fine = reconstruct(v, s.offline, s.mesh, s.global);
        const FeFunction back = coarse_component(fine, s.mesh, s.global, s.coeff, s.offline.tensors, direct);
        EXPECT_LT((back.values - v.values).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE(gradient_norm(back), ratio * gradient_norm(fine));
    }
}

TEST(CoarseComponent, ZeroMapsToZero)
{
    const Fixture s(4, 2, CoefficientField::paper_periodic(0.1));
    const auto back = coarse_component(FeFunction::zero(s.global), s.mesh, s.global, s.coeff, s.offline.tensors);
    EXPECT_EQ(back.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(coarse_component(FeFunction::zero(s.mesh), s.mesh, s.global, s.coeff, s.offline.tensors),
                 InvalidArgument);
}

TEST(IdentityReport, ConstantCoefficientIsExact)
{
    const auto rep = identity_report(build_structured_coarse(4), CoefficientField::constant(1.0), 2);
    EXPECT_LE(rep.stiffness_galerkin_vs_p1, 1e-12);
    EXPECT_LE(rep.stiffness_pg_vs_galerkin, 1e-12);
    EXPECT_LE(rep.solution_pg_vs_nonintrusive, 1e-12);
    EXPECT_LE(rep.expansion, 1e-12);
    EXPECT_TRUE(rep.passes());
}

TEST(IdentityReport, OscillatoryCoefficientIdentitiesHold)
{
    const auto rep = identity_report(build_structured_coarse(8), CoefficientField::paper_periodic(std::numbers::pi / 50), 4);
    EXPECT_LE(rep.stiffness_galerkin_vs_p1, 1e-10);
    EXPECT_LE(rep.stiffness_pg_vs_galerkin, 1e-10);
    EXPECT_LE(rep.solution_pg_vs_nonintrusive, 1e-9);
    EXPECT_LE(rep.expansion, 1e-10);
    EXPECT_GE(rep.bound_lower_margin, -1e-8);
    EXPECT_GE(rep.bound_upper_margin, 0.0);
    EXPECT_GT(rep.rhs_difference, 0.0);
    EXPECT_TRUE(rep.passes());
    const std::string text = rep.to_text();
    EXPECT_NE(text.find("stiffness_galerkin_vs_p1 = "), std::string::npos);
    EXPECT_NE(text.find("pass = true"), std::string::npos);
}

TEST(IdentityReport, LayeredBoundsUseLayerValues)
{
    const auto rep = identity_report(build_structured_coarse(4), CoefficientField::layered(0.05, 1.0, 4.0), 4);
    EXPECT_GE(rep.bound_lower_margin, -1e-8);
    EXPECT_GE(rep.bound_upper_margin, 0.0);
    EXPECT_GE(rep.probe_slack, -1e-8);
    EXPECT_LE(rep.expansion, 1e-10);
}

TEST(IdentityReport, DeterministicAcrossWorkers)
{
    IdentityOptions one, two;
    two.workers = 2;
    const auto mesh = build_structured_coarse(4);
    const auto coeff = CoefficientField::paper_periodic(0.07);
    EXPECT_EQ(identity_report(mesh, coeff, 3, SourceField::paper(), one).to_text(),
              identity_report(mesh, coeff, 3, SourceField::paper(), two).to_text());
}

TEST(RefinementRule, NestingEnforced)
{
    const RefinementRule automatic;
    EXPECT_EQ(automatic.level_for(4, 256), 6);
    EXPECT_EQ(automatic.level_for(32, 256), 3);
    EXPECT_EQ(automatic.level_for(16, 16), 0);
    EXPECT_THROW(automatic.level_for(3, 256), InvalidArgument);
    EXPECT_EQ(automatic.level_for(12, 48), 2);
    EXPECT_THROW(automatic.level_for(12, 36), InvalidArgument);
    const RefinementRule fixed{2};
    EXPECT_EQ(fixed.level_for(8, 64), 2);
    EXPECT_THROW(fixed.level_for(8, 16), InvalidArgument);
}

TEST(GapSweep, ZeroSourceGivesZeroErrors)
{
    const auto rep = gap_sweep(CoefficientField::paper_periodic(0.2), SourceField::constant(0.0), {4, 2, 8}, 32);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.rows[0].n, 2);
    EXPECT_EQ(rep.rows[2].n, 8);
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.err_G_vs_ref, 0.0);
        EXPECT_EQ(r.err_G_vs_PG, 0.0);
        EXPECT_EQ(r.err_PG_vs_ref, 0.0);
        EXPECT_EQ(r.err_P1_vs_ref, 0.0);
    }
}

TEST(GapSweep, RowsAreOrderedAndConsistent)
{
    const double eps = 0.1;
    const auto rep = gap_sweep(CoefficientField::paper_periodic(eps), SourceField::paper(), {8, 4, 2}, 64);
    ASSERT_EQ(rep.rows.size(), 3u);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        if (i > 0) {
            EXPECT_LT(r.H, rep.rows[i - 1].H);
        }
        EXPECT_EQ(r.n * (1 << r.level), 64);
        EXPECT_NEAR(r.H_over_eps, r.H / eps, 1e-14);
        EXPECT_GT(r.err_G_vs_ref, 0.0);
        EXPECT_GT(r.err_G_vs_PG, 0.0);
        // triangle inequality between the three fields
        EXPECT_LE(r.err_PG_vs_ref, r.err_G_vs_ref + r.err_G_vs_PG + 1e-14);
        EXPECT_LE(r.nonintrusive_vs_pg, 1e-9);
    }
    EXPECT_TRUE(std::isfinite(rep.slopes.G_vs_ref));
}

TEST(GapSweep, ConstantCoefficientMatchesP1)
{
    const auto rep = gap_sweep(CoefficientField::constant(1.0), SourceField::paper(), {2, 4}, 16);
    for (const auto& r : rep.rows) {
        EXPECT_LT(std::abs(r.err_PG_vs_ref - r.err_P1_vs_ref), 1e-12);
        EXPECT_TRUE(std::isinf(r.H_over_eps));
    }
}

TEST(GapSweep, NonNestedRejected)
{
    EXPECT_THROW(gap_sweep(CoefficientField::constant(1.0), SourceField::paper(), {3, 4}, 16), InvalidArgument);
}

TEST(Homogenization, TargetsAreHarmonicAndArithmeticMeans)
{
    const Tensor t = layered_homogenized(1.0, 4.0);
    EXPECT_NEAR(t(0, 0), 1.6, 1e-15);
    EXPECT_NEAR(t(1, 1), 2.5, 1e-15);
    EXPECT_EQ(t(0, 1), 0.0);
}

TEST(Homogenization, ConstantLayersGiveZeroDeviation)
{
    const auto rows = homogenization_check(2.0, 2.0, {0.25 / 8, 0.25 / 16}, 4);
    for (const auto& r : rows)
        EXPECT_LT(r.max_dev_all, 1e-12);
}

TEST(Homogenization, DeviationDecreasesWithEpsilon)
{
    const double H = 0.25;
    const auto rows = homogenization_check(1.0, 4.0, {H / 8, H / 16, H / 32}, 4);
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_LE(1.0 / (4 << rows[i].level), rows[i].epsilon / 4 * (1 + 1e-12));
        if (i > 0) {
            EXPECT_LE(rows[i].max_dev_interior, rows[i - 1].max_dev_interior);
        }
    }
    EXPECT_LE(std::abs(rows.back().worst_interior(0, 0) - 1.6), 0.05 * 1.6);
    EXPECT_LE(std::abs(rows.back().worst_interior(1, 1) - 2.5), 0.05 * 2.5);
}

TEST(Homogenization, InteriorElementsAvoidTheBoundary)
{
    const auto mesh = build_structured_coarse(4);
    const auto interior = interior_elements(mesh);
    // the two triangles of each square in the inner 2x2 block
    EXPECT_EQ(interior.size(), 8u);
    for (int k : interior)
        for (int v : mesh.triangles[k])
            EXPECT_FALSE(mesh.on_boundary(v));
    EXPECT_EQ(resolving_level(4, 0.25 / 32), 7);
}

TEST(Convergence, ManufacturedSlopeIsOne)
{
    const auto study = manufactured_convergence({8, 16, 32, 64});
    EXPECT_NEAR(study.slope, 1.0, 0.1);
    for (std::size_t i = 1; i < study.h1_error.size(); ++i)
        EXPECT_LT(study.h1_error[i], study.h1_error[i - 1]);
}

} // namespace
