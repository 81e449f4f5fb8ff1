#pragma once

// Verification and experiment harness: coarse-component projection, discrete
// identity report, Galerkin vs Petrov-Galerkin gap sweep, homogenization
// limit of the effective tensor, and convergence helpers.

#include "msfem/coefficient.hpp"
#include "msfem/errors.hpp"
#include "msfem/fem.hpp"
#include "msfem/mesh.hpp"
#include "msfem/offline.hpp"
#include "msfem/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace msfem {

/// Least-squares slope of log(y) against log(x). NaN when fewer than two
/// points or any value is not positive.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto n = x.size();
    if (n < 2 || y.size() != n)
        return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            return std::numeric_limits<double>::quiet_NaN();
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

/// The unique coarse v_H with a^Abar(v_H, w_H) = a^eps(v, w_H) for every
/// coarse P1 w_H. For v = reconstruct(u_H) this recovers u_H.
inline FeFunction coarse_component(const FeFunction& v, const CoarseMesh& mesh, const GlobalFineMesh& global,
                                   const CoefficientField& coeff, std::span<const Tensor> tensors,
                                   const SolveOptions& options = {})
{
    if (v.mesh != &global)
        throw InvalidArgument("coarse_component: field does not live on the global fine mesh");
    if (tensors.size() != mesh.triangles.size() || global.element_injections.size() != mesh.triangles.size())
        throw InvalidArgument("coarse_component: tensors / meshes do not match");

    const auto coeff_avg = averaged_coefficient(global, coeff, options.quad);
    std::vector<P1Element> parents;
    parents.reserve(mesh.triangles.size());
    for (int k = 0; k < mesh.num_triangles(); ++k)
        parents.emplace_back(mesh.corners(k));

    std::vector<Eigen::Vector3d> loads(mesh.triangles.size(), Eigen::Vector3d::Zero());
    for (int t = 0; t < global.num_triangles(); ++t) {
        const int k = global.coarse_parent[t];
        const Eigen::Vector2d flux = coeff_avg[t] * gradient_in_element(v, t);
        const double area = std::abs(global.area(t));
        for (int j = 0; j < 3; ++j)
            loads[k][j] += area * parents[k].grad[j].dot(flux);
    }
    SparseSystem sys = assemble(mesh, tensors, SourceField::constant(0.0), options.quad);
    sys.rhs.setZero();
    for (int k = 0; k < mesh.num_triangles(); ++k)
        for (int j = 0; j < 3; ++j)
            if (const int row = mesh.dof_of_vertex[mesh.triangles[k][j]]; row >= 0)
                sys.rhs[row] += loads[k][j];
    return FeFunction::from_dofs(mesh, solve_sparse(sys, options.solver).solution);
}

// ---------------------------------------------------------------------------
// Identity report

struct IdentityThresholds {
    double stiffness = 1e-10; // relative max-norm
    double solution = 1e-9;   // max-norm
    double expansion = 1e-10;
    double lower_margin = -1e-8;
    double upper_margin = -1e-6;
};

struct IdentityReport {
    int elements = 0;
    int level = 0;
    double stiffness_galerkin_vs_p1 = 0.0; // ||A^eps - A^P1||_max / ||A^P1||_max
    double stiffness_pg_vs_galerkin = 0.0; // ||A^PG - A^eps||_max / ||A^eps||_max
    double solution_pg_vs_nonintrusive = 0.0;
    double expansion = 0.0;         // max over elements of verify_expansion
    double bound_lower_margin = 0.0; // min_K lambda_min(sym Abar) - m
    double bound_upper_margin = 0.0; // min_K M(1+M/m) - sigma_max(Abar)
    double probe_slack = 0.0;        // min slack over random (xi, eta) probes
    double tensor_asymmetry = 0.0;   // max_K |Abar - Abar^T|_max
    double galerkin_asymmetry = 0.0; // |A^eps - (A^eps)^T|_max
    double rhs_difference = 0.0;     // |F^eps - F^P1|_2, nonzero in general

    bool passes(const IdentityThresholds& th = {}) const
    {
        return stiffness_galerkin_vs_p1 <= th.stiffness && stiffness_pg_vs_galerkin <= th.stiffness
            && solution_pg_vs_nonintrusive <= th.solution && expansion <= th.expansion
            && bound_lower_margin >= th.lower_margin && bound_upper_margin >= th.upper_margin
            && probe_slack >= th.lower_margin;
    }

    /// Flat `key = value` text, one pair per line.
    std::string to_text() const
    {
        std::ostringstream os;
        auto put = [&](const char* key, double value) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", value);
            os << key << " = " << buf << '\n';
        };
        os << "elements = " << elements << '\n' << "level = " << level << '\n';
        put("stiffness_galerkin_vs_p1", stiffness_galerkin_vs_p1);
        put("stiffness_pg_vs_galerkin", stiffness_pg_vs_galerkin);
        put("solution_pg_vs_nonintrusive", solution_pg_vs_nonintrusive);
        put("expansion", expansion);
        put("bound_lower_margin", bound_lower_margin);
        put("bound_upper_margin", bound_upper_margin);
        put("probe_slack", probe_slack);
        put("tensor_asymmetry", tensor_asymmetry);
        put("galerkin_asymmetry", galerkin_asymmetry);
        put("rhs_difference", rhs_difference);
        os << "pass = " << (passes() ? "true" : "false") << '\n';
        return os.str();
    }
};

struct IdentityOptions {
    int workers = 1;
    std::uint64_t seed = 1;
    int probes = 100;
    QuadratureRule quad = QuadratureRule::standard();
};

inline double relative_max_diff(const SparseMatrix& a, const SparseMatrix& b)
{
    const double scale = max_abs(b);
    const SparseMatrix d = a - b;
    return scale > 0.0 ? max_abs(d) / scale : max_abs(d);
}

/// Measures every discrete identity with the direct solver.
inline IdentityReport identity_report(const CoarseMesh& mesh, const CoefficientField& coeff, int level,
                                      const SourceField& f = SourceField::paper(), const IdentityOptions& options = {})
{
    OfflineOptions off;
    off.workers = options.workers;
    off.with_basis = true;
    off.quad = options.quad;
    const OfflineData offline = run_offline(mesh, coeff, level, off);
    SolveOptions so;
    so.workers = options.workers;
    so.solver = SolverOptions::direct();
    so.quad = options.quad;

    IdentityReport rep;
    rep.elements = mesh.num_triangles();
    rep.level = level;

    const SparseSystem galerkin = galerkin_system(mesh, coeff, f, offline, so);
    const SparseSystem pg = pg_system(mesh, coeff, f, offline, so);
    const SparseSystem p1 = nonintrusive_system(mesh, offline.tensors, f, options.quad);
    rep.stiffness_galerkin_vs_p1 = relative_max_diff(galerkin.matrix, p1.matrix);
    rep.stiffness_pg_vs_galerkin = relative_max_diff(pg.matrix, galerkin.matrix);
    rep.galerkin_asymmetry = asymmetry(galerkin.matrix);
    rep.rhs_difference = (galerkin.rhs - p1.rhs).norm();

    const Eigen::VectorXd u_pg = solve_sparse(pg, so.solver).solution;
    const Eigen::VectorXd u_ni = solve_sparse(p1, so.solver).solution;
    rep.solution_pg_vs_nonintrusive = u_pg.size() ? (u_pg - u_ni).cwiseAbs().maxCoeff() : 0.0;

    std::mt19937_64 rng(options.seed);
    rep.bound_lower_margin = rep.bound_upper_margin = rep.probe_slack = std::numeric_limits<double>::infinity();
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        rep.expansion = std::max(rep.expansion, verify_expansion(offline.fine_meshes[k], offline.basis[k],
                                                                 offline.correctors[k]));
        const Tensor& a = offline.tensors[k];
        const auto margins = tensor_bound_margins(a, coeff.bounds());
        rep.bound_lower_margin = std::min(rep.bound_lower_margin, margins.lower);
        rep.bound_upper_margin = std::min(rep.bound_upper_margin, margins.upper);
        rep.probe_slack = std::min(rep.probe_slack, probe_tensor_bounds(a, coeff.bounds(), rng, options.probes));
        rep.tensor_asymmetry = std::max(rep.tensor_asymmetry, std::abs(a(0, 1) - a(1, 0)));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Galerkin vs Petrov-Galerkin sweep

struct ErrorRow {
    int n = 0;     // coarse divisions, H = 1/n
    int level = 0; // local refinement level
    double H = 0.0;
    double H_over_eps = 0.0;
    double err_G_vs_ref = 0.0;
    double err_G_vs_PG = 0.0;
    double err_PG_vs_ref = 0.0;
    double err_P1_vs_ref = 0.0;
    /// max |u^PG - u^NI| over fine vertices; both paths are run.
    double nonintrusive_vs_pg = 0.0;
};

struct SweepReport {
    double epsilon = 0.0;
    std::vector<ErrorRow> rows; // decreasing H
    struct {
        double G_vs_ref = 0.0, G_vs_PG = 0.0, PG_vs_ref = 0.0, P1_vs_ref = 0.0;
    } slopes;
    std::vector<std::string> warnings;
};

/// Local refinement level used for coarse divisions n against a reference
/// grid of n_ref divisions. Default: the finest nested level, n 2^r = n_ref.
struct RefinementRule {
    std::optional<int> fixed_level;

    int level_for(int n, int n_ref) const
    {
        if (n < 2 || n_ref < n || n_ref % n != 0)
            throw InvalidArgument("gap_sweep: coarse mesh 1/" + std::to_string(n) + " is not nested in reference mesh 1/"
                                  + std::to_string(n_ref));
        if (fixed_level) {
            if (*fixed_level < 0 || n_ref % (n << *fixed_level) != 0)
                throw InvalidArgument("gap_sweep: fine mesh of H = 1/" + std::to_string(n) + " at level "
                                      + std::to_string(*fixed_level) + " is not nested in the reference mesh");
            return *fixed_level;
        }
        const int ratio = n_ref / n;
        if ((ratio & (ratio - 1)) != 0)
            throw InvalidArgument("gap_sweep: n_ref / n must be a power of two");
        int r = 0;
        while ((1 << r) < ratio)
            ++r;
        return r;
    }
};

/// Structured reference mesh with n_ref divisions as a GlobalFineMesh.
struct ReferenceGrid {
    CoarseMesh coarse;
    GlobalFineMesh fine;

    explicit ReferenceGrid(int n_ref) : coarse(build_structured_coarse(n_ref)), fine(build_global_fine(coarse, 0)) {}
};

/// One row: all solution paths on H = 1/n, errors on the reference grid.
inline ErrorRow compare_on_reference(const CoefficientField& coeff, const SourceField& f, int n, int level,
                                     const GlobalFineMesh& ref_mesh, const FeFunction& u_ref,
                                     const SolveOptions& options = {})
{
    const CoarseMesh mesh = build_structured_coarse(n);
    const GlobalFineMesh global = build_global_fine(mesh, level);
    OfflineOptions off;
    off.workers = options.workers;
    off.with_basis = true;
    off.quad = options.quad;
    const OfflineData offline = run_offline(mesh, coeff, level, off);

    const MsfemSolution g = solve_msfem_galerkin(mesh, global, coeff, f, offline, options);
    const MsfemSolution pg = solve_msfem_pg(mesh, global, coeff, f, offline, options);
    const MsfemSolution ni = solve_nonintrusive(mesh, global, offline, f, options);
    const MsfemSolution p1 = solve_p1(mesh, global, coeff, f, options);

    const FeFunction g_ref = transfer(g.fine, ref_mesh);
    const FeFunction pg_ref = transfer(pg.fine, ref_mesh);
    const FeFunction p1_ref = transfer(p1.fine, ref_mesh);

    ErrorRow row;
    row.n = n;
    row.level = level;
    row.H = 1.0 / n;
    const double eps = coeff.epsilon();
    row.H_over_eps = eps > 0.0 ? row.H / eps : std::numeric_limits<double>::infinity();
    row.err_G_vs_ref = h1_norm_diff(g_ref, u_ref);
    row.err_G_vs_PG = h1_norm_diff(g_ref, pg_ref);
    row.err_PG_vs_ref = h1_norm_diff(pg_ref, u_ref);
    row.err_P1_vs_ref = h1_norm_diff(p1_ref, u_ref);
    row.nonintrusive_vs_pg = (pg.fine.values - ni.fine.values).cwiseAbs().maxCoeff();
    return row;
}

inline SweepReport gap_sweep(const CoefficientField& coeff, const SourceField& f, std::vector<int> n_list, int n_ref,
                             const RefinementRule& rule = {}, const SolveOptions& options = {})
{
    std::sort(n_list.begin(), n_list.end());
    n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
    std::vector<int> levels;
    for (int n : n_list)
        levels.push_back(rule.level_for(n, n_ref));

    SweepReport rep;
    rep.epsilon = coeff.epsilon();
    const ReferenceGrid ref(n_ref);
    const MsfemSolution u_ref = solve_reference(ref.fine, coeff, f, options);
    rep.warnings = u_ref.diagnostics.warnings;

    for (std::size_t i = 0; i < n_list.size(); ++i)
        rep.rows.push_back(compare_on_reference(coeff, f, n_list[i], levels[i], ref.fine, u_ref.fine, options));

    std::vector<double> hs, g_ref, g_pg, pg_ref, p1_ref;
    for (const auto& r : rep.rows) {
        hs.push_back(r.H);
        g_ref.push_back(r.err_G_vs_ref);
        g_pg.push_back(r.err_G_vs_PG);
        pg_ref.push_back(r.err_PG_vs_ref);
        p1_ref.push_back(r.err_P1_vs_ref);
    }
    rep.slopes.G_vs_ref = fit_slope(hs, g_ref);
    rep.slopes.G_vs_PG = fit_slope(hs, g_pg);
    rep.slopes.PG_vs_ref = fit_slope(hs, pg_ref);
    rep.slopes.P1_vs_ref = fit_slope(hs, p1_ref);

    // err_G_vs_ref is expected to decrease with H while H >= 4 eps; the
    // classical estimate has a sqrt(eps/H) term, so this only warns.
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        const auto& coarser = rep.rows[i - 1];
        const auto& finer = rep.rows[i];
        if (finer.H_over_eps >= 4.0 && finer.err_G_vs_ref > coarser.err_G_vs_ref) {
            std::ostringstream os;
            os << "err_G_vs_ref increased from H = " << coarser.H << " to H = " << finer.H;
            rep.warnings.push_back(os.str());
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Homogenization limit for layered media

/// diag(harmonic mean, arithmetic mean) of the two layer values.
inline Tensor layered_homogenized(double a_minus, double a_plus)
{
    Tensor t = Tensor::Zero();
    t(0, 0) = 2.0 * a_minus * a_plus / (a_minus + a_plus);
    t(1, 1) = 0.5 * (a_minus + a_plus);
    return t;
}

struct HomogenizationRow {
    double epsilon = 0.0;
    double H_over_eps = 0.0;
    int level = 0;
    Tensor target = Tensor::Zero();
    Tensor worst_interior = Tensor::Zero(); // interior-element tensor farthest from target
    double max_dev_interior = 0.0;          // max_K |Abar_K - A*|_max over interior elements
    double max_dev_all = 0.0;
};

/// Smallest level with 1/(n 2^r) <= eps/4.
inline int resolving_level(int n, double epsilon)
{
    int r = 0;
    while (1.0 / (static_cast<double>(n) * (1 << r)) > epsilon / 4.0 * (1.0 + 1e-12))
        ++r;
    return r;
}

/// Elements none of whose vertices lie on the boundary of the domain.
inline std::vector<int> interior_elements(const CoarseMesh& mesh)
{
    std::vector<int> out;
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangles[k];
        if (!mesh.on_boundary(t[0]) && !mesh.on_boundary(t[1]) && !mesh.on_boundary(t[2]))
            out.push_back(k);
    }
    return out;
}

inline std::vector<HomogenizationRow> homogenization_check(double a_minus, double a_plus,
                                                           const std::vector<double>& eps_list, int n,
                                                           const OfflineOptions& options = {})
{
    const CoarseMesh mesh = build_structured_coarse(n);
    const auto interior = interior_elements(mesh);
    const Tensor target = layered_homogenized(a_minus, a_plus);
    std::vector<HomogenizationRow> rows;
    for (double eps : eps_list) {
        const auto coeff = CoefficientField::layered(eps, a_minus, a_plus);
        HomogenizationRow row;
        row.epsilon = eps;
        row.H_over_eps = 1.0 / (n * eps);
        row.level = resolving_level(n, eps);
        row.target = target;
        OfflineOptions off = options;
        off.with_basis = false;
        const OfflineData offline = run_offline(mesh, coeff, row.level, off);
        for (int k = 0; k < mesh.num_triangles(); ++k) {
            const double dev = (offline.tensors[k] - target).cwiseAbs().maxCoeff();
            row.max_dev_all = std::max(row.max_dev_all, dev);
            if (std::find(interior.begin(), interior.end(), k) != interior.end() && dev >= row.max_dev_interior) {
                row.max_dev_interior = dev;
                row.worst_interior = offline.tensors[k];
            }
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reference-solver convergence on the manufactured problem

struct ConvergenceStudy {
    std::vector<double> h;
    std::vector<double> h1_error;
    double slope = 0.0;
};

/// P1 on structured grids of the given divisions for -Laplace u = f with the
/// manufactured source of frequency k; H^1 seminorm error against the exact
/// sin(k pi x1) sin(k pi x2).
inline ConvergenceStudy manufactured_convergence(const std::vector<int>& divisions, int k = 1,
                                                 const SolveOptions& options = {})
{
    ConvergenceStudy out;
    const auto coeff = CoefficientField::constant(1.0);
    const auto f = SourceField::manufactured(k);
    const double w = k * std::numbers::pi;
    auto exact_grad = [w](const Point& x) {
        return Eigen::Vector2d(w * std::cos(w * x.x()) * std::sin(w * x.y()), w * std::sin(w * x.x()) * std::cos(w * x.y()));
    };
    for (int n : divisions) {
        const ReferenceGrid grid(n);
        const MsfemSolution u = solve_reference(grid.fine, coeff, f, options);
        out.h.push_back(1.0 / n);
        out.h1_error.push_back(h1_seminorm_error(u.fine, exact_grad, QuadratureRule::interior_three_point()));
    }
    out.slope = fit_slope(out.h, out.h1_error);
    return out;
}

} // namespace msfem
