#pragma once

// Orchestration of the msfemlab commands and their output files. All numbers
// are written with %.17g; files use LF line endings.

#include "msfem/analysis.hpp"
#include "msfem/cli/config.hpp"
#include "msfem/msfem.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace msfem::cli {

inline std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline CoefficientField make_coefficient(const RunConfig& c)
{
    if (c.coefficient == "paper-periodic")
        return CoefficientField::paper_periodic(c.epsilon, c.amplitude);
    if (c.coefficient == "layered")
        return CoefficientField::layered(c.epsilon, c.a_minus, c.a_plus);
    if (c.coefficient == "constant-scalar")
        return CoefficientField::constant(c.coefficient_value);
    Tensor a;
    a << c.matrix[0], c.matrix[1], c.matrix[2], c.matrix[3];
    return CoefficientField::matrix(a);
}

inline SourceField make_source(const RunConfig& c)
{
    if (c.source == "constant")
        return SourceField::constant(c.source_value);
    if (c.source == "manufactured")
        return SourceField::manufactured(c.source_k);
    return SourceField::paper();
}

inline SolverOptions make_solver(const RunConfig& c)
{
    SolverOptions s;
    s.tolerance = c.tol;
    s.max_iterations = c.maxit;
    if (c.solver == "direct")
        s.method = SolverOptions::Method::direct;
    else if (c.solver == "cg")
        s.method = SolverOptions::Method::cg;
    return s;
}

inline SolveOptions make_solve_options(const RunConfig& c)
{
    SolveOptions o;
    o.workers = c.workers;
    o.solver = make_solver(c);
    return o;
}

/// Output file in the configured directory; LF endings on every platform.
class OutputFile {
public:
    OutputFile(const RunConfig& c, const std::string& name)
        : path_(std::filesystem::path(c.output_dir) / name), os_(path_, std::ios::binary | std::ios::trunc)
    {
        if (!os_)
            throw Error("cannot open output file " + path_.string());
    }

    template <class T>
    OutputFile& operator<<(const T& v)
    {
        os_ << v;
        return *this;
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream os_;
};

inline void write_solution(const RunConfig& c, const FeFunction& u, const std::string& variant)
{
    OutputFile f(c, "solution_" + variant + ".csv");
    f << "vertex_id,x,y,value\n";
    for (int v = 0; v < u.mesh->num_vertices(); ++v)
        f << v << ',' << fmt(u.mesh->vertices[v].x()) << ',' << fmt(u.mesh->vertices[v].y()) << ','
          << fmt(u.values[v]) << '\n';
}

inline void write_tensors(const RunConfig& c, const std::vector<Tensor>& tensors)
{
    OutputFile f(c, "tensors.csv");
    f << "element_id,a11,a12,a21,a22\n";
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const Tensor& a = tensors[k];
        f << k << ',' << fmt(a(0, 0)) << ',' << fmt(a(0, 1)) << ',' << fmt(a(1, 0)) << ',' << fmt(a(1, 1)) << '\n';
    }
}

inline int run_solve(const RunConfig& c, std::ostream& out)
{
    const auto coeff = make_coefficient(c);
    const auto f = make_source(c);
    const SolveOptions opts = make_solve_options(c);
    const CoarseMesh mesh = build_structured_coarse(c.n);
    const GlobalFineMesh global = build_global_fine(mesh, c.r);

    MsfemSolution sol;
    if (c.variant == "reference") {
        sol = solve_reference(global, coeff, f, opts);
    } else if (c.variant == "p1") {
        sol = solve_p1(mesh, global, coeff, f, opts);
    } else {
        OfflineOptions off;
        off.workers = c.workers;
        off.with_basis = c.variant != "nonintrusive";
        off.solver = opts.solver.method == SolverOptions::Method::cg ? opts.solver : SolverOptions::direct();
        const OfflineData offline = run_offline(mesh, coeff, c.r, off);
        if (c.variant == "nonintrusive")
            sol = solve_nonintrusive(mesh, global, offline, f, opts);
        else if (c.variant == "pg")
            sol = solve_msfem_pg(mesh, global, coeff, f, offline, opts);
        else
            sol = solve_msfem_galerkin(mesh, global, coeff, f, offline, opts);
        write_tensors(c, offline.tensors);
    }
    write_solution(c, sol.fine, c.variant);
    out << "variant = " << c.variant << '\n'
        << "coarse_dofs = " << mesh.num_dofs() << '\n'
        << "fine_vertices = " << global.num_vertices() << '\n'
        << "relative_residual = " << fmt(sol.diagnostics.relative_residual) << '\n'
        << "h1_norm = " << fmt(h1_norm_diff(sol.fine, FeFunction::zero(global))) << '\n';
    return 0;
}

inline int run_compare(const RunConfig& c, std::ostream& out, std::ostream& err)
{
    const auto coeff = make_coefficient(c);
    const auto f = make_source(c);
    const SolveOptions opts = make_solve_options(c);
    // single configuration (n, r) unless a list is requested
    std::vector<int> n_list = c.n_list_set ? c.n_list : std::vector<int>{c.n};
    RefinementRule rule;
    if (c.r_set || !c.n_list_set)
        rule.fixed_level = c.r;
    const SweepReport rep = gap_sweep(coeff, f, n_list, c.n_ref, rule, opts);
    for (const auto& w : rep.warnings)
        err << "warning: " << w << '\n';

    OutputFile csv(c, "errors.csv");
    csv << "H_over_eps,err_G_ref,err_G_PG,err_PG_ref,err_P1_ref\n";
    for (const auto& r : rep.rows)
        csv << fmt(r.H_over_eps) << ',' << fmt(r.err_G_vs_ref) << ',' << fmt(r.err_G_vs_PG) << ','
            << fmt(r.err_PG_vs_ref) << ',' << fmt(r.err_P1_vs_ref) << '\n';

    OutputFile slopes(c, "slopes.txt");
    slopes << "epsilon = " << fmt(rep.epsilon) << '\n'
           << "rows = " << rep.rows.size() << '\n'
           << "slope_G_ref = " << fmt(rep.slopes.G_vs_ref) << '\n'
           << "slope_G_PG = " << fmt(rep.slopes.G_vs_PG) << '\n'
           << "slope_PG_ref = " << fmt(rep.slopes.PG_vs_ref) << '\n'
           << "slope_P1_ref = " << fmt(rep.slopes.P1_vs_ref) << '\n';
    for (const auto& r : rep.rows)
        out << "H = 1/" << r.n << "  r = " << r.level << "  H/eps = " << fmt(r.H_over_eps)
            << "  err_G_ref = " << fmt(r.err_G_vs_ref) << "  err_G_PG = " << fmt(r.err_G_vs_PG) << '\n';
    return 0;
}

inline int run_converge(const RunConfig& c, std::ostream& out)
{
    const ConvergenceStudy study = manufactured_convergence(c.n_list, c.source_k, make_solve_options(c));
    OutputFile csv(c, "convergence.csv");
    csv << "h,h1_seminorm_error\n";
    for (std::size_t i = 0; i < study.h.size(); ++i)
        csv << fmt(study.h[i]) << ',' << fmt(study.h1_error[i]) << '\n';
    OutputFile slopes(c, "slopes.txt");
    slopes << "slope_h1 = " << fmt(study.slope) << '\n';
    out << "slope_h1 = " << fmt(study.slope) << '\n';
    return 0;
}

inline int run_homog_check(const RunConfig& c, std::ostream& out)
{
    const double H = 1.0 / c.n;
    std::vector<double> eps_list;
    for (int d : c.eps_divisors)
        eps_list.push_back(H / d);
    OfflineOptions off;
    off.workers = c.workers;
    const auto rows = homogenization_check(c.a_minus, c.a_plus, eps_list, c.n, off);
    OutputFile csv(c, "homog.csv");
    csv << "epsilon,H_over_eps,level,max_dev_interior,max_dev_all,a11,a12,a21,a22,target_a11,target_a22\n";
    for (const auto& r : rows) {
        const Tensor& a = r.worst_interior;
        csv << fmt(r.epsilon) << ',' << fmt(r.H_over_eps) << ',' << r.level << ',' << fmt(r.max_dev_interior) << ','
            << fmt(r.max_dev_all) << ',' << fmt(a(0, 0)) << ',' << fmt(a(0, 1)) << ',' << fmt(a(1, 0)) << ','
            << fmt(a(1, 1)) << ',' << fmt(r.target(0, 0)) << ',' << fmt(r.target(1, 1)) << '\n';
        out << "H/eps = " << fmt(r.H_over_eps) << "  max_dev_interior = " << fmt(r.max_dev_interior) << '\n';
    }
    return 0;
}

inline int run_identities(const RunConfig& c, std::ostream& out)
{
    IdentityOptions opts;
    opts.workers = c.workers;
    opts.seed = c.seed;
    const IdentityReport rep = identity_report(build_structured_coarse(c.n), make_coefficient(c), c.r, make_source(c), opts);
    const std::string text = rep.to_text();
    OutputFile f(c, "identities.txt");
    f << text;
    out << text;
    return rep.passes() ? 0 : 1;
}

/// Runs a parsed configuration. Exit codes: 0 success, 1 numerical failure
/// or identity threshold exceeded, 2 usage error.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        for (const auto& w : c.warnings)
            err << "warning: " << w << '\n';
        std::filesystem::create_directories(c.output_dir);
        switch (c.command) {
        case Command::solve: return run_solve(c, out);
        case Command::compare: return run_compare(c, out, err);
        case Command::converge: return run_converge(c, out);
        case Command::homog_check: return run_homog_check(c, out);
        case Command::identities: return run_identities(c, out);
        }
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 1;
    }
}

/// Full command-line entry point.
inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::optional<RunConfig> config;
    try {
        config = parse_config(argc, argv, out);
    } catch (const UsageError& e) {
        err << "usage error [" << e.key() << "]: " << e.what() << '\n';
        return 2;
    }
    if (!config)
        return 0;
    return run(*config, out, err);
}

} // namespace msfem::cli
