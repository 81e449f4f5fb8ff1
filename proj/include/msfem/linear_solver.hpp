#pragma once

// Sparse linear solvers: sparse Cholesky / LU factorizations (Eigen) and a
// Jacobi-preconditioned conjugate gradient.

#include "msfem/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>

namespace msfem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct SolverOptions {
    enum class Method { automatic, direct, cg };
    Method method = Method::automatic;
    double tolerance = 1e-12;
    int max_iterations = 20000;
    /// `automatic` factorizes up to this many unknowns and runs cg above.
    static constexpr int direct_limit = 1'000'000;

    static SolverOptions direct() { return {Method::direct}; }
    static SolverOptions cg(double tol, int maxit) { return {Method::cg, tol, maxit}; }
};

struct SolveResult {
    Eigen::VectorXd solution;
    double relative_residual = 0.0;
    int iterations = 0;
};

inline double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b)
{
    const double nb = b.norm();
    const double nr = (a * x - b).norm();
    return nb > 0.0 ? nr / nb : nr;
}

/// Sparse LL^T factorization with AMD ordering, reusable for many right-hand sides.
class CholeskyFactor {
public:
    explicit CholeskyFactor(const SparseMatrix& a) : matrix_(a)
    {
        if (a.rows() != a.cols())
            throw InvalidArgument("CholeskyFactor: matrix is not square");
        if (a.rows() > 0) {
            llt_.compute(matrix_);
            if (llt_.info() != Eigen::Success)
                throw NumericError("sparse Cholesky factorization failed: matrix is not positive definite");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const
    {
        if (b.size() == 0)
            return {};
        Eigen::VectorXd x = llt_.solve(b);
        if (llt_.info() != Eigen::Success || !x.allFinite())
            throw NumericError("sparse Cholesky back-substitution failed");
        return x;
    }

    Eigen::Index size() const noexcept { return matrix_.rows(); }

private:
    ColMatrix matrix_;
    Eigen::SimplicialLLT<ColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

/// Conjugate gradient with diagonal (Jacobi) preconditioning. Stops when
/// ||Ax - b|| <= tol ||b||.
inline SolveResult conjugate_gradient(const SparseMatrix& a, const Eigen::VectorXd& b, double tol, int max_iterations)
{
    const Eigen::Index n = a.rows();
    SolveResult out;
    out.solution = Eigen::VectorXd::Zero(n);
    const double nb = b.norm();
    if (nb == 0.0)
        return out;

    Eigen::VectorXd inv_diag = a.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(inv_diag[i] > 0.0))
            throw NumericError("conjugate_gradient: non-positive diagonal entry, matrix is not SPD");
        inv_diag[i] = 1.0 / inv_diag[i];
    }

    Eigen::VectorXd& x = out.solution;
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    Eigen::VectorXd ap(n);
    double rz = r.dot(z);
    double res = 1.0;
    for (int it = 1; it <= max_iterations; ++it) {
        ap.noalias() = a * p;
        const double pap = p.dot(ap);
        if (!(pap > 0.0))
            throw NumericError("conjugate_gradient: non-positive curvature, matrix is not SPD");
        const double alpha = rz / pap;
        x += alpha * p;
        r -= alpha * ap;
        res = r.norm() / nb;
        out.iterations = it;
        if (res <= tol) {
            // recurrence drift: confirm with the true residual
            res = relative_residual(a, x, b);
            if (res <= tol) {
                out.relative_residual = res;
                return out;
            }
            r = b - a * x;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw SolverFailure("conjugate_gradient: no convergence in " + std::to_string(max_iterations)
                            + " iterations, relative residual " + std::to_string(res),
                        res);
}

/// Solves a x = b. `symmetric` selects Cholesky over LU for the direct path.
inline SolveResult solve_sparse(const SparseMatrix& a, const Eigen::VectorXd& b, const SolverOptions& options,
                                bool symmetric = true)
{
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw InvalidArgument("solve_sparse: dimension mismatch");
    auto method = options.method;
    if (method == SolverOptions::Method::automatic)
        method = a.rows() <= SolverOptions::direct_limit ? SolverOptions::Method::direct : SolverOptions::Method::cg;

    if (method == SolverOptions::Method::cg) {
        if (!symmetric)
            throw InvalidArgument("solve_sparse: cg requires a symmetric matrix");
        return conjugate_gradient(a, b, options.tolerance, options.max_iterations);
    }

    SolveResult out;
    if (a.rows() == 0)
        return out;
    if (symmetric) {
        out.solution = CholeskyFactor(a).solve(b);
    } else {
        ColMatrix col = a;
        Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(col);
        if (lu.info() != Eigen::Success)
            throw NumericError("sparse LU factorization failed: " + lu.lastErrorMessage());
        out.solution = lu.solve(b);
        if (lu.info() != Eigen::Success || !out.solution.allFinite())
            throw NumericError("sparse LU solve failed");
    }
    out.relative_residual = relative_residual(a, out.solution, b);
    return out;
}

} // namespace msfem
