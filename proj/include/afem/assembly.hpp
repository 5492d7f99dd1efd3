#pragma once

#include <memory>
#include <string>

#include <Eigen/SparseCore>

#include "afem/femspace.hpp"

namespace afem {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Discrete Stokes operator blocks on a Taylor-Hood dof map, before Dirichlet
/// elimination.
struct StokesSystem {
    std::shared_ptr<const DofMap> dofs;
    SparseMatrix A;             ///< n_u x n_u, a(phi_j, phi_i)
    SparseMatrix B;             ///< n_p x n_u, b(phi_j, q_i) = int q_i div phi_j
    SparseMatrix M;             ///< n_p x n_p pressure mass matrix
    Eigen::VectorXd mean;       ///< n_p, int q_i
    Eigen::VectorXd load;       ///< n_u, <f, phi_i>
    Eigen::VectorXd dirichlet;  ///< n_u, prescribed values on boundary dofs, 0 elsewhere
    std::vector<int> free_dofs; ///< velocity dofs not on the boundary, ascending

    /// Symmetric saddle-point matrix over [free u, p, multiplier]:
    ///   [ A_ff  -B_f^T  0 ]
    ///   [ -B_f   0      m ]
    ///   [ 0      m^T    0 ]
    SparseMatrix kkt_matrix() const;
    /// Right-hand side including the lift of the Dirichlet values.
    Eigen::VectorXd kkt_rhs() const;
};

/// Element-loop assembly with the degree-6 rule. `g` may be empty (homogeneous
/// boundary values).
StokesSystem assemble(std::shared_ptr<const DofMap> dofs, const VectorFn& f, const VectorFn& g = {});

/// Exact sparse factorization of the KKT system. Throws SolverError on a
/// singular factorization or when the residual exceeds 1e-9 (1 + |rhs|_inf).
SolutionPair solve(const StokesSystem& sys);

/// Velocity-only vector Poisson problem A u = f with the same boundary values;
/// pressure is returned as zero. Used as the coercive reference case.
SolutionPair solve_vector_laplace(const StokesSystem& sys);

struct ErrorNorms {
    double u_h1 = 0.0; ///< |grad(u - u_h)|_{L2}
    double p_l2 = 0.0; ///< |p - p_h - mean|_{L2}
};

ErrorNorms error_norms(const SolutionPair& sol, const ExactSolution& exact);

/// Same norms for the difference of two discrete pairs on the same dof map.
ErrorNorms difference_norms(const SolutionPair& a, const SolutionPair& b);

/// sqrt of the smallest eigenvalue of B A^{-1} B^T against the pressure mass
/// matrix on zero-mean pressures. Throws InvalidArgument above 4000 total dofs.
double inf_sup_constant(const StokesSystem& sys);

/// Coordinate text dump of the KKT matrix: "row col value" per line.
void dump_system(const StokesSystem& sys, const std::string& path);

} // namespace afem
