#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "afem/femspace.hpp"

namespace afem {

struct ProblemDef {
    std::string id;
    std::string domain; ///< "unit-square" or "l-shape"
    std::string description;
    std::function<Partition()> initial_mesh;
    VectorFn f;
    VectorFn g; ///< empty for homogeneous boundary values
    std::optional<ExactSolution> exact;
};

/// linear-patch, smooth-mms, lshape-smoothf, lshape-constf, singular-f. Problems with an
/// exact solution are checked on first access (see check_exact_solution).
const std::vector<ProblemDef>& builtin_problems();

/// Throws ConfigError for an unknown id.
const ProblemDef& find_problem(const std::string& id);

/// Largest residual of -lap u + grad p - f and div u at `samples` random
/// points of the domain, with derivatives taken by fourth-order central
/// differences (step 1e-3). Also compares grad_u with the differenced u.
double exact_solution_defect(const ProblemDef& problem, int samples = 100, unsigned seed = 7);

} // namespace afem
