#pragma once

#include <stdexcept>
#include <string>

namespace afem {

/// Precondition violated by the caller (non-leaf element, foreign forest, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization broke down or the solve residual exceeded its bound.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A hard budget (generation cap, dof budget) stopped a procedure that would
/// otherwise not have terminated.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed run configuration or input file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace afem
