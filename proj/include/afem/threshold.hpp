#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "afem/femspace.hpp"

namespace afem {

/// Non-negative local error functional e(tau, P), evaluated for all leaves.
struct LocalIndicator {
    std::string name;
    std::function<std::vector<double>(const Partition&)> evaluate;
    bool subadditive = false;
};

/// osc_tau of the load f.
LocalIndicator oscillation_indicator(VectorFn f);

/// Parses "osc" (needs f) or "synthetic:<a>" (e = |tau|^a on every leaf) or
/// "synthetic:<a>@<x>,<y>" (e = |tau|^a on leaves whose closure contains
/// (x, y), 0 elsewhere). Throws ConfigError on bad input.
LocalIndicator parse_indicator(const std::string& text, const VectorFn& f);

struct ThresholdReport {
    double eps = 0.0;
    Partition final_partition;
    std::size_t added = 0;    ///< #P - #P0
    double sum_e = 0.0;       ///< sum of e over the final partition
    double max_e = 0.0;
    std::vector<std::size_t> rounds; ///< marked count per round
    std::map<int, std::size_t> buckets; ///< j -> #{marked: 2^{-j-1} <= |tau| < 2^{-j}}
    bool buckets_disjoint = true;
    bool bucket_bound = true; ///< m_j <= 2^{j+1} |Omega| for every j
};

/// Dyadic bucket index j with 2^{-j-1} <= area < 2^{-j}.
int area_bucket(double area);

/// Marks every leaf with e > eps and refines until nothing is marked. Throws
/// BudgetError naming the worst element once a marked element has reached
/// `max_generation`.
ThresholdReport greedy_threshold(const Partition& p0, const LocalIndicator& indicator, double eps,
                                 int max_generation = 40);

struct PredictedRate {
    double s = 0.0;
    double delta = 0.0;
    bool admissible = false;
};

/// s = (alpha + 1) / n, delta = s + 1/2 - 1/q, admissibility in two dimensions.
PredictedRate predicted_rate(double alpha, int n, double q);

struct ClassSeminorm {
    double value = 0.0;   ///< max over the points of N^s value (a lower bound)
    bool growing = false; ///< N^s value still increases along the points
};

ClassSeminorm class_seminorm(std::span<const double> sizes, std::span<const double> values, double s);

} // namespace afem
