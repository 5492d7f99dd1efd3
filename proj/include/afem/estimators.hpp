#pragma once

#include <span>
#include <string>
#include <vector>

#include "afem/femspace.hpp"

namespace afem {

enum class EstimatorKind { eta0, eta1, eta2 };

std::string to_string(EstimatorKind kind);
/// Parses "eta0" / "eta1" / "eta2"; throws ConfigError otherwise.
EstimatorKind parse_estimator(const std::string& name);

/// Squared local contributions of the residual estimators, h_tau = |tau|^{1/2},
/// h_e = |e|.
struct ElementIndicators {
    std::vector<double> vol;      ///< h_tau^2 |f + lap u_h - grad p_h|^2_{tau}
    std::vector<double> div_l2;   ///< |div u_h|^2_{tau}
    std::vector<double> div_edge; ///< h_tau |div u_h|_tau|^2_{d tau}
    std::vector<double> osc;      ///< h_tau^2 |f - mean_tau f|^2_{tau}
    std::vector<double> jump;     ///< per partition edge: h_e |[d_nu u_h]|^2_e, 0 on boundary edges

    double total_osc() const;
};

/// Per-leaf and per-edge indicators for the discrete pair `sol`, evaluated by
/// exact polynomial calculus on each element and the degree-6 / degree-7
/// rules for the data.
ElementIndicators compute_indicators(const SolutionPair& sol, const VectorFn& f);

/// h_e |[d_nu u]|^2_e across the segment (x0, x1) between the polynomials of
/// `left` and `right`, using the normal obtained by rotating x1 - x0
/// clockwise. Swapping both the sides and the endpoints gives the same value.
double edge_jump(const LocalSolution& left, const LocalSolution& right, const Point& x0, const Point& x1);

/// Data oscillation alone (no solution needed).
std::vector<double> oscillation(const Partition& p, const VectorFn& f);

/// Squared estimator over the leaf subset `subset` (positions in leaves()):
/// element terms over the subset, jump terms over edges whose two neighbours
/// both lie in the subset.
double eta(EstimatorKind kind, const Partition& p, std::span<const std::size_t> subset,
           const ElementIndicators& ind);
/// Squared estimator over the whole partition.
double eta(EstimatorKind kind, const Partition& p, const ElementIndicators& ind);

/// Per-leaf shares for marking: element terms plus the full jump of every
/// interior edge of the element. Sum of shares = eta^2 + sum of all jumps.
std::vector<double> marking_shares(EstimatorKind kind, const Partition& p, const ElementIndicators& ind);

} // namespace afem
