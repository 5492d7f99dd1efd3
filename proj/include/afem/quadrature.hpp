#pragma once

#include <array>
#include <vector>

namespace afem {

using Bary = std::array<double, 3>;

/// Barycentric points with weights normalised to sum to 1 (multiply by the
/// element area to integrate).
struct TriangleRule {
    std::vector<Bary> points;
    std::vector<double> weights;
    int degree = 0;
};

/// Points in [0, 1] with weights summing to 1 (multiply by the edge length).
struct EdgeRule {
    std::vector<double> points;
    std::vector<double> weights;
    int degree = 0;
};

/// 12-point rule, exact for polynomials of total degree 6.
const TriangleRule& triangle_rule_6();

/// 4-point Gauss-Legendre, exact for degree 7.
const EdgeRule& edge_rule_7();

} // namespace afem
