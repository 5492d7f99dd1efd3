#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "afem/mesh.hpp"
#include "afem/quadrature.hpp"

namespace afem {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

using ScalarFn = std::function<double(const Point&)>;
using VectorFn = std::function<Vec2(const Point&)>;
/// Jacobian of a vector field: (i, j) = d u_i / d x_j.
using GradientFn = std::function<Mat2(const Point&)>;

struct ExactSolution {
    VectorFn u;
    GradientFn grad_u;
    ScalarFn p;
};

/// Affine geometry of one triangle in barycentric form.
struct ElementGeometry {
    explicit ElementGeometry(const std::array<Point, 3>& corners);

    std::array<Point, 3> x;
    std::array<Vec2, 3> grad_lambda;
    double area = 0.0;

    Point point(const Bary& l) const { return l[0] * x[0] + l[1] * x[1] + l[2] * x[2]; }
    Bary barycentric(const Point& q) const;
    /// Length of the edge opposite local vertex k.
    double edge_length(int k) const;
    /// Unit outward normal of the edge opposite local vertex k.
    Vec2 outward_normal(int k) const;
};

// Quadratic Lagrange basis. Nodes 0..2 are the vertices, node 3 + k is the
// midpoint of the edge opposite vertex k.
namespace p2 {
inline constexpr int kNodes = 6;
std::array<double, 6> values(const Bary& l);
std::array<Vec2, 6> gradients(const Bary& l, const ElementGeometry& g);
std::array<double, 6> laplacians(const ElementGeometry& g);
Bary node(int i);
} // namespace p2

/// Taylor-Hood P2/P1 degrees of freedom on a conforming partition.
///
/// Scalar velocity nodes are the partition vertices (in Partition::vertices()
/// order) followed by the edge midpoints (in Partition::edges() order). The
/// velocity vector is blocked by component: dof = c * n_nodes() + node.
/// Pressure dofs are the vertices.
class DofMap {
public:
    explicit DofMap(Partition p);

    const Partition& partition() const { return partition_; }

    std::size_t n_nodes() const { return node_points_.size(); }
    std::size_t n_u() const { return 2 * n_nodes(); }
    std::size_t n_p() const { return partition_.vertices().size(); }

    const std::array<int, 6>& nodes(std::size_t leaf) const { return nodes_[leaf]; }
    const std::array<int, 3>& pressure_dofs(std::size_t leaf) const { return pressure_[leaf]; }
    int velocity_dof(int node, int component) const
    {
        return component * static_cast<int>(n_nodes()) + node;
    }

    bool boundary_node(int node) const { return boundary_node_[static_cast<std::size_t>(node)]; }
    /// Sorted velocity dofs whose node lies on the domain boundary.
    const std::vector<int>& boundary_velocity_dofs() const { return boundary_dofs_; }
    const Point& node_point(int node) const { return node_points_[static_cast<std::size_t>(node)]; }

    /// Set when the initial partition violates the sufficient condition for a
    /// uniformly stable Taylor-Hood pair (at least three triangles, each with
    /// a vertex inside the domain).
    const std::optional<std::string>& stability_warning() const { return warning_; }

private:
    Partition partition_;
    std::vector<std::array<int, 6>> nodes_;
    std::vector<std::array<int, 3>> pressure_;
    std::vector<Point> node_points_;
    std::vector<bool> boundary_node_;
    std::vector<int> boundary_dofs_;
    std::optional<std::string> warning_;
};

struct SolutionPair {
    std::shared_ptr<const DofMap> dofs;
    Eigen::VectorXd u;
    Eigen::VectorXd p;
    double residual = 0.0;   ///< infinity norm of the KKT residual
    double multiplier = 0.0; ///< Lagrange multiplier of the zero-mean constraint

    static SolutionPair zero(std::shared_ptr<const DofMap> dofs);
};

/// Restriction of a discrete pair to one leaf, evaluated by polynomial calculus.
struct LocalSolution {
    ElementGeometry geo;
    std::array<std::array<double, 6>, 2> u{};
    std::array<double, 3> p{};

    Vec2 velocity(const Bary& l) const;
    Mat2 velocity_gradient(const Bary& l) const;
    Vec2 velocity_laplacian() const;
    double divergence(const Bary& l) const { return velocity_gradient(l).trace(); }
    double pressure(const Bary& l) const { return p[0] * l[0] + p[1] * l[1] + p[2] * l[2]; }
    Vec2 pressure_gradient() const;
};

LocalSolution local_solution(const SolutionPair& s, std::size_t leaf);

/// Leaf whose closure contains q, or nullopt.
std::optional<std::size_t> locate(const Partition& p, const Point& q);

/// Mean value of the discrete pressure over the domain.
double pressure_mean(const SolutionPair& s);

/// Nodal interpolant of (u, p); the pressure is shifted to zero mean.
SolutionPair interpolate(const VectorFn& u, const ScalarFn& p, std::shared_ptr<const DofMap> dofs);

/// Exact embedding of a coarse discrete pair into the spaces of a refinement.
/// Throws InvalidArgument if `fine` does not refine the coarse partition.
SolutionPair prolong(const SolutionPair& coarse, std::shared_ptr<const DofMap> fine);

} // namespace afem
