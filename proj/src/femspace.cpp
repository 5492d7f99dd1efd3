#include "afem/femspace.hpp"

#include <cmath>
#include <set>

#include "afem/errors.hpp"

namespace afem {

ElementGeometry::ElementGeometry(const std::array<Point, 3>& corners) : x(corners)
{
    const Vec2 e1 = x[1] - x[0];
    const Vec2 e2 = x[2] - x[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    area = 0.5 * det;
    // grad lambda_i = rot(x_{i+2} - x_{i+1}) / det, rot(a) = (a_y, -a_x) rotated
    for (int i = 0; i < 3; ++i) {
        const Vec2 e = x[static_cast<std::size_t>((i + 2) % 3)] - x[static_cast<std::size_t>((i + 1) % 3)];
        grad_lambda[static_cast<std::size_t>(i)] = Vec2(-e.y(), e.x()) / det;
    }
}

Bary ElementGeometry::barycentric(const Point& q) const
{
    const Vec2 d = q - x[0];
    const double l1 = grad_lambda[1].dot(d);
    const double l2 = grad_lambda[2].dot(d);
    return {1.0 - l1 - l2, l1, l2};
}

double ElementGeometry::edge_length(int k) const
{
    return (x[static_cast<std::size_t>((k + 2) % 3)] - x[static_cast<std::size_t>((k + 1) % 3)]).norm();
}

Vec2 ElementGeometry::outward_normal(int k) const
{
    return -grad_lambda[static_cast<std::size_t>(k)].normalized();
}

namespace p2 {

std::array<double, 6> values(const Bary& l)
{
    return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
            4 * l[1] * l[2],       4 * l[2] * l[0],       4 * l[0] * l[1]};
}

std::array<Vec2, 6> gradients(const Bary& l, const ElementGeometry& g)
{
    const auto& d = g.grad_lambda;
    return {(4 * l[0] - 1) * d[0],
            (4 * l[1] - 1) * d[1],
            (4 * l[2] - 1) * d[2],
            4 * (l[1] * d[2] + l[2] * d[1]),
            4 * (l[2] * d[0] + l[0] * d[2]),
            4 * (l[0] * d[1] + l[1] * d[0])};
}

std::array<double, 6> laplacians(const ElementGeometry& g)
{
    const auto& d = g.grad_lambda;
    return {4 * d[0].squaredNorm(), 4 * d[1].squaredNorm(), 4 * d[2].squaredNorm(),
            8 * d[1].dot(d[2]),     8 * d[2].dot(d[0]),     8 * d[0].dot(d[1])};
}

Bary node(int i)
{
    static constexpr std::array<Bary, 6> nodes{
        Bary{1, 0, 0}, Bary{0, 1, 0}, Bary{0, 0, 1}, Bary{0, 0.5, 0.5}, Bary{0.5, 0, 0.5}, Bary{0.5, 0.5, 0}};
    return nodes[static_cast<std::size_t>(i)];
}

} // namespace p2

// ---------------------------------------------------------------------------

DofMap::DofMap(Partition p) : partition_(std::move(p))
{
    if (!partition_.is_conforming())
        throw InvalidArgument("DofMap: partition is not conforming");
    const Forest& f = partition_.forest();
    const std::size_t nv = partition_.vertices().size();
    const std::size_t ne = partition_.edges().size();

    node_points_.resize(nv + ne);
    boundary_node_.assign(nv + ne, false);
    for (std::size_t i = 0; i < nv; ++i)
        node_points_[i] = f.vertex(partition_.vertices()[i]).point();
    for (std::size_t e = 0; e < ne; ++e) {
        const MeshEdge& edge = partition_.edges()[e];
        node_points_[nv + e] = 0.5 * (f.vertex(edge.v[0]).point() + f.vertex(edge.v[1]).point());
        if (edge.boundary) {
            boundary_node_[nv + e] = true;
            boundary_node_[static_cast<std::size_t>(partition_.local_vertex(edge.v[0]))] = true;
            boundary_node_[static_cast<std::size_t>(partition_.local_vertex(edge.v[1]))] = true;
        }
    }

    nodes_.resize(partition_.size());
    pressure_.resize(partition_.size());
    for (std::size_t i = 0; i < partition_.size(); ++i) {
        const Triangle& t = f.element(partition_.leaf(i));
        const auto& edges = partition_.element_edges(i);
        for (int k = 0; k < 3; ++k) {
            const int v = partition_.local_vertex(t.v[static_cast<std::size_t>(k)]);
            nodes_[i][static_cast<std::size_t>(k)] = v;
            pressure_[i][static_cast<std::size_t>(k)] = v;
            nodes_[i][static_cast<std::size_t>(3 + k)] = static_cast<int>(nv) + edges[static_cast<std::size_t>(k)];
        }
    }

    for (int c = 0; c < 2; ++c)
        for (std::size_t n = 0; n < n_nodes(); ++n)
            if (boundary_node_[n])
                boundary_dofs_.push_back(velocity_dof(static_cast<int>(n), c));

    // Sufficient stability condition on the initial partition.
    const std::size_t n0 = f.num_roots();
    std::set<VertexId> root_boundary;
    for (std::size_t r = 0; r < n0; ++r) {
        const Triangle& t = f.element(static_cast<ElemId>(r));
        for (int k = 0; k < 3; ++k)
            if (t.on_boundary[static_cast<std::size_t>(k)]) {
                root_boundary.insert(t.v[static_cast<std::size_t>((k + 1) % 3)]);
                root_boundary.insert(t.v[static_cast<std::size_t>((k + 2) % 3)]);
            }
    }
    bool all_have_interior_vertex = true;
    for (std::size_t r = 0; r < n0; ++r) {
        const Triangle& t = f.element(static_cast<ElemId>(r));
        if (root_boundary.count(t.v[0]) && root_boundary.count(t.v[1]) && root_boundary.count(t.v[2]))
            all_have_interior_vertex = false;
    }
    if (n0 < 3 || !all_have_interior_vertex)
        warning_ = "initial partition needs at least three triangles, each with a vertex inside the domain; "
                   "the Taylor-Hood pair may not be stable";
}

SolutionPair SolutionPair::zero(std::shared_ptr<const DofMap> dofs)
{
    SolutionPair s;
    s.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dofs->n_u()));
    s.p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dofs->n_p()));
    s.dofs = std::move(dofs);
    return s;
}

// ---------------------------------------------------------------------------

Vec2 LocalSolution::velocity(const Bary& l) const
{
    const auto phi = p2::values(l);
    Vec2 out = Vec2::Zero();
    for (int i = 0; i < 6; ++i)
        out += Vec2(u[0][static_cast<std::size_t>(i)], u[1][static_cast<std::size_t>(i)]) *
               phi[static_cast<std::size_t>(i)];
    return out;
}

Mat2 LocalSolution::velocity_gradient(const Bary& l) const
{
    const auto dphi = p2::gradients(l, geo);
    Mat2 out = Mat2::Zero();
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 6; ++i)
            out.row(c) += u[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] *
                          dphi[static_cast<std::size_t>(i)].transpose();
    return out;
}

Vec2 LocalSolution::velocity_laplacian() const
{
    const auto lap = p2::laplacians(geo);
    Vec2 out = Vec2::Zero();
    for (int i = 0; i < 6; ++i)
        out += Vec2(u[0][static_cast<std::size_t>(i)], u[1][static_cast<std::size_t>(i)]) *
               lap[static_cast<std::size_t>(i)];
    return out;
}

Vec2 LocalSolution::pressure_gradient() const
{
    return p[0] * geo.grad_lambda[0] + p[1] * geo.grad_lambda[1] + p[2] * geo.grad_lambda[2];
}

LocalSolution local_solution(const SolutionPair& s, std::size_t leaf)
{
    const DofMap& d = *s.dofs;
    LocalSolution out{ElementGeometry(d.partition().corners(leaf))};
    const auto& nodes = d.nodes(leaf);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 6; ++i)
            out.u[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] =
                s.u[d.velocity_dof(nodes[static_cast<std::size_t>(i)], c)];
    const auto& pd = d.pressure_dofs(leaf);
    for (int i = 0; i < 3; ++i)
        out.p[static_cast<std::size_t>(i)] = s.p[pd[static_cast<std::size_t>(i)]];
    return out;
}

std::optional<std::size_t> locate(const Partition& p, const Point& q)
{
    constexpr double tol = 1e-12;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Bary l = ElementGeometry(p.corners(i)).barycentric(q);
        if (l[0] >= -tol && l[1] >= -tol && l[2] >= -tol)
            return i;
    }
    return std::nullopt;
}

double pressure_mean(const SolutionPair& s)
{
    const DofMap& d = *s.dofs;
    double integral = 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i < d.partition().size(); ++i) {
        const double a = d.partition().area(i);
        const auto& pd = d.pressure_dofs(i);
        integral += a / 3.0 * (s.p[pd[0]] + s.p[pd[1]] + s.p[pd[2]]);
        area += a;
    }
    return integral / area;
}

SolutionPair interpolate(const VectorFn& u, const ScalarFn& p, std::shared_ptr<const DofMap> dofs)
{
    SolutionPair s = SolutionPair::zero(dofs);
    for (std::size_t n = 0; n < dofs->n_nodes(); ++n) {
        const Vec2 val = u(dofs->node_point(static_cast<int>(n)));
        s.u[dofs->velocity_dof(static_cast<int>(n), 0)] = val.x();
        s.u[dofs->velocity_dof(static_cast<int>(n), 1)] = val.y();
    }
    for (std::size_t v = 0; v < dofs->n_p(); ++v)
        s.p[static_cast<Eigen::Index>(v)] = p(dofs->node_point(static_cast<int>(v)));
    s.p.array() -= pressure_mean(s);
    return s;
}

SolutionPair prolong(const SolutionPair& coarse, std::shared_ptr<const DofMap> fine)
{
    const Partition& cp = coarse.dofs->partition();
    const Partition& fp = fine->partition();
    if (cp.forest_ptr() != fp.forest_ptr())
        throw InvalidArgument("prolong: partitions belong to different forests");
    const Forest& f = fp.forest();

    SolutionPair out = SolutionPair::zero(fine);
    for (std::size_t i = 0; i < fp.size(); ++i) {
        ElemId a = fp.leaf(i);
        int ci = cp.index_of(a);
        while (ci < 0) {
            a = f.element(a).parent;
            if (a == kNoElem)
                throw InvalidArgument("prolong: target partition does not refine the source partition");
            ci = cp.index_of(a);
        }
        const LocalSolution ls = local_solution(coarse, static_cast<std::size_t>(ci));
        const auto& nodes = fine->nodes(i);
        for (int k = 0; k < 6; ++k) {
            const int n = nodes[static_cast<std::size_t>(k)];
            const Bary l = ls.geo.barycentric(fine->node_point(n));
            const Vec2 val = ls.velocity(l);
            out.u[fine->velocity_dof(n, 0)] = val.x();
            out.u[fine->velocity_dof(n, 1)] = val.y();
            if (k < 3)
                out.p[n] = ls.pressure(l);
        }
    }
    return out;
}

} // namespace afem
