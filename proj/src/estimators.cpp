#include "afem/estimators.hpp"

#include <cmath>

#include "afem/errors.hpp"
#include "afem/parallel.hpp"

namespace afem {

std::string to_string(EstimatorKind kind)
{
    switch (kind) {
    case EstimatorKind::eta0: return "eta0";
    case EstimatorKind::eta1: return "eta1";
    case EstimatorKind::eta2: return "eta2";
    }
    return "?";
}

EstimatorKind parse_estimator(const std::string& name)
{
    if (name == "eta0") return EstimatorKind::eta0;
    if (name == "eta1") return EstimatorKind::eta1;
    if (name == "eta2") return EstimatorKind::eta2;
    throw ConfigError("unknown estimator '" + name + "' (expected eta0, eta1 or eta2)");
}

double ElementIndicators::total_osc() const
{
    double s = 0.0;
    for (double v : osc)
        s += v;
    return s;
}

namespace {

double element_oscillation(const ElementGeometry& geo, const VectorFn& f)
{
    const TriangleRule& q = triangle_rule_6();
    std::vector<Vec2> vals(q.points.size());
    Vec2 mean = Vec2::Zero();
    for (std::size_t i = 0; i < q.points.size(); ++i) {
        vals[i] = f(geo.point(q.points[i]));
        mean += q.weights[i] * vals[i];
    }
    double s = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i)
        s += q.weights[i] * (vals[i] - mean).squaredNorm();
    return geo.area * geo.area * s;
}

Bary edge_point(int k, double t)
{
    // edge opposite k runs from vertex k+1 to vertex k+2
    Bary l{0.0, 0.0, 0.0};
    l[static_cast<std::size_t>((k + 1) % 3)] = 1.0 - t;
    l[static_cast<std::size_t>((k + 2) % 3)] = t;
    return l;
}

} // namespace

double edge_jump(const LocalSolution& left, const LocalSolution& right, const Point& x0, const Point& x1)
{
    const Vec2 d = x1 - x0;
    const double len = d.norm();
    const Vec2 nu(d.y() / len, -d.x() / len);
    const EdgeRule& q = edge_rule_7();
    double s = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i) {
        const Point x = (1.0 - q.points[i]) * x0 + q.points[i] * x1;
        const Vec2 j = left.velocity_gradient(left.geo.barycentric(x)) * nu -
                       right.velocity_gradient(right.geo.barycentric(x)) * nu;
        s += q.weights[i] * j.squaredNorm();
    }
    return len * len * s;
}

ElementIndicators compute_indicators(const SolutionPair& sol, const VectorFn& f)
{
    const Partition& part = sol.dofs->partition();
    const Forest& forest = part.forest();
    const std::size_t n = part.size();
    ElementIndicators ind;
    ind.vol.assign(n, 0.0);
    ind.div_l2.assign(n, 0.0);
    ind.div_edge.assign(n, 0.0);
    ind.osc.assign(n, 0.0);
    ind.jump.assign(part.edges().size(), 0.0);

    const TriangleRule& tq = triangle_rule_6();
    const EdgeRule& eq = edge_rule_7();
    parallel_for(n, [&](std::size_t i) {
        const LocalSolution ls = local_solution(sol, i);
        const double area = ls.geo.area;
        const Vec2 lap_minus_grad = ls.velocity_laplacian() - ls.pressure_gradient();
        const Vec2 zero = Vec2::Zero();
        std::vector<Vec2> fv(tq.points.size());
        Vec2 mean = zero;
        double vol = 0.0;
        double div = 0.0;
        for (std::size_t k = 0; k < tq.points.size(); ++k) {
            fv[k] = f(ls.geo.point(tq.points[k]));
            mean += tq.weights[k] * fv[k];
            vol += tq.weights[k] * (fv[k] + lap_minus_grad).squaredNorm();
            const double dv = ls.divergence(tq.points[k]);
            div += tq.weights[k] * dv * dv;
        }
        double osc = 0.0;
        for (std::size_t k = 0; k < tq.points.size(); ++k)
            osc += tq.weights[k] * (fv[k] - mean).squaredNorm();

        double edge = 0.0;
        for (int e = 0; e < 3; ++e) {
            double s = 0.0;
            for (std::size_t k = 0; k < eq.points.size(); ++k) {
                const double dv = ls.divergence(edge_point(e, eq.points[k]));
                s += eq.weights[k] * dv * dv;
            }
            edge += ls.geo.edge_length(e) * s;
        }
        ind.vol[i] = area * area * vol;
        ind.div_l2[i] = area * div;
        ind.div_edge[i] = std::sqrt(area) * edge;
        ind.osc[i] = area * area * osc;
    });

    const auto edges = part.edges();
    parallel_for(edges.size(), [&](std::size_t e) {
        const MeshEdge& edge = edges[e];
        if (!edge.interior())
            return;
        const LocalSolution a = local_solution(sol, static_cast<std::size_t>(part.index_of(edge.elems[0])));
        const LocalSolution b = local_solution(sol, static_cast<std::size_t>(part.index_of(edge.elems[1])));
        ind.jump[e] = edge_jump(a, b, forest.vertex(edge.v[0]).point(), forest.vertex(edge.v[1]).point());
    });
    return ind;
}

std::vector<double> oscillation(const Partition& p, const VectorFn& f)
{
    std::vector<double> out(p.size(), 0.0);
    parallel_for(p.size(), [&](std::size_t i) { out[i] = element_oscillation(ElementGeometry(p.corners(i)), f); });
    return out;
}

namespace {

double element_term(EstimatorKind kind, const ElementIndicators& ind, std::size_t i)
{
    switch (kind) {
    case EstimatorKind::eta0: return ind.vol[i];
    case EstimatorKind::eta1: return ind.vol[i] + ind.div_l2[i];
    case EstimatorKind::eta2: return ind.vol[i] + ind.div_edge[i];
    }
    return 0.0;
}

} // namespace

double eta(EstimatorKind kind, const Partition& p, std::span<const std::size_t> subset, const ElementIndicators& ind)
{
    std::vector<char> in(p.size(), 0);
    double s = 0.0;
    for (std::size_t i : subset) {
        if (i >= p.size())
            throw InvalidArgument("eta: subset index out of range");
        if (in[i])
            continue;
        in[i] = 1;
        s += element_term(kind, ind, i);
    }
    const auto edges = p.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!edges[e].interior())
            continue;
        if (in[static_cast<std::size_t>(p.index_of(edges[e].elems[0]))] &&
            in[static_cast<std::size_t>(p.index_of(edges[e].elems[1]))])
            s += ind.jump[e];
    }
    return s;
}

double eta(EstimatorKind kind, const Partition& p, const ElementIndicators& ind)
{
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        s += element_term(kind, ind, i);
    for (double j : ind.jump)
        s += j;
    return s;
}

std::vector<double> marking_shares(EstimatorKind kind, const Partition& p, const ElementIndicators& ind)
{
    std::vector<double> shares(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        shares[i] = element_term(kind, ind, i);
    const auto edges = p.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!edges[e].interior())
            continue;
        for (int k = 0; k < 2; ++k)
            shares[static_cast<std::size_t>(p.index_of(edges[e].elems[static_cast<std::size_t>(k)]))] += ind.jump[e];
    }
    return shares;
}

} // namespace afem
