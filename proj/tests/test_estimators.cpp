#include <doctest.h>

#include <numeric>
#include <random>

#include "afem/assembly.hpp"
#include "afem/errors.hpp"
#include "afem/estimators.hpp"
#include "afem/problems.hpp"

using namespace afem;

namespace {

struct Solved {
    SolutionPair sol;
    ElementIndicators ind;
};

Solved solve_on(const ProblemDef& prob, const Partition& p)
{
    auto d = std::make_shared<const DofMap>(p);
    SolutionPair s = solve(assemble(d, prob.f, prob.g));
    ElementIndicators ind = compute_indicators(s, prob.f);
    return {std::move(s), std::move(ind)};
}

std::vector<std::size_t> random_subset(std::size_t n, std::mt19937& rng)
{
    std::bernoulli_distribution keep(0.4);
    std::vector<std::size_t> q;
    for (std::size_t i = 0; i < n; ++i)
        if (keep(rng))
            q.push_back(i);
    return q;
}

std::vector<std::size_t> all_of(std::size_t n)
{
    std::vector<std::size_t> q(n);
    std::iota(q.begin(), q.end(), std::size_t{0});
    return q;
}

constexpr EstimatorKind kKinds[] = {EstimatorKind::eta0, EstimatorKind::eta1, EstimatorKind::eta2};

} // namespace

TEST_CASE("estimator names")
{
    for (EstimatorKind k : kKinds)
        CHECK(parse_estimator(to_string(k)) == k);
    CHECK_THROWS_AS(parse_estimator("eta3"), ConfigError);
}

TEST_CASE("zero data gives zero indicators")
{
    const auto d = std::make_shared<const DofMap>(refine_uniform(make_lshape(), 1));
    const VectorFn f = [](const Point&) { return Vec2(0, 0); };
    const ElementIndicators ind = compute_indicators(solve(assemble(d, f)), f);
    for (const auto* v : {&ind.vol, &ind.div_l2, &ind.div_edge, &ind.osc, &ind.jump})
        for (double x : *v)
            CHECK(x == 0.0);
    for (EstimatorKind k : kKinds)
        CHECK(eta(k, d->partition(), ind) == 0.0);
}

TEST_CASE("constant load has no oscillation")
{
    const Partition p = refine_uniform(make_unit_square_cross(), 3);
    for (double v : oscillation(p, [](const Point&) { return Vec2(2.0, -1.0); }))
        CHECK(std::abs(v) < 1e-28);
    // for a linear load the element mean is the centroid value
    const auto osc = oscillation(p, [](const Point& x) { return Vec2(x.x(), 0.0); });
    for (std::size_t i = 0; i < p.size(); ++i) {
        const ElementGeometry g(p.corners(i));
        double exact = 0.0;
        const Point c = (g.x[0] + g.x[1] + g.x[2]) / 3.0;
        for (std::size_t q = 0; q < triangle_rule_6().points.size(); ++q) {
            const Point x = g.point(triangle_rule_6().points[q]);
            exact += triangle_rule_6().weights[q] * g.area * (x.x() - c.x()) * (x.x() - c.x());
        }
        CHECK(osc[i] == doctest::Approx(g.area * exact).epsilon(1e-12));
    }
}

TEST_CASE("indicator relations on the manufactured problem")
{
    const ProblemDef& prob = find_problem("smooth-mms");
    Partition p = prob.initial_mesh();
    std::mt19937 rng(17);
    for (int step = 0; step < 5; ++step) {
        p = refine_uniform(p, 1);
        const Solved s = solve_on(prob, p);
        const ElementIndicators& ind = s.ind;
        for (const auto* v : {&ind.vol, &ind.div_l2, &ind.div_edge, &ind.osc, &ind.jump})
            for (double x : *v)
                CHECK(x >= 0.0);
        for (std::size_t e = 0; e < p.edges().size(); ++e)
            if (!p.edges()[e].interior())
                CHECK(ind.jump[e] == 0.0);

        const double e0 = eta(EstimatorKind::eta0, p, ind);
        const double e1 = eta(EstimatorKind::eta1, p, ind);
        const double e2 = eta(EstimatorKind::eta2, p, ind);
        CHECK(ind.total_osc() <= e0);
        CHECK(e0 <= e1);
        CHECK(e0 <= e2);
        const auto all = all_of(p.size());
        CHECK(eta(EstimatorKind::eta1, p, all, ind) == doctest::Approx(e1).epsilon(1e-14));

        // local equivalence of eta1 and eta2 on subsets
        double lo = 1e300, hi = 0.0;
        for (int t = 0; t < 20; ++t) {
            const auto q = random_subset(p.size(), rng);
            if (q.empty())
                continue;
            const double r = eta(EstimatorKind::eta2, p, q, ind) / eta(EstimatorKind::eta1, p, q, ind);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        CHECK(lo > 0.1);
        CHECK(hi < 10.0);
    }
}

TEST_CASE("subset estimators")
{
    const ProblemDef& prob = find_problem("lshape-smoothf");
    const Partition p1 = refine_uniform(prob.initial_mesh(), 1);
    const ElemId marked[] = {p1.leaf(0), p1.leaf(4)};
    const Partition p = refine(p1, marked);
    const Solved s = solve_on(prob, p);
    std::mt19937 rng(23);

    for (EstimatorKind k : kKinds) {
        CHECK(eta(k, p, std::span<const std::size_t>{}, s.ind) == 0.0);

        const auto shares = marking_shares(k, p, s.ind);
        double jumps = 0.0;
        for (double j : s.ind.jump)
            jumps += j;
        const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
        CHECK(total == doctest::Approx(eta(k, p, s.ind) + jumps).epsilon(1e-12));

        for (int t = 0; t < 50; ++t) {
            auto q = random_subset(p.size(), rng);
            const double eq = eta(k, p, q, s.ind);
            double sq = 0.0;
            for (std::size_t i : q)
                sq += shares[i];
            CHECK(sq >= eq * (1.0 - 1e-14));
            CHECK(eq <= eta(k, p, s.ind) * (1.0 + 1e-14));
            // adding elements never decreases the estimator
            auto bigger = q;
            const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
            if (std::find(bigger.begin(), bigger.end(), extra) == bigger.end()) {
                bigger.push_back(extra);
                std::sort(bigger.begin(), bigger.end());
            }
            CHECK(eta(k, p, bigger, s.ind) >= eq);
        }
    }

    const std::size_t bad[] = {p.size()};
    CHECK_THROWS_AS(eta(EstimatorKind::eta0, p, bad, s.ind), InvalidArgument);
}

TEST_CASE("jump terms only count inside the subset")
{
    // two triangles, only the shared diagonal carries a jump
    const Partition p = make_unit_square_two();
    ElementIndicators ind;
    ind.vol = {0.0, 0.0};
    ind.div_l2 = {0.0, 0.0};
    ind.div_edge = {0.0, 0.0};
    ind.osc = {0.0, 0.0};
    ind.jump.assign(p.edges().size(), 0.0);
    std::size_t diagonal = p.edges().size();
    for (std::size_t e = 0; e < p.edges().size(); ++e)
        if (p.edges()[e].interior())
            diagonal = e;
    REQUIRE(diagonal < p.edges().size());
    ind.jump[diagonal] = 0.25;

    const std::size_t one[] = {0};
    const std::size_t both[] = {0, 1};
    CHECK(eta(EstimatorKind::eta0, p, one, ind) == 0.0);
    CHECK(eta(EstimatorKind::eta0, p, both, ind) == 0.25);
    const auto shares = marking_shares(EstimatorKind::eta0, p, ind);
    CHECK(shares[0] == 0.25);
    CHECK(shares[1] == 0.25);
}

TEST_CASE("normal derivative jump")
{
    const auto d = std::make_shared<const DofMap>(make_unit_square_two());
    const SolutionPair quad =
        interpolate([](const Point& x) { return Vec2(x.x() * x.x(), 0.0); }, [](const Point&) { return 0.0; }, d);
    const SolutionPair zero = SolutionPair::zero(d);
    const Point a(0, 0), b(1, 1);

    // (x^2, 0) against 0 across the diagonal: |e| * int_e 2 x^2 ds = sqrt2 * sqrt2 * 2/3
    const LocalSolution l = local_solution(quad, 0);
    const LocalSolution r = local_solution(zero, 1);
    CHECK(edge_jump(l, r, a, b) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(edge_jump(r, l, b, a) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));

    // a globally smooth quadratic has no jump
    const LocalSolution r2 = local_solution(quad, 1);
    CHECK(std::abs(edge_jump(l, r2, a, b)) < 1e-26);

    // orientation independence for a random pair
    std::mt19937 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    SolutionPair rnd = SolutionPair::zero(d);
    for (Eigen::Index i = 0; i < rnd.u.size(); ++i)
        rnd.u[i] = n(rng);
    const LocalSolution x = local_solution(rnd, 0);
    const LocalSolution y = local_solution(rnd, 1);
    const double j = edge_jump(x, y, a, b);
    CHECK(j > 0.0);
    CHECK(edge_jump(y, x, b, a) == doctest::Approx(j).epsilon(1e-14));
    CHECK(edge_jump(y, x, a, b) == doctest::Approx(j).epsilon(1e-14));
}
