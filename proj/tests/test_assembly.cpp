#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "afem/assembly.hpp"
#include "afem/errors.hpp"
#include "afem/problems.hpp"

using namespace afem;

namespace {

std::shared_ptr<const DofMap> dofmap(const Partition& p)
{
    return std::make_shared<const DofMap>(p);
}

Vec2 zero_field(const Point&)
{
    return Vec2::Zero();
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937& rng)
{
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = d(rng);
    return v;
}

Eigen::VectorXd random_interior(const DofMap& d, std::mt19937& rng)
{
    Eigen::VectorXd v = random_vector(static_cast<Eigen::Index>(d.n_u()), rng);
    for (int b : d.boundary_velocity_dofs())
        v[b] = 0.0;
    return v;
}

} // namespace

TEST_CASE("assembled blocks")
{
    const auto d = dofmap(refine_uniform(make_lshape(), 2));
    const StokesSystem sys = assemble(d, zero_field);
    std::mt19937 rng(4);

    SUBCASE("zero data gives a zero right-hand side and zero solution")
    {
        CHECK(sys.load.lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(sys.kkt_rhs().lpNorm<Eigen::Infinity>() == 0.0);
        const SolutionPair s = solve(sys);
        CHECK(s.u.lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(s.p.lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("A is symmetric and positive on interior fields")
    {
        const SparseMatrix at = sys.A.transpose();
        CHECK((sys.A - at).norm() <= 1e-12 * sys.A.norm());
        for (int i = 0; i < 20; ++i) {
            const Eigen::VectorXd v = random_interior(*d, rng);
            const Eigen::VectorXd w = random_interior(*d, rng);
            CHECK(v.dot(sys.A * v) > 0.0);
            CHECK(std::abs(v.dot(sys.A * w) - w.dot(sys.A * v)) <= 1e-12 * (1.0 + std::abs(v.dot(sys.A * w))));
        }
    }
    SUBCASE("divergence theorem for interior fields")
    {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d->n_p()));
        for (int i = 0; i < 20; ++i) {
            const Eigen::VectorXd v = random_interior(*d, rng);
            // the pressure basis sums to one
            CHECK(std::abs(ones.dot(sys.B * v)) <= 1e-12 * (1.0 + v.norm()));
        }
        CHECK(sys.mean.sum() == doctest::Approx(3.0));
        CHECK(ones.dot(sys.M * ones) == doctest::Approx(3.0));
    }
    SUBCASE("KKT matrix is symmetric with the expected size")
    {
        const SparseMatrix k = sys.kkt_matrix();
        CHECK(k.rows() == static_cast<Eigen::Index>(sys.free_dofs.size() + d->n_p() + 1));
        const SparseMatrix kt = k.transpose();
        CHECK((k - kt).norm() == 0.0);
    }
}

TEST_CASE("quadratic form of a linear field")
{
    // v = (y, 0) has |grad v|^2 = 1, so a(v, v) is the domain area
    for (auto make : {make_unit_square_cross, make_lshape}) {
        const auto d = dofmap(refine_uniform(make(), 1));
        const StokesSystem sys = assemble(d, zero_field);
        const SolutionPair v = interpolate([](const Point& x) { return Vec2(x.y(), 0.0); },
                                           [](const Point&) { return 0.0; }, d);
        CHECK(v.u.dot(sys.A * v.u) == doctest::Approx(d->partition().forest().domain_area()).epsilon(1e-13));
    }
}

TEST_CASE("linear patch test")
{
    const ProblemDef& prob = find_problem("linear-patch");
    for (int sweeps : {0, 1, 3}) {
        const auto d = dofmap(refine_uniform(prob.initial_mesh(), sweeps));
        const SolutionPair s = solve(assemble(d, prob.f, prob.g));
        const ErrorNorms e = error_norms(s, *prob.exact);
        CHECK(e.u_h1 < 1e-9);
        CHECK(e.p_l2 < 1e-9);
        CHECK(s.residual <= 1e-9);
        CHECK(std::abs(s.multiplier) < 1e-9);
        for (std::size_t n = 0; n < d->n_nodes(); ++n) {
            const Point& x = d->node_point(static_cast<int>(n));
            CHECK(std::abs(s.u[d->velocity_dof(static_cast<int>(n), 0)] - x.y()) < 1e-9);
            CHECK(std::abs(s.u[d->velocity_dof(static_cast<int>(n), 1)] - x.x()) < 1e-9);
        }
    }
}

TEST_CASE("constant gradient load is reproduced exactly")
{
    const ProblemDef& prob = find_problem("lshape-constf");
    const auto d = dofmap(refine_uniform(prob.initial_mesh(), 2));
    const SolutionPair s = solve(assemble(d, prob.f));
    const ErrorNorms e = error_norms(s, *prob.exact);
    CHECK(e.u_h1 < 1e-10);
    CHECK(e.p_l2 < 1e-10);
}

TEST_CASE("solution invariants on the manufactured problem")
{
    const ProblemDef& prob = find_problem("smooth-mms");
    const auto d = dofmap(refine_uniform(prob.initial_mesh(), 4));
    const StokesSystem sys = assemble(d, prob.f);
    const SolutionPair s = solve(sys);
    CHECK(s.residual <= 1e-9 * (1.0 + sys.kkt_rhs().lpNorm<Eigen::Infinity>()));
    CHECK(std::abs(sys.mean.dot(s.p)) <= 1e-10 * s.p.norm());
    for (int b : d->boundary_velocity_dofs())
        CHECK(s.u[b] == 0.0);
    // discrete mass conservation: B u = 0 up to the multiplier column
    const Eigen::VectorXd bu = sys.B * s.u;
    CHECK((bu - s.multiplier * sys.mean).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(std::abs(s.multiplier) < 1e-10);
}

TEST_CASE("Galerkin orthogonality")
{
    const ProblemDef& prob = find_problem("smooth-mms");
    const ExactSolution& ex = *prob.exact;
    const auto d = dofmap(refine_uniform(prob.initial_mesh(), 6));
    const SolutionPair s = solve(assemble(d, prob.f));

    std::mt19937 rng(9);
    const TriangleRule& rule = triangle_rule_6();
    const Partition& part = d->partition();
    for (int trial = 0; trial < 10; ++trial) {
        SolutionPair t = SolutionPair::zero(d);
        t.u = random_interior(*d, rng);
        t.p = random_vector(static_cast<Eigen::Index>(d->n_p()), rng);
        // a(u - u_h, v) - b(v, p - p_h) - b(u - u_h, q)
        double r = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < part.size(); ++i) {
            const LocalSolution ls = local_solution(s, i);
            const LocalSolution lt = local_solution(t, i);
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                const Bary& l = rule.points[q];
                const double w = rule.weights[q] * ls.geo.area;
                const Point x = ls.geo.point(l);
                const Mat2 ge = ex.grad_u(x) - ls.velocity_gradient(l);
                const Mat2 gv = lt.velocity_gradient(l);
                const double pe = ex.p(x) - ls.pressure(l);
                r += w * ((ge.array() * gv.array()).sum() - gv.trace() * pe - ge.trace() * lt.pressure(l));
                scale += w * gv.squaredNorm();
            }
        }
        CAPTURE(r);
        CHECK(std::abs(r) <= 1e-7 * std::sqrt(scale));
    }
}

TEST_CASE("error norms")
{
    const ProblemDef& prob = find_problem("smooth-mms");
    const ExactSolution& ex = *prob.exact;

    SUBCASE("self comparison of an interpolant")
    {
        // the interpolant of a P2/P1 pair is the pair itself
        const auto d = dofmap(refine_uniform(make_unit_square_cross(), 2));
        ExactSolution poly;
        poly.u = [](const Point& x) { return Vec2(x.x() * x.y() - x.y(), 0.5 * x.x() * x.x()); };
        poly.grad_u = [](const Point& x) {
            Mat2 g;
            g << x.y(), x.x() - 1.0, x.x(), 0.0;
            return g;
        };
        poly.p = [](const Point& x) { return 3.0 * x.x() + x.y(); };
        const SolutionPair s = interpolate(poly.u, poly.p, d);
        const ErrorNorms e = error_norms(s, poly);
        CHECK(e.u_h1 < 1e-10);
        CHECK(e.p_l2 < 1e-10);
    }
    SUBCASE("zero against zero")
    {
        const auto d = dofmap(make_unit_square_cross());
        ExactSolution zero{zero_field, [](const Point&) { return Mat2(Mat2::Zero()); }, [](const Point&) { return 0.0; }};
        const ErrorNorms e = error_norms(SolutionPair::zero(d), zero);
        CHECK(e.u_h1 == 0.0);
        CHECK(e.p_l2 == 0.0);
    }
    SUBCASE("second order convergence under uniform refinement")
    {
        std::vector<double> eu;
        for (int level = 1; level <= 4; ++level) {
            const auto d = dofmap(refine_uniform(prob.initial_mesh(), 2 * level));
            const SolutionPair s = solve(assemble(d, prob.f));
            const ErrorNorms e = error_norms(s, ex);
            eu.push_back(e.u_h1);
            // a priori: total error within a fixed factor of the interpolation error
            const ErrorNorms ei = error_norms(interpolate(ex.u, ex.p, d), ex);
            CHECK(e.u_h1 + e.p_l2 <= 10.0 * (ei.u_h1 + ei.p_l2));
        }
        for (std::size_t i = 1; i < eu.size(); ++i) {
            CAPTURE(eu[i - 1] / eu[i]);
            CHECK(eu[i - 1] / eu[i] == doctest::Approx(4.0).epsilon(0.15));
        }
    }
}

TEST_CASE("solver failure on the two-triangle square")
{
    // two free velocity dofs cannot control a three-dimensional zero-mean pressure space
    const auto d = dofmap(make_unit_square_two());
    const StokesSystem sys = assemble(d, [](const Point& x) { return Vec2(x.y(), -x.x()); });
    CHECK_THROWS_AS(solve(sys), SolverError);
    CHECK(inf_sup_constant(sys) < 1e-6);
}

TEST_CASE("discrete inf-sup constant")
{
    Partition p = make_unit_square_cross();
    std::vector<double> beta;
    for (int level = 0; level < 4; ++level) {
        const auto d = dofmap(p);
        beta.push_back(inf_sup_constant(assemble(d, zero_field)));
        CHECK(beta.back() > 0.05);
        p = refine_uniform(p, 2);
    }
    const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
    CHECK(*hi / *lo < 1.5);

    const auto big = dofmap(p);
    REQUIRE(big->n_u() + big->n_p() > 4000);
    CHECK_THROWS_AS(inf_sup_constant(assemble(big, zero_field)), InvalidArgument);
}

TEST_CASE("system dump")
{
    const auto d = dofmap(make_unit_square_cross());
    const StokesSystem sys = assemble(d, [](const Point&) { return Vec2(1.0, 0.0); });
    const auto path = (std::filesystem::temp_directory_path() / "afem_dump_test.txt").string();
    dump_system(sys, path);
    std::ifstream in(path);
    std::size_t lines = 0;
    long r = 0, c = 0;
    double v = 0.0;
    while (in >> r >> c >> v)
        ++lines;
    CHECK(lines == static_cast<std::size_t>(sys.kkt_matrix().nonZeros()));
    std::remove(path.c_str());
}
