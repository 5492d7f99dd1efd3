#include "afem/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>

#include "afem/errors.hpp"

namespace afem {

namespace {

// smooth-mms: u = curl psi, psi = x^2 (1-x)^2 y^2 (1-y)^2, written as
// u1 = 2 a(x) b(y), u2 = -2 b(x) a(y) with a(t) = t^2 (t-1)^2, b(t) = a'(t) / 2.
double mms_a(double t) { return t * t * (t - 1) * (t - 1); }
double mms_da(double t) { return 2 * t * (t - 1) * (2 * t - 1); }
double mms_b(double t) { return t * (t - 1) * (2 * t - 1); }
double mms_db(double t) { return 6 * t * t - 6 * t + 1; }

ProblemDef linear_patch()
{
    ProblemDef p;
    p.id = "linear-patch";
    p.domain = "unit-square";
    p.description = "u = (y, x), p = 0, f = 0, inhomogeneous Dirichlet data";
    p.initial_mesh = make_unit_square_cross;
    p.f = [](const Point&) { return Vec2(0.0, 0.0); };
    p.g = [](const Point& x) { return Vec2(x.y(), x.x()); };
    ExactSolution e;
    e.u = p.g;
    e.grad_u = [](const Point&) {
        Mat2 m;
        m << 0, 1, 1, 0;
        return m;
    };
    e.p = [](const Point&) { return 0.0; };
    p.exact = e;
    return p;
}

ProblemDef smooth_mms()
{
    ProblemDef p;
    p.id = "smooth-mms";
    p.domain = "unit-square";
    p.description = "u = curl(x^2(1-x)^2 y^2(1-y)^2), p = x^3 + y^3 - 1/2";
    p.initial_mesh = make_unit_square_cross;
    p.f = [](const Point& q) {
        const double x = q.x();
        const double y = q.y();
        const double f1 = 3 * x * x - 4 * (2 * y - 1) *
                                          (3 * std::pow(x, 4) - 6 * std::pow(x, 3) + 6 * x * x * y * y -
                                           6 * x * x * y + 3 * x * x - 6 * x * y * y + 6 * x * y + y * y - y);
        const double f2 = 3 * y * y + 4 * (2 * x - 1) *
                                          (6 * x * x * y * y - 6 * x * x * y + x * x - 6 * x * y * y + 6 * x * y -
                                           x + 3 * std::pow(y, 4) - 6 * std::pow(y, 3) + 3 * y * y);
        return Vec2(f1, f2);
    };
    ExactSolution e;
    e.u = [](const Point& q) {
        return Vec2(2 * mms_a(q.x()) * mms_b(q.y()), -2 * mms_b(q.x()) * mms_a(q.y()));
    };
    e.grad_u = [](const Point& q) {
        const double x = q.x();
        const double y = q.y();
        Mat2 m;
        m << 2 * mms_da(x) * mms_b(y), 2 * mms_a(x) * mms_db(y), -2 * mms_db(x) * mms_a(y), -2 * mms_b(x) * mms_da(y);
        return m;
    };
    e.p = [](const Point& q) { return std::pow(q.x(), 3) + std::pow(q.y(), 3) - 0.5; };
    p.exact = e;
    return p;
}

ProblemDef lshape_smoothf()
{
    ProblemDef p;
    p.id = "lshape-smoothf";
    p.domain = "l-shape";
    p.description = "f = (-y, x) on the L-shaped domain, homogeneous Dirichlet data, no exact solution";
    p.initial_mesh = make_lshape;
    // a constant load is a gradient and only moves the pressure; the rotational
    // part is what drives the velocity into the reentrant corner
    p.f = [](const Point& q) { return Vec2(-q.y(), q.x()); };
    return p;
}

ProblemDef lshape_constf()
{
    ProblemDef p;
    p.id = "lshape-constf";
    p.domain = "l-shape";
    p.description = "f = (1, 1) on the L-shaped domain: u = 0, p = x + y - mean";
    p.initial_mesh = make_lshape;
    p.f = [](const Point&) { return Vec2(1.0, 1.0); };
    ExactSolution e;
    e.u = [](const Point&) { return Vec2(0.0, 0.0); };
    e.grad_u = [](const Point&) { return Mat2::Zero().eval(); };
    // mean of x + y over the L-shape is -1/3
    e.p = [](const Point& q) { return q.x() + q.y() + 1.0 / 3.0; };
    p.exact = e;
    return p;
}

ProblemDef singular_f()
{
    ProblemDef p;
    p.id = "singular-f";
    p.domain = "unit-square";
    p.description = "f = |x - (1/2, 1/2)|^(-1/2) (1, 1), homogeneous Dirichlet data, no exact solution";
    p.initial_mesh = make_unit_square_cross;
    p.f = [](const Point& q) {
        const double r = (q - Point(0.5, 0.5)).norm();
        const double s = r > 0 ? 1.0 / std::sqrt(r) : 0.0;
        return Vec2(s, s);
    };
    return p;
}

} // namespace

double exact_solution_defect(const ProblemDef& problem, int samples, unsigned seed)
{
    if (!problem.exact)
        return 0.0;
    const ExactSolution& e = *problem.exact;
    constexpr double h = 1e-3;
    // fourth-order central differences
    auto d1 = [&](auto&& fn, const Point& x, int dir) {
        Point s = Point::Zero();
        s[dir] = h;
        using R = std::decay_t<decltype(fn(x))>;
        return R((-fn(x + 2 * s) + 8.0 * fn(x + s) - 8.0 * fn(x - s) + fn(x - 2 * s)) / (12 * h));
    };
    auto d2 = [&](auto&& fn, const Point& x, int dir) {
        Point s = Point::Zero();
        s[dir] = h;
        using R = std::decay_t<decltype(fn(x))>;
        return R((-fn(x + 2 * s) + 16.0 * fn(x + s) - 30.0 * fn(x) + 16.0 * fn(x - s) - fn(x - 2 * s)) / (12 * h * h));
    };

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    double worst = 0.0;
    for (int n = 0; n < samples; ++n) {
        Point x(unit(rng), unit(rng));
        if (problem.domain == "l-shape")
            x = Point(2 * x.x() - 1, 2 * x.y() - 1);
        const Vec2 lap = d2(e.u, x, 0) + d2(e.u, x, 1);
        const Vec2 grad_p(d1(e.p, x, 0), d1(e.p, x, 1));
        const Vec2 res = -lap + grad_p - problem.f(x);
        const Vec2 du_dx = d1(e.u, x, 0);
        const Vec2 du_dy = d1(e.u, x, 1);
        const double div = du_dx.x() + du_dy.y();
        Mat2 jac;
        jac << du_dx.x(), du_dy.x(), du_dx.y(), du_dy.y();
        worst = std::max({worst, res.cwiseAbs().maxCoeff(), std::abs(div), (jac - e.grad_u(x)).cwiseAbs().maxCoeff()});
    }
    return worst;
}

const std::vector<ProblemDef>& builtin_problems()
{
    static const std::vector<ProblemDef> registry = [] {
        std::vector<ProblemDef> r{linear_patch(), smooth_mms(), lshape_smoothf(), lshape_constf(), singular_f()};
        for (const ProblemDef& p : r) {
            const double d = exact_solution_defect(p);
            if (!(d <= 1e-8))
                throw std::logic_error("problem '" + p.id + "': exact solution defect " + std::to_string(d));
        }
        return r;
    }();
    return registry;
}

const ProblemDef& find_problem(const std::string& id)
{
    for (const ProblemDef& p : builtin_problems())
        if (p.id == id)
            return p;
    std::string known;
    for (const ProblemDef& p : builtin_problems())
        known += (known.empty() ? "" : ", ") + p.id;
    throw ConfigError("unknown problem '" + id + "' (known: " + known + ")");
}

} // namespace afem
