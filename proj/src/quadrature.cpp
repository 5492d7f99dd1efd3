#include "afem/quadrature.hpp"

#include <cmath>

namespace afem {

namespace {

TriangleRule make_triangle_rule_6()
{
    TriangleRule r;
    r.degree = 6;
    auto orbit3 = [&](double w, double a) {
        const double b = 1.0 - 2.0 * a;
        r.points.push_back({b, a, a});
        r.points.push_back({a, b, a});
        r.points.push_back({a, a, b});
        r.weights.insert(r.weights.end(), 3, w);
    };
    auto orbit6 = [&](double w, double a, double b) {
        const double c = 1.0 - a - b;
        for (const Bary& p : {Bary{a, b, c}, Bary{a, c, b}, Bary{b, a, c}, Bary{b, c, a}, Bary{c, a, b},
                              Bary{c, b, a}}) {
            r.points.push_back(p);
            r.weights.push_back(w);
        }
    };
    orbit3(0.1167862757263791776138998, 0.2492867451709105372419936);
    orbit3(0.05084490637020675883432325, 0.06308901449150218577774582);
    orbit6(0.08285107561837369844255515, 0.05314504984481702576755232, 0.3103524510337842842202517);
    return r;
}

EdgeRule make_edge_rule_7()
{
    EdgeRule r;
    r.degree = 7;
    const double s = 2.0 / 7.0 * std::sqrt(6.0 / 5.0);
    const double inner = std::sqrt(3.0 / 7.0 - s);
    const double outer = std::sqrt(3.0 / 7.0 + s);
    const double w_inner = (18.0 + std::sqrt(30.0)) / 36.0;
    const double w_outer = (18.0 - std::sqrt(30.0)) / 36.0;
    for (auto [x, w] : {std::pair{-outer, w_outer}, std::pair{-inner, w_inner}, std::pair{inner, w_inner},
                        std::pair{outer, w_outer}}) {
        r.points.push_back(0.5 * (x + 1.0));
        r.weights.push_back(0.5 * w);
    }
    return r;
}

} // namespace

const TriangleRule& triangle_rule_6()
{
    static const TriangleRule rule = make_triangle_rule_6();
    return rule;
}

const EdgeRule& edge_rule_7()
{
    static const EdgeRule rule = make_edge_rule_7();
    return rule;
}

} // namespace afem
