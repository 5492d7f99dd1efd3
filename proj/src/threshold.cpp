#include "afem/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "afem/errors.hpp"
#include "afem/estimators.hpp"

namespace afem {

LocalIndicator oscillation_indicator(VectorFn f)
{
    LocalIndicator ind;
    ind.name = "osc";
    ind.subadditive = true;
    ind.evaluate = [f = std::move(f)](const Partition& p) { return oscillation(p, f); };
    return ind;
}

LocalIndicator parse_indicator(const std::string& text, const VectorFn& f)
{
    if (text == "osc") {
        if (!f)
            throw ConfigError("indicator 'osc' needs a load f");
        return oscillation_indicator(f);
    }
    const std::string prefix = "synthetic:";
    if (text.rfind(prefix, 0) != 0)
        throw ConfigError("unknown indicator '" + text + "' (expected osc or synthetic:<a>[@x,y])");
    std::string body = text.substr(prefix.size());
    std::optional<Point> at;
    double a = 0.0;
    try {
        const auto pos = body.find('@');
        if (pos != std::string::npos) {
            const std::string loc = body.substr(pos + 1);
            const auto comma = loc.find(',');
            if (comma == std::string::npos)
                throw ConfigError("synthetic indicator location must be x,y");
            at = Point(std::stod(loc.substr(0, comma)), std::stod(loc.substr(comma + 1)));
            body = body.substr(0, pos);
        }
        std::size_t used = 0;
        a = std::stod(body, &used);
        if (used != body.size())
            throw ConfigError("bad exponent in '" + text + "'");
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse indicator '" + text + "'");
    }
    if (!(a > 0.0))
        throw ConfigError("synthetic indicator exponent must be positive");

    LocalIndicator ind;
    ind.name = text;
    ind.subadditive = a >= 1.0;
    ind.evaluate = [a, at](const Partition& p) {
        std::vector<double> e(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (at) {
                const Bary l = ElementGeometry(p.corners(i)).barycentric(*at);
                if (l[0] < -1e-12 || l[1] < -1e-12 || l[2] < -1e-12)
                    continue;
            }
            e[i] = std::pow(p.area(i), a);
        }
        return e;
    };
    return ind;
}

int area_bucket(double area)
{
    int e = 0;
    std::frexp(area, &e); // area = m 2^e, m in [1/2, 1)
    return -e;
}

ThresholdReport greedy_threshold(const Partition& p0, const LocalIndicator& indicator, double eps, int max_generation)
{
    if (!(eps > 0.0))
        throw InvalidArgument("greedy_threshold: eps must be positive");
    ThresholdReport rep{eps, p0, 0, 0.0, 0.0, {}, {}, true, true};
    const Forest& forest = p0.forest();
    std::map<int, std::set<ElemId>> marked_by_bucket;

    Partition p = p0;
    for (;;) {
        const std::vector<double> e = indicator.evaluate(p);
        std::vector<ElemId> marked;
        std::size_t worst = p.size();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(e[i]) || e[i] < 0.0)
                throw InvalidArgument("greedy_threshold: indicator value must be finite and non-negative");
            if (e[i] > eps) {
                marked.push_back(p.leaf(i));
                if (forest.element(p.leaf(i)).generation >= max_generation && (worst == p.size() || e[i] > e[worst]))
                    worst = i;
            }
        }
        if (worst != p.size()) {
            char msg[256];
            std::snprintf(msg, sizeof msg, "threshold: generation cap %d reached; element %d still has e = %.6g > eps = %.6g",
                          max_generation, static_cast<int>(p.leaf(worst)), e[worst], eps);
            throw BudgetError(msg);
        }
        if (marked.empty()) {
            rep.sum_e = 0.0;
            rep.max_e = 0.0;
            for (double v : e) {
                rep.sum_e += v;
                rep.max_e = std::max(rep.max_e, v);
            }
            break;
        }
        rep.rounds.push_back(marked.size());
        for (ElemId id : marked)
            marked_by_bucket[area_bucket(forest.area(id))].insert(id);
        p = refine(p, marked);
    }

    rep.final_partition = p;
    rep.added = p.size() - p0.size();
    const double domain = forest.domain_area();
    for (const auto& [j, ids] : marked_by_bucket) {
        rep.buckets[j] = ids.size();
        if (static_cast<double>(ids.size()) > std::ldexp(domain, j + 1))
            rep.bucket_bound = false;
        for (ElemId id : ids)
            for (ElemId a = forest.element(id).parent; a != kNoElem; a = forest.element(a).parent)
                if (ids.count(a))
                    rep.buckets_disjoint = false;
    }
    return rep;
}

PredictedRate predicted_rate(double alpha, int n, double q)
{
    constexpr int d = 2;
    PredictedRate r;
    r.s = (alpha + 1.0) / n;
    r.delta = r.s + 0.5 - 1.0 / q;
    r.admissible = q > 0.0 && std::isfinite(q) && alpha > 0.0 && alpha / n >= 1.0 / q - 0.5 &&
                   alpha < d - 1 + std::max(0.0, 1.0 / q - 1.0);
    return r;
}

ClassSeminorm class_seminorm(std::span<const double> sizes, std::span<const double> values, double s)
{
    if (sizes.size() != values.size() || sizes.empty())
        throw InvalidArgument("class_seminorm: need matching, non-empty inputs");
    ClassSeminorm out;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] >= 1.0) || !(values[i] > 0.0))
            throw InvalidArgument("class_seminorm: sizes must be >= 1 and values positive");
        const double w = std::pow(sizes[i], s) * values[i];
        out.value = std::max(out.value, w);
        lx.push_back(std::log(sizes[i]));
        ly.push_back(std::log(w));
    }
    // slope of log(N^s value) over the second half of the points
    const std::size_t from = lx.size() >= 6 ? lx.size() / 2 : 0;
    if (lx.size() - from >= 2) {
        const double n = static_cast<double>(lx.size() - from);
        double mx = 0.0, my = 0.0;
        for (std::size_t i = from; i < lx.size(); ++i) {
            mx += lx[i] / n;
            my += ly[i] / n;
        }
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = from; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        out.growing = sxx > 0.0 && sxy / sxx > 0.05;
    }
    return out;
}

} // namespace afem
