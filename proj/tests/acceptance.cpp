// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "afem/adapt.hpp"
#include "afem/assembly.hpp"
#include "afem/threshold.hpp"

using namespace afem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail)
{
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Run {
    std::string label;
    const ProblemDef* problem;
    AdaptiveTrace trace;
    MonitorReport mon;
    double seconds;
};

Run make_run(const std::string& label, const ProblemDef& prob, const AdaptiveConfig& cfg, int levels = -1)
{
    const auto t0 = std::chrono::steady_clock::now();
    AdaptiveTrace t = levels >= 0 ? uniform_run(cfg, prob, levels) : adaptive_run(cfg, prob);
    MonitorReport m = monitor(t, prob);
    const double s = seconds_since(t0);
    std::printf("  run %-28s %3zu iterations, %7zu dofs, %.1f s\n", label.c_str(), t.rows.size(), t.rows.back().n_u + t.rows.back().n_p, s);
    return {label, &prob, std::move(t), std::move(m), s};
}

RateFit fit_column(const AdaptiveTrace& t, const std::function<double(const TraceRow&)>& col)
{
    std::vector<double> xs, ys;
    for (const TraceRow& r : t.rows)
        if (r.N > 0) {
            xs.push_back(static_cast<double>(r.N));
            ys.push_back(col(r));
        }
    return fit_rate(xs, ys);
}

Partition random_refinement(const Partition& p0, std::mt19937& rng, int steps)
{
    Partition p = p0;
    for (int s = 0; s < steps; ++s) {
        std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
        std::vector<ElemId> marked;
        const std::size_t count = 1 + pick(rng) % 4;
        for (std::size_t i = 0; i < count; ++i)
            marked.push_back(p.leaf(pick(rng)));
        p = refine(p, marked);
    }
    return p;
}

std::size_t brute_force_minimum(const std::vector<double>& shares, double theta)
{
    const std::size_t n = shares.size();
    double total = 0.0;
    for (double s : shares)
        total += s;
    std::size_t best = n + 1;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                sum += shares[i];
                ++count;
            }
        if (sum >= theta * total)
            best = std::min(best, count);
    }
    return best;
}

} // namespace

int main()
{
    const auto start = std::chrono::steady_clock::now();
    std::vector<Run> runs;

    // 1. patch test
    {
        const ProblemDef& prob = find_problem("linear-patch");
        const auto t0 = std::chrono::steady_clock::now();
        const AdaptiveTrace t = uniform_run(AdaptiveConfig{}, prob, 2);
        const double secs = seconds_since(t0);
        double worst = 0.0;
        for (const TraceRow& r : t.rows)
            worst = std::max(worst, r.total_err);
        report(1, t.rows.size() == 3 && worst <= 1e-9 && secs < 1.0, "patch test",
               "levels 0..2, max total error " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s");
    }

    // 2. a priori rates
    {
        const ProblemDef& prob = find_problem("smooth-mms");
        Run r = make_run("smooth-mms uniform", prob, AdaptiveConfig{}, 5);
        const RateFit fu = fit_column(r.trace, [](const TraceRow& x) { return x.err_u; });
        const RateFit fp = fit_column(r.trace, [](const TraceRow& x) { return x.err_p; });
        const bool ok = r.trace.rows.size() == 6 && fu.s >= 0.85 && fu.s <= 1.15 && fp.s >= 0.8 && fp.s <= 1.2 &&
                        fu.r2 >= 0.98 && fp.r2 >= 0.98 && r.seconds < 120.0;
        report(2, ok, "a priori rates",
               "velocity s = " + fmt("%.4f", fu.s) + " (r2 " + fmt("%.5f", fu.r2) + "), pressure s = " +
                   fmt("%.4f", fp.s) + " (r2 " + fmt("%.5f", fp.r2) + "), " + fmt("%.1f", r.seconds) + " s");
        runs.push_back(std::move(r));
    }

    // adaptive runs shared by several criteria
    const ProblemDef& mms = find_problem("smooth-mms");
    const ProblemDef& lshape = find_problem("lshape-smoothf");
    std::size_t mms_eta1 = 0;
    for (EstimatorKind k : {EstimatorKind::eta0, EstimatorKind::eta1, EstimatorKind::eta2}) {
        AdaptiveConfig cfg;
        cfg.estimator = k;
        cfg.max_dofs = 60000;
        cfg.keep_solutions = k == EstimatorKind::eta1;
        if (k == EstimatorKind::eta1)
            mms_eta1 = runs.size();
        runs.push_back(make_run("smooth-mms adaptive " + to_string(k), mms, cfg));
    }
    std::size_t lshape_adaptive = runs.size();
    {
        AdaptiveConfig cfg;
        cfg.max_dofs = 100000;
        runs.push_back(make_run("lshape-smoothf adaptive", lshape, cfg));
        AdaptiveConfig ucfg;
        ucfg.max_dofs = 100000;
        ucfg.keep_solutions = false;
        runs.push_back(make_run("lshape-smoothf uniform", lshape, ucfg, 12));
    }
    {
        AdaptiveConfig cfg;
        cfg.max_dofs = 60000;
        runs.push_back(make_run("singular-f adaptive", find_problem("singular-f"), cfg));
    }

    // 3. estimator inequalities on every iteration of every run
    {
        std::size_t rows = 0, bad = 0;
        for (const Run& r : runs)
            for (const TraceRow& x : r.trace.rows) {
                ++rows;
                if (!(x.osc <= x.eta0 && x.eta0 <= x.eta1 && x.eta0 <= x.eta2))
                    ++bad;
            }
        report(3, bad == 0 && rows > 0, "estimator inequalities",
               std::to_string(rows) + " iterations over " + std::to_string(runs.size()) + " runs, " +
                   std::to_string(bad) + " violations");
    }

    // 4. efficiency index
    {
        const Run& r = runs[mms_eta1];
        const double ratio = r.mon.efficiency_max / r.mon.efficiency_min;
        report(4, r.trace.rows.size() >= 8 && ratio <= 5.0, "global equivalence",
               "efficiency index in [" + fmt("%.4f", r.mon.efficiency_min) + ", " + fmt("%.4f", r.mon.efficiency_max) +
                   "], ratio " + fmt("%.3f", ratio) + " over " + std::to_string(r.trace.rows.size() - 2) +
                   " iterations");
    }

    // 5. local equivalence of eta1 and eta2 on random subsets
    {
        const Run& r = runs[lshape_adaptive];
        std::mt19937 rng(2024);
        double alpha = 1e300, beta = 0.0;
        const std::size_t n = r.trace.solutions.size();
        const std::size_t picks[] = {n / 4, n / 2, n - 1};
        for (std::size_t k : picks) {
            const SolutionPair& sol = r.trace.solutions[k];
            const Partition& p = sol.dofs->partition();
            const ElementIndicators ind = compute_indicators(sol, lshape.f);
            std::bernoulli_distribution keep(0.3);
            for (int t = 0; t < 20; ++t) {
                std::vector<std::size_t> q;
                for (std::size_t i = 0; i < p.size(); ++i)
                    if (keep(rng))
                        q.push_back(i);
                if (q.empty())
                    q.push_back(0);
                const double ratio = std::sqrt(eta(EstimatorKind::eta2, p, q, ind) / eta(EstimatorKind::eta1, p, q, ind));
                alpha = std::min(alpha, ratio);
                beta = std::max(beta, ratio);
            }
        }
        report(5, alpha > 0.0 && beta / alpha <= 20.0, "local equivalence",
               "eta2/eta1 in [" + fmt("%.4f", alpha) + ", " + fmt("%.4f", beta) + "], beta/alpha " +
                   fmt("%.3f", beta / alpha) + " (60 subsets on 3 meshes)");
    }

    // 6. geometric decay for each estimator kind
    {
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < 3; ++i) {
            const Run& r = runs[1 + i];
            const int kind = static_cast<int>(r.trace.config.estimator);
            const DecayFit& d = r.mon.decay[kind];
            ok = ok && d.rho <= 0.97 && d.r2 >= 0.9;
            detail += (i ? ", " : "") + to_string(r.trace.config.estimator) + " rho " + fmt("%.4f", d.rho) + " (r2 " +
                      fmt("%.4f", d.r2) + ")";
        }
        report(6, ok, "geometric decay", detail);
    }

    // 7. adaptive versus uniform on the L-shape
    {
        const Run& a = runs[lshape_adaptive];
        const Run& u = runs[lshape_adaptive + 1];
        const double sa = a.mon.rate_eta.s, su = u.mon.rate_eta.s;
        const bool ok = sa >= su + 0.2 && sa >= 0.8 && a.seconds + u.seconds < 300.0;
        report(7, ok, "optimality gap",
               "s_adaptive = " + fmt("%.4f", sa) + " (r2 " + fmt("%.4f", a.mon.rate_eta.r2) + "), s_uniform = " +
                   fmt("%.4f", su) + " (r2 " + fmt("%.4f", u.mon.rate_eta.r2) + "), " +
                   fmt("%.1f", a.seconds + u.seconds) + " s");
    }

    // 8. quasi-orthogonality constants
    {
        bool ok = true;
        std::string detail;
        for (const Run& r : runs) {
            if (r.trace.mode != "adaptive" || r.trace.solutions.empty())
                continue;
            const double c = r.mon.qo_sup;
            ok = ok && std::isfinite(c);
            if (r.problem == &mms)
                ok = ok && c <= 10.0;
            detail += (detail.empty() ? "" : ", ") + r.label + " " + fmt("%.4f", c);
        }
        report(8, ok, "quasi-orthogonality", "sup c_l: " + detail);
    }

    // 9. Doerfler minimality
    {
        std::mt19937 rng(99);
        std::uniform_int_distribution<int> len(1, 15);
        std::uniform_real_distribution<double> val(0.0, 1.0), th(0.05, 1.0);
        int mismatches = 0;
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> s(static_cast<std::size_t>(len(rng)));
            for (double& v : s)
                v = std::round(1000.0 * val(rng));
            s[0] += 1.0;
            const double theta = th(rng);
            if (dorfler_mark(s, theta).size() != brute_force_minimum(s, theta))
                ++mismatches;
        }
        report(9, mismatches == 0, "Doerfler minimality", std::to_string(mismatches) + " mismatches in 200 trials");
    }

    // 10. overlay bound
    {
        std::mt19937 rng(7);
        const Partition p0 = make_lshape();
        int bad = 0;
        std::size_t tight = 0;
        for (int t = 0; t < 100; ++t) {
            const Partition p = random_refinement(p0, rng, 1 + t % 8);
            const Partition q = random_refinement(p0, rng, 1 + (t * 5) % 7);
            const Partition o = overlay(p, q);
            if (o.size() > p.size() + q.size() - p0.size() || !overlay(p, p).same_leaves(p))
                ++bad;
            if (o.size() == p.size() + q.size() - p0.size())
                ++tight;
        }
        report(10, bad == 0, "overlay bound",
               std::to_string(bad) + " violations in 100 pairs (" + std::to_string(tight) + " tight)");
    }

    // 11. completion constant
    {
        bool ok = true;
        std::string detail;
        for (const Run& r : runs) {
            if (r.trace.mode != "adaptive")
                continue;
            ok = ok && r.mon.completion_constant <= 50.0;
            detail += (detail.empty() ? "" : ", ") + r.label + " " + fmt("%.3f", r.mon.completion_constant);
        }
        report(11, ok, "completion constant", detail);
    }

    // 12. thresholding skeleton
    {
        const ProblemDef& prob = find_problem("singular-f");
        const LocalIndicator ind = oscillation_indicator(prob.f);
        const Partition p0 = prob.initial_mesh();
        std::vector<double> inv_eps, sizes, sums;
        bool exact = true, disjoint = true, bound = true;
        for (int i = 0; i <= 12; ++i) {
            const double eps = 1e-4 * std::pow(10.0, -0.5 * i);
            const ThresholdReport rep = greedy_threshold(p0, ind, eps);
            for (double v : ind.evaluate(rep.final_partition))
                exact = exact && v <= eps;
            disjoint = disjoint && rep.buckets_disjoint;
            bound = bound && rep.bucket_bound;
            inv_eps.push_back(1.0 / eps);
            sizes.push_back(static_cast<double>(rep.added));
            sums.push_back(rep.sum_e);
        }
        // #P - #P0 ~ eps^(-a): fit with the slope sign flipped, no points dropped
        const RateFit card = fit_rate(inv_eps, sizes, 0);
        const RateFit osc = fit_rate(sizes, sums, 0);
        const double a = -card.s;
        const double s = osc.s / 2.0;
        report(12, card.r2 >= 0.95 && exact && disjoint && bound, "thresholding skeleton",
               "#P-#P0 ~ eps^-" + fmt("%.4f", a) + " (r2 " + fmt("%.4f", card.r2) + "), osc ~ N^-" +
                   fmt("%.3f", osc.s) + " so 1/(1+2s) = " + fmt("%.4f", 1.0 / (1.0 + 2.0 * s)) +
                   ", max e <= eps " + (exact ? "yes" : "no") + ", buckets disjoint " + (disjoint ? "yes" : "no") +
                   ", m_j bound " + (bound ? "yes" : "no"));
    }

    // 13. inf-sup diagnostic
    {
        Partition p = make_unit_square_cross();
        std::vector<double> beta;
        std::size_t max_dofs = 0;
        for (int l = 0; l < 4; ++l) {
            const auto d = std::make_shared<const DofMap>(p);
            max_dofs = std::max(max_dofs, d->n_u() + d->n_p());
            beta.push_back(inf_sup_constant(assemble(d, [](const Point&) { return Vec2(0, 0); })));
            p = refine_uniform(p, 2);
        }
        const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
        std::string detail = "beta_h =";
        for (double b : beta)
            detail += " " + fmt("%.4f", b);
        detail += ", max/min " + fmt("%.3f", *hi / *lo) + ", up to " + std::to_string(max_dofs) + " dofs";
        report(13, *lo >= 0.05 && *hi / *lo <= 2.0 && max_dofs <= 4000, "inf-sup diagnostic", detail);
    }

    std::printf("%d criteria failed, %.1f s total\n", failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}
