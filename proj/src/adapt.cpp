#include "afem/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "afem/assembly.hpp"
#include "afem/errors.hpp"

namespace afem {

void AdaptiveConfig::validate() const
{
    if (!(theta > 0.0 && theta <= 1.0))
        throw ConfigError("theta must lie in (0, 1]");
    if (max_iterations < 1)
        throw ConfigError("max_iterations must be positive");
    if (max_dofs < 1)
        throw ConfigError("max_dofs must be positive");
}

std::vector<std::size_t> dorfler_mark(std::span<const double> shares, double theta)
{
    if (!(theta > 0.0 && theta <= 1.0))
        throw InvalidArgument("dorfler_mark: theta must lie in (0, 1]");
    for (double s : shares)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw InvalidArgument("dorfler_mark: shares must be finite and non-negative");

    std::vector<std::size_t> order(shares.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return shares[a] > shares[b]; });
    // summing in the marking order makes theta = 1 reach the total exactly
    double total = 0.0;
    for (std::size_t i : order)
        total += shares[i];
    std::vector<std::size_t> marked;
    if (total == 0.0)
        return marked;
    const double target = theta * total;
    double acc = 0.0;
    for (std::size_t i : order) {
        if (acc >= target)
            break;
        acc += shares[i];
        marked.push_back(i);
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

namespace {

struct IterationState {
    Partition partition;
    SolutionPair solution;
    ElementIndicators indicators;
};

class Runner {
public:
    Runner(const AdaptiveConfig& cfg, const ProblemDef& problem, std::string mode) : cfg_(cfg), problem_(problem)
    {
        cfg_.validate();
        trace_.problem = problem.id;
        trace_.mode = std::move(mode);
        trace_.config = cfg;
    }

    std::size_t dofs_of(const DofMap& d) const { return d.n_u() + d.n_p(); }

    /// Solves and estimates on `p`, completing the previous row. Returns false
    /// if `p` exceeds the dof budget (nothing recorded).
    bool step(const Partition& p)
    {
        auto dofs = std::make_shared<const DofMap>(p);
        if (!trace_.rows.empty() && dofs_of(*dofs) > cfg_.max_dofs) {
            trace_.stop_reason = "max-dofs";
            return false;
        }
        const int k = static_cast<int>(trace_.rows.size());
        SolutionPair sol;
        try {
            const StokesSystem sys = assemble(dofs, problem_.f, problem_.g);
            sol = cfg_.vector_laplace ? solve_vector_laplace(sys) : solve(sys);
        } catch (const SolverError& e) {
            throw SolverError("iteration " + std::to_string(k) + ": " + e.what());
        }
        ElementIndicators ind = compute_indicators(sol, problem_.f);

        TraceRow row;
        row.k = k;
        if (n0_ == 0)
            n0_ = p.forest().num_roots();
        row.N = p.size() - n0_;
        row.leaves = p.size();
        row.n_u = dofs->n_u();
        row.n_p = dofs->n_p();
        row.eta0 = eta(EstimatorKind::eta0, p, ind);
        row.eta1 = eta(EstimatorKind::eta1, p, ind);
        row.eta2 = eta(EstimatorKind::eta2, p, ind);
        row.osc = ind.total_osc();
        if (problem_.exact) {
            const ErrorNorms e = error_norms(sol, *problem_.exact);
            row.err_u = e.u_h1;
            row.err_p = e.p_l2;
            row.total_err = std::sqrt(e.u_h1 * e.u_h1 + e.p_l2 * e.p_l2 + row.osc);
        }
        double div = 0.0;
        double jumps = 0.0;
        for (double v : ind.div_l2)
            div += v;
        for (double v : ind.jump)
            jumps += v;
        if (jumps > 0.0)
            row.div_jump_ratio = div / jumps;

        if (prev_) {
            const SolutionPair lifted = prolong(prev_->solution, dofs);
            const ErrorNorms d = difference_norms(lifted, sol);
            TraceRow& last = trace_.rows.back();
            last.step_diff_sq = d.u_h1 * d.u_h1 + d.p_l2 * d.p_l2;
            std::vector<std::size_t> refined;
            for (std::size_t i = 0; i < prev_->partition.size(); ++i)
                if (!p.contains(prev_->partition.leaf(i)))
                    refined.push_back(i);
            const double local = eta(EstimatorKind::eta1, prev_->partition, refined, prev_->indicators);
            if (local > 0.0)
                last.local_upper_ratio = last.step_diff_sq / local;
        }

        trace_.rows.push_back(row);
        trace_.partitions.push_back(p);
        if (cfg_.keep_solutions)
            trace_.solutions.push_back(sol);
        prev_ = IterationState{p, std::move(sol), std::move(ind)};
        return true;
    }

    double current_eta() const
    {
        const TraceRow& r = trace_.rows.back();
        switch (cfg_.estimator) {
        case EstimatorKind::eta0: return r.eta0;
        case EstimatorKind::eta1: return r.eta1;
        case EstimatorKind::eta2: return r.eta2;
        }
        return r.eta1;
    }

    const IterationState& state() const { return *prev_; }
    TraceRow& last_row() { return trace_.rows.back(); }
    AdaptiveTrace& trace() { return trace_; }

private:
    AdaptiveConfig cfg_;
    const ProblemDef& problem_;
    AdaptiveTrace trace_;
    std::optional<IterationState> prev_;
    std::size_t n0_ = 0;
};

} // namespace

AdaptiveTrace adaptive_run(const AdaptiveConfig& cfg, const ProblemDef& problem)
{
    Runner run(cfg, problem, "adaptive");
    Partition p = problem.initial_mesh();
    double eta_initial = 0.0;
    for (int k = 0;; ++k) {
        if (!run.step(p))
            break;
        const double e = run.current_eta();
        if (k == 0)
            eta_initial = e;
        if (e <= cfg.stop_ratio * eta_initial) {
            run.trace().converged = true;
            run.trace().stop_reason = "estimator vanished";
            break;
        }
        if (k + 1 >= cfg.max_iterations) {
            run.trace().stop_reason = "max-iterations";
            break;
        }
        const IterationState& st = run.state();
        const std::vector<double> shares = marking_shares(cfg.estimator, st.partition, st.indicators);
        const std::vector<std::size_t> marked = dorfler_mark(shares, cfg.theta);
        double total = 0.0;
        double got = 0.0;
        for (double s : shares)
            total += s;
        std::vector<ElemId> ids;
        ids.reserve(marked.size());
        for (std::size_t i : marked) {
            ids.push_back(st.partition.leaf(i));
            got += shares[i];
        }
        run.last_row().n_marked = marked.size();
        run.last_row().marked_fraction = total > 0.0 ? got / total : 0.0;
        p = refine(st.partition, ids);
    }
    return std::move(run.trace());
}

AdaptiveTrace uniform_run(const AdaptiveConfig& cfg, const ProblemDef& problem, int levels)
{
    if (levels < 0)
        throw ConfigError("levels must be non-negative");
    Runner run(cfg, problem, "uniform");
    Partition p = problem.initial_mesh();
    for (int l = 0; l <= levels; ++l) {
        if (!run.step(p))
            break;
        if (l == levels) {
            run.trace().stop_reason = "levels";
            break;
        }
        run.last_row().n_marked = p.size();
        run.last_row().marked_fraction = 1.0;
        p = refine_uniform(p, 2);
    }
    return std::move(run.trace());
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - res / syy : 1.0;
    return f;
}

} // namespace

RateFit fit_rate(std::span<const double> xs, std::span<const double> ys, std::size_t drop)
{
    if (xs.size() != ys.size())
        throw InvalidArgument("fit_rate: size mismatch");
    if (xs.size() < 4 || xs.size() < drop + 2)
        throw InvalidArgument("fit_rate: need at least 4 points");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw InvalidArgument("fit_rate: values must be positive");
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = drop; i < xs.size(); ++i) {
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    const LineFit f = least_squares(lx, ly);
    return {-f.slope, f.r2};
}

DecayFit decay_fit(std::span<const double> values, std::size_t drop)
{
    if (values.size() < 3)
        throw InvalidArgument("decay_fit: need at least 3 values");
    drop = std::min(drop, values.size() - 2);
    std::vector<double> k;
    std::vector<double> lv;
    DecayFit out;
    out.rho_max = 0.0;
    for (std::size_t i = drop; i < values.size(); ++i) {
        if (!(values[i] > 0.0))
            throw InvalidArgument("decay_fit: values must be positive");
        k.push_back(static_cast<double>(i));
        lv.push_back(std::log(values[i]));
        if (i > drop)
            out.rho_max = std::max(out.rho_max, values[i] / values[i - 1]);
    }
    const LineFit f = least_squares(k, lv);
    out.rho = std::exp(f.slope);
    out.r2 = f.r2;
    out.decaying = out.rho < 1.0 && f.slope < -1e-12;
    return out;
}

std::vector<double> qo_constants(std::span<const double> step_diff_sq, std::span<const double> err_sq)
{
    if (step_diff_sq.size() != err_sq.size())
        throw InvalidArgument("qo_constants: size mismatch");
    std::vector<double> c(err_sq.size());
    double tail = 0.0;
    for (std::size_t l = err_sq.size(); l-- > 0;) {
        if (std::isfinite(step_diff_sq[l]))
            tail += step_diff_sq[l];
        if (err_sq[l] > 0.0)
            c[l] = tail / err_sq[l];
        else
            c[l] = tail > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return c;
}

std::pair<double, double> nnls2(std::span<const double> x1, std::span<const double> x2, std::span<const double> y)
{
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        a11 += x1[i] * x1[i];
        a12 += x1[i] * x2[i];
        a22 += x2[i] * x2[i];
        b1 += x1[i] * y[i];
        b2 += x2[i] * y[i];
    }
    auto residual = [&](double a, double b) {
        double r = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - a * x1[i] - b * x2[i];
            r += d * d;
        }
        return r;
    };
    const double det = a11 * a22 - a12 * a12;
    if (det > 1e-14 * a11 * a22) {
        const double a = (b1 * a22 - b2 * a12) / det;
        const double b = (a11 * b2 - a12 * b1) / det;
        if (a >= 0.0 && b >= 0.0)
            return {a, b};
    }
    std::pair<double, double> best{0.0, 0.0};
    double best_r = residual(0.0, 0.0);
    if (a11 > 0.0) {
        const double a = std::max(0.0, b1 / a11);
        if (const double r = residual(a, 0.0); r < best_r) {
            best = {a, 0.0};
            best_r = r;
        }
    }
    if (a22 > 0.0) {
        const double b = std::max(0.0, b2 / a22);
        if (const double r = residual(0.0, b); r < best_r)
            best = {0.0, b};
    }
    return best;
}

MonitorReport monitor(const AdaptiveTrace& trace, const ProblemDef& problem)
{
    MonitorReport m;
    const auto& rows = trace.rows;
    const std::size_t n = rows.size();
    if (n == 0)
        return m;

    std::vector<double> steps(n);
    for (std::size_t k = 0; k < n; ++k)
        steps[k] = rows[k].step_diff_sq;

    // quasi-orthogonality
    std::vector<double> err_sq(n, kNaN);
    std::size_t admissible = n;
    if (problem.exact && !trace.config.vector_laplace) {
        for (std::size_t k = 0; k < n; ++k)
            err_sq[k] = rows[k].err_u * rows[k].err_u + rows[k].err_p * rows[k].err_p;
    } else if (problem.exact) {
        for (std::size_t k = 0; k < n; ++k)
            err_sq[k] = rows[k].err_u * rows[k].err_u;
    } else if (trace.solutions.size() == n) {
        m.qo_reference = true;
        const SolutionPair& ref = trace.solutions.back();
        for (std::size_t k = 0; k < n; ++k) {
            const ErrorNorms d = difference_norms(prolong(trace.solutions[k], ref.dofs), ref);
            err_sq[k] = d.u_h1 * d.u_h1 + d.p_l2 * d.p_l2;
        }
        admissible = n >= 2 ? n - 2 : 0;
    }
    if (std::isfinite(err_sq[0])) {
        m.qo = qo_constants(steps, err_sq);
        double sup = 0.0;
        for (std::size_t l = 0; l < admissible; ++l)
            sup = std::max(sup, m.qo[l]);
        m.qo_sup = admissible > 0 ? sup : kNaN;
    }

    // geometric decay per estimator kind
    for (int kind = 0; kind < 3; ++kind) {
        std::vector<double> v(n);
        for (std::size_t k = 0; k < n; ++k)
            v[k] = kind == 0 ? rows[k].eta0 : kind == 1 ? rows[k].eta1 : rows[k].eta2;
        try {
            m.decay[kind] = decay_fit(v);
        } catch (const InvalidArgument&) {
            m.decay[kind] = DecayFit{kNaN, kNaN, kNaN, false};
        }
    }

    // rates against N
    std::vector<double> xs, ye, yt;
    for (const TraceRow& r : rows) {
        if (r.N == 0)
            continue;
        xs.push_back(static_cast<double>(r.N));
        const double e = trace.config.estimator == EstimatorKind::eta0   ? r.eta0
                         : trace.config.estimator == EstimatorKind::eta1 ? r.eta1
                                                                         : r.eta2;
        ye.push_back(std::sqrt(e));
        yt.push_back(r.total_err);
    }
    try {
        m.rate_eta = fit_rate(xs, ye);
    } catch (const InvalidArgument&) {
        m.rate_eta = {kNaN, kNaN};
    }
    try {
        m.rate_err = problem.exact ? fit_rate(xs, yt) : RateFit{kNaN, kNaN};
    } catch (const InvalidArgument&) {
        m.rate_err = {kNaN, kNaN};
    }

    // completion
    double marked = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k)
        marked += static_cast<double>(rows[k].n_marked);
    if (marked > 0.0)
        m.completion_constant = static_cast<double>(rows.back().N) / marked;

    // local upper bound, reduction, efficiency, divergence bound
    std::vector<double> x1, x2, y;
    for (std::size_t k = 0; k < n; ++k) {
        const TraceRow& r = rows[k];
        if (std::isfinite(r.local_upper_ratio))
            m.local_upper_max = std::isfinite(m.local_upper_max) ? std::max(m.local_upper_max, r.local_upper_ratio)
                                                                 : r.local_upper_ratio;
        if (std::isfinite(r.div_jump_ratio))
            m.div_jump_max =
                std::isfinite(m.div_jump_max) ? std::max(m.div_jump_max, r.div_jump_ratio) : r.div_jump_ratio;
        if (k + 1 < n && std::isfinite(r.step_diff_sq)) {
            x1.push_back(r.eta2);
            x2.push_back(r.step_diff_sq);
            y.push_back(rows[k + 1].eta2);
        }
        if (k >= 2 && std::isfinite(r.total_err) && r.total_err > 0.0) {
            const double idx = std::sqrt(r.eta1) / r.total_err;
            m.efficiency_min = std::isfinite(m.efficiency_min) ? std::min(m.efficiency_min, idx) : idx;
            m.efficiency_max = std::isfinite(m.efficiency_max) ? std::max(m.efficiency_max, idx) : idx;
        }
    }
    if (!y.empty()) {
        const auto [mu, gamma] = nnls2(x1, x2, y);
        m.reduction_mu = mu;
        m.reduction_gamma = gamma;
    }
    return m;
}

std::string format_real(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trace_csv(const AdaptiveTrace& trace, const std::vector<std::string>& header_comments)
{
    std::ostringstream os;
    for (const std::string& c : header_comments)
        os << "# " << c << '\n';
    os << "k,N,leaves,n_u,n_p,eta0,eta1,eta2,osc,err_u,err_p,total_err,n_marked,step_diff_sq\n";
    for (const TraceRow& r : trace.rows) {
        os << r.k << ',' << r.N << ',' << r.leaves << ',' << r.n_u << ',' << r.n_p << ',' << format_real(r.eta0)
           << ',' << format_real(r.eta1) << ',' << format_real(r.eta2) << ',' << format_real(r.osc) << ','
           << format_real(r.err_u) << ',' << format_real(r.err_p) << ',' << format_real(r.total_err) << ','
           << r.n_marked << ',' << format_real(r.step_diff_sq) << '\n';
    }
    return os.str();
}

namespace {

nlohmann::ordered_json num(double v)
{
    if (!std::isfinite(v))
        return nullptr;
    return v;
}

nlohmann::ordered_json decay_json(const DecayFit& d)
{
    return {{"rho", num(d.rho)}, {"r2", num(d.r2)}, {"rho_max", num(d.rho_max)}, {"decaying", d.decaying}};
}

} // namespace

std::string monitor_json(const MonitorReport& m, const AdaptiveTrace& trace)
{
    nlohmann::ordered_json j;
    j["problem"] = trace.problem;
    j["mode"] = trace.mode;
    j["estimator"] = to_string(trace.config.estimator);
    j["theta"] = trace.config.theta;
    j["iterations"] = trace.rows.size();
    j["stop_reason"] = trace.stop_reason;
    nlohmann::ordered_json qo = nlohmann::ordered_json::array();
    for (double c : m.qo)
        qo.push_back(num(c));
    j["qo_constants"] = qo;
    j["qo_constant"] = num(m.qo_sup);
    j["qo_reference_solution"] = m.qo_reference ? "finest iterate" : "exact";
    j["decay"] = {{"eta0", decay_json(m.decay[0])}, {"eta1", decay_json(m.decay[1])}, {"eta2", decay_json(m.decay[2])}};
    j["rate_s"] = {{"estimator", num(m.rate_eta.s)}, {"estimator_r2", num(m.rate_eta.r2)},
                   {"total_error", num(m.rate_err.s)}, {"total_error_r2", num(m.rate_err.r2)}};
    j["completion_constant"] = num(m.completion_constant);
    j["local_upper_bound_max"] = num(m.local_upper_max);
    j["estimator_reduction"] = {{"mu", num(m.reduction_mu)}, {"gamma", num(m.reduction_gamma)}};
    j["efficiency_index"] = {{"min", num(m.efficiency_min)}, {"max", num(m.efficiency_max)}};
    j["div_jump_ratio_max"] = num(m.div_jump_max);
    return j.dump(2) + "\n";
}

} // namespace afem
