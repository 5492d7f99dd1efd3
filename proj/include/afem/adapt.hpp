#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "afem/estimators.hpp"
#include "afem/problems.hpp"

namespace afem {

struct AdaptiveConfig {
    double theta = 0.5;
    EstimatorKind estimator = EstimatorKind::eta1;
    int max_iterations = 100;
    std::size_t max_dofs = 200000; ///< n_u + n_p of any solved partition
    double stop_ratio = 1e-12;     ///< stop once eta <= stop_ratio * eta(P0)
    bool vector_laplace = false;   ///< solve the velocity-only Poisson surrogate instead of Stokes
    bool keep_solutions = true;    ///< needed by the reference-based monitors

    void validate() const;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One SOLVE-ESTIMATE-MARK-REFINE iteration. Estimators are squared; errors
/// are norms; err_* and total_err are NaN without an exact solution.
struct TraceRow {
    int k = 0;
    std::size_t N = 0; ///< #P_k - #P_0
    std::size_t leaves = 0;
    std::size_t n_u = 0;
    std::size_t n_p = 0;
    double eta0 = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
    double osc = 0.0;
    double err_u = kNaN;
    double err_p = kNaN;
    double total_err = kNaN; ///< sqrt(err_u^2 + err_p^2 + osc)
    std::size_t n_marked = 0;
    double marked_fraction = 0.0; ///< achieved share fraction of the marked set
    double step_diff_sq = kNaN;   ///< |u_{k+1} - u_k|_1^2 + |p_{k+1} - p_k|^2, NaN on the last row
    double local_upper_ratio = kNaN; ///< step_diff_sq / eta1(P_k, refined set)
    double div_jump_ratio = kNaN;    ///< |div u_k|^2 / sum of jumps
};

struct AdaptiveTrace {
    std::string problem;
    std::string mode; ///< "adaptive" or "uniform"
    AdaptiveConfig config;
    std::vector<TraceRow> rows;
    std::vector<Partition> partitions;
    std::vector<SolutionPair> solutions; ///< empty unless keep_solutions
    bool converged = false;              ///< stopped because eta vanished
    std::string stop_reason;
};

/// Shortest prefix of the shares sorted descending (ties by ascending index)
/// whose sum reaches theta times the total. Returns positions into `shares`,
/// ascending. All-zero shares give an empty set.
std::vector<std::size_t> dorfler_mark(std::span<const double> shares, double theta);

/// Algorithm loop on `problem` from its initial mesh.
AdaptiveTrace adaptive_run(const AdaptiveConfig& cfg, const ProblemDef& problem);

/// Levels 0..levels, each level two bisection sweeps of every leaf; stops
/// early if the next level exceeds cfg.max_dofs.
AdaptiveTrace uniform_run(const AdaptiveConfig& cfg, const ProblemDef& problem, int levels);

struct RateFit {
    double s = 0.0;
    double r2 = 0.0;
};

/// Least-squares slope of log y against log x, negated, after dropping the
/// first `drop` points. Needs at least 4 points; throws InvalidArgument on
/// non-positive values.
RateFit fit_rate(std::span<const double> xs, std::span<const double> ys, std::size_t drop = 2);

struct DecayFit {
    double rho = 1.0;     ///< exp of the slope of log values against k
    double r2 = 0.0;
    double rho_max = 1.0; ///< largest ratio values[k+1] / values[k] over the tail
    bool decaying = false;
};

/// Geometric fit over values[drop..]. Needs at least 3 values.
DecayFit decay_fit(std::span<const double> values, std::size_t drop = 2);

/// c_l = sum_{k >= l} step[k] / err_sq[l]; NaN steps count as 0.
std::vector<double> qo_constants(std::span<const double> step_diff_sq, std::span<const double> err_sq);

struct MonitorReport {
    std::vector<double> qo;       ///< c_l per iteration
    double qo_sup = kNaN;         ///< sup over the admissible l
    bool qo_reference = false;    ///< true if the finest iterate served as reference
    DecayFit decay[3];            ///< per estimator kind, on squared eta
    RateFit rate_eta;             ///< on sqrt(eta of the run's kind) against N
    RateFit rate_err;             ///< on total_err against N (exact solution only)
    double completion_constant = kNaN;
    double local_upper_max = kNaN;
    double reduction_mu = kNaN;   ///< eta2_{k+1} ~ mu eta2_k + gamma step_k, non-negative fit
    double reduction_gamma = kNaN;
    double efficiency_min = kNaN; ///< sqrt(eta1) / total_err over rows k >= 2
    double efficiency_max = kNaN;
    double div_jump_max = kNaN;
};

MonitorReport monitor(const AdaptiveTrace& trace, const ProblemDef& problem);

/// Non-negative least squares for y ~ a x1 + b x2.
std::pair<double, double> nnls2(std::span<const double> x1, std::span<const double> x2, std::span<const double> y);

std::string trace_csv(const AdaptiveTrace& trace, const std::vector<std::string>& header_comments);
std::string monitor_json(const MonitorReport& report, const AdaptiveTrace& trace);

/// Formatting with 17 significant digits ("nan" for NaN).
std::string format_real(double v);

} // namespace afem
