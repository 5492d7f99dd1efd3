#include "afem/driver.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "afem/adapt.hpp"
#include "afem/assembly.hpp"
#include "afem/errors.hpp"
#include "afem/mesh_io.hpp"
#include "afem/threshold.hpp"

namespace afem {

namespace {

std::string canonical_key(std::string key)
{
    for (char& c : key)
        if (c == '_')
            c = '-';
    return key;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
    std::istringstream is(value);
    T v{};
    is >> v;
    if (is.fail() || !is.eof())
        throw ConfigError("bad value for " + key + ": '" + value + "'");
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& value)
{
    std::vector<double> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ','))
        if (!trim(item).empty())
            out.push_back(parse_number<double>(key, trim(item)));
    return out;
}

std::string fmt(const char* f, double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_file(const std::string& path, const std::string& text)
{
    const std::filesystem::path p(path);
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigError("cannot write " + path);
    os << text;
}

std::vector<std::string> provenance(const RunConfig& cfg)
{
    std::vector<std::string> lines{std::string("stokes-afem ") + kVersion, "command=" + cfg.command};
    for (const std::string& l : cfg.echo())
        lines.push_back(l);
    return lines;
}

double estimator_value(const TraceRow& r, EstimatorKind kind)
{
    return kind == EstimatorKind::eta0 ? r.eta0 : kind == EstimatorKind::eta1 ? r.eta1 : r.eta2;
}

void dump_indicators(const SolutionPair& sol, const VectorFn& f, const std::string& path)
{
    const Partition& p = sol.dofs->partition();
    const ElementIndicators ind = compute_indicators(sol, f);
    const auto s0 = marking_shares(EstimatorKind::eta0, p, ind);
    const auto s1 = marking_shares(EstimatorKind::eta1, p, ind);
    const auto s2 = marking_shares(EstimatorKind::eta2, p, ind);
    std::ostringstream os;
    os << "elem_id,vol,div_l2,div_edge,osc,share_eta0,share_eta1,share_eta2\n";
    for (std::size_t i = 0; i < p.size(); ++i)
        os << p.leaf(i) << ',' << format_real(ind.vol[i]) << ',' << format_real(ind.div_l2[i]) << ','
           << format_real(ind.div_edge[i]) << ',' << format_real(ind.osc[i]) << ',' << format_real(s0[i]) << ','
           << format_real(s1[i]) << ',' << format_real(s2[i]) << '\n';
    write_file(path, os.str());
}

void run_threshold(const RunConfig& cfg, const ProblemDef& problem, std::ostream& log)
{
    const Partition p0 = problem.initial_mesh();
    const LocalIndicator ind = parse_indicator(cfg.indicator, problem.f);
    std::vector<double> eps = cfg.eps_sweep.empty() ? std::vector<double>{cfg.eps} : cfg.eps_sweep;

    std::ostringstream csv;
    for (const std::string& c : provenance(cfg))
        csv << "# " << c << '\n';
    csv << "eps,N,sum_e,max_e,rounds\n";
    std::vector<double> xs, ys;
    std::optional<Partition> finest;
    for (double e : eps) {
        const ThresholdReport rep = greedy_threshold(p0, ind, e, cfg.max_generation);
        log << "eps: " << format_real(rep.eps) << '\n'
            << "  indicator: " << ind.name << '\n'
            << "  leaves: " << rep.final_partition.size() << '\n'
            << "  added: " << rep.added << '\n'
            << "  sum_e: " << format_real(rep.sum_e) << '\n'
            << "  max_e: " << format_real(rep.max_e) << '\n'
            << "  rounds: [";
        for (std::size_t r = 0; r < rep.rounds.size(); ++r)
            log << (r ? ", " : "") << rep.rounds[r];
        log << "]\n  buckets: {";
        bool first = true;
        for (const auto& [j, m] : rep.buckets) {
            log << (first ? "" : ", ") << j << ": " << m;
            first = false;
        }
        log << "}\n"
            << "  buckets_disjoint: " << (rep.buckets_disjoint ? "true" : "false") << '\n'
            << "  bucket_bound: " << (rep.bucket_bound ? "true" : "false") << '\n';
        csv << format_real(rep.eps) << ',' << rep.added << ',' << format_real(rep.sum_e) << ','
            << format_real(rep.max_e) << ',' << rep.rounds.size() << '\n';
        if (rep.added > 0) {
            xs.push_back(e);
            ys.push_back(static_cast<double>(rep.added));
        }
        if (!finest || rep.final_partition.size() > finest->size())
            finest = rep.final_partition;
    }
    if (xs.size() >= 4) {
        const RateFit fit = fit_rate(xs, ys, 0);
        log << "fit: N ~ eps^(-" << fmt("%.4f", fit.s) << "), r2 = " << fmt("%.4f", fit.r2) << '\n';
    }
    write_file((std::filesystem::path(cfg.out) / "threshold.csv").string(), csv.str());
    if (!cfg.export_mesh.empty() && finest)
        export_mesh(*finest, cfg.export_mesh);
}

void run_solve(const RunConfig& cfg, const ProblemDef& problem, std::ostream& log)
{
    AdaptiveConfig ac;
    ac.theta = cfg.theta;
    ac.estimator = parse_estimator(cfg.estimator);
    ac.max_dofs = cfg.max_dofs;
    ac.max_iterations = cfg.max_iterations;
    if (const DofMap d0(problem.initial_mesh()); d0.stability_warning())
        log << "warning: " << *d0.stability_warning() << '\n';
    const AdaptiveTrace trace =
        cfg.mode == "uniform" ? uniform_run(ac, problem, cfg.levels) : adaptive_run(ac, problem);
    const MonitorReport mon = monitor(trace, problem);

    const std::filesystem::path out(cfg.out);
    write_file((out / "trace.csv").string(), trace_csv(trace, provenance(cfg)));
    write_file((out / "monitor.json").string(), monitor_json(mon, trace));

    const std::string name = to_string(ac.estimator);
    log << "problem " << problem.id << ", mode " << trace.mode << ", estimator " << name << '\n';
    char buf[256];
    std::snprintf(buf, sizeof buf, "%4s %9s %9s %13s %13s %13s %13s %7s\n", "k", "N", "dofs",
                  (name + "^1/2").c_str(), "err_u", "err_p", "total_err", "marked");
    log << buf;
    for (const TraceRow& r : trace.rows) {
        std::snprintf(buf, sizeof buf, "%4d %9zu %9zu %13s %13s %13s %13s %7zu\n", r.k, r.N, r.n_u + r.n_p,
                      fmt("%.6e", std::sqrt(estimator_value(r, ac.estimator))).c_str(), fmt("%.6e", r.err_u).c_str(),
                      fmt("%.6e", r.err_p).c_str(), fmt("%.6e", r.total_err).c_str(), r.n_marked);
        log << buf;
    }
    log << "stop: " << trace.stop_reason << '\n';
    log << "rate s (" << name << "): " << fmt("%.4f", mon.rate_eta.s) << " (r2 " << fmt("%.4f", mon.rate_eta.r2)
        << ")\n";
    if (problem.exact) {
        std::vector<double> xs, yu, yp;
        for (const TraceRow& r : trace.rows)
            if (r.N > 0 && r.err_u > 0 && r.err_p > 0) {
                xs.push_back(static_cast<double>(r.N));
                yu.push_back(r.err_u);
                yp.push_back(r.err_p);
            }
        log << "rate s (total error): " << fmt("%.4f", mon.rate_err.s) << " (r2 " << fmt("%.4f", mon.rate_err.r2)
            << ")\n";
        if (xs.size() >= 4) {
            const RateFit fu = fit_rate(xs, yu);
            const RateFit fp = fit_rate(xs, yp);
            log << "rate s (velocity H1): " << fmt("%.4f", fu.s) << " (r2 " << fmt("%.4f", fu.r2) << ")\n";
            log << "rate s (pressure L2): " << fmt("%.4f", fp.s) << " (r2 " << fmt("%.4f", fp.r2) << ")\n";
        }
    }
    log << "qo constant: " << fmt("%.4f", mon.qo_sup) << ", completion constant: "
        << fmt("%.4f", mon.completion_constant) << ", rho(" << name
        << "): " << fmt("%.4f", mon.decay[static_cast<int>(ac.estimator)].rho) << '\n';

    if (trace.rows.empty())
        return;
    const Partition& last = trace.partitions.back();
    if (!cfg.export_mesh.empty())
        export_mesh(last, cfg.export_mesh);
    if (!cfg.dump_indicators.empty())
        dump_indicators(trace.solutions.back(), problem.f, cfg.dump_indicators);
    if (!cfg.dump_system.empty())
        dump_system(assemble(trace.solutions.back().dofs, problem.f, problem.g), cfg.dump_system);
}

void run_mesh_info(const RunConfig& cfg, const ProblemDef& problem, std::ostream& log)
{
    Partition p = problem.initial_mesh();
    char buf[256];
    std::snprintf(buf, sizeof buf, "%5s %8s %8s %8s %8s %8s %9s %9s %7s %7s %10s\n", "level", "leaves", "verts",
                  "edges", "n_u", "n_p", "sigma_s", "sigma_g", "maxgen", "star", "conforming");
    log << "problem " << problem.id << ", domain " << problem.domain << '\n' << buf;
    for (int l = 0; l <= cfg.levels; ++l) {
        const DofMap dofs(p);
        if (l > 0 && dofs.n_u() + dofs.n_p() > cfg.max_dofs)
            break;
        const MeshStats s = mesh_stats(p);
        std::snprintf(buf, sizeof buf, "%5d %8zu %8zu %8zu %8zu %8zu %9.4f %9.4f %7d %7zu %10s\n", l, p.size(),
                      p.vertices().size(), p.edges().size(), dofs.n_u(), dofs.n_p(), s.sigma_s, s.sigma_g,
                      s.max_generation, s.max_star, p.is_conforming() ? "yes" : "no");
        log << buf;
        if (l == 0 && dofs.stability_warning())
            log << "warning: " << *dofs.stability_warning() << '\n';
        if (!cfg.export_mesh.empty())
            export_mesh(p, cfg.export_mesh);
        if (l < cfg.levels)
            p = refine_uniform(p, 2);
    }
}

void run_infsup(const RunConfig& cfg, const ProblemDef& problem, std::ostream& log)
{
    Partition p = problem.initial_mesh();
    std::ostringstream csv;
    for (const std::string& c : provenance(cfg))
        csv << "# " << c << '\n';
    csv << "level,leaves,n_u,n_p,beta\n";
    log << "problem " << problem.id << " inf-sup constants\n";
    for (int l = 0; l <= cfg.levels; ++l) {
        auto dofs = std::make_shared<const DofMap>(p);
        if (dofs->n_u() + dofs->n_p() > 4000) {
            log << "level " << l << " exceeds 4000 dofs, stopping\n";
            break;
        }
        if (l == 0 && dofs->stability_warning())
            log << "warning: " << *dofs->stability_warning() << '\n';
        const double beta = inf_sup_constant(assemble(dofs, problem.f, problem.g));
        log << "level " << l << ": leaves " << p.size() << ", n_u " << dofs->n_u() << ", n_p " << dofs->n_p()
            << ", beta_h " << fmt("%.6f", beta) << '\n';
        csv << l << ',' << p.size() << ',' << dofs->n_u() << ',' << dofs->n_p() << ',' << format_real(beta) << '\n';
        if (!cfg.export_mesh.empty())
            export_mesh(p, cfg.export_mesh);
        p = refine_uniform(p, 2);
    }
    write_file((std::filesystem::path(cfg.out) / "infsup.csv").string(), csv.str());
}

} // namespace

void RunConfig::validate() const
{
    if (command != "run" && command != "threshold" && command != "mesh-info" && command != "infsup")
        throw ConfigError("unknown command '" + command + "'");
    if (mode != "adaptive" && mode != "uniform" && mode != "threshold")
        throw ConfigError("mode must be adaptive, uniform or threshold");
    parse_estimator(estimator);
    if (!(theta > 0.0 && theta <= 1.0))
        throw ConfigError("theta must lie in (0, 1]");
    if (max_dofs < 1)
        throw ConfigError("max-dofs must be positive");
    if (max_iterations < 1)
        throw ConfigError("max-iterations must be positive");
    if (levels < 0)
        throw ConfigError("levels must be non-negative");
    if (out.empty())
        throw ConfigError("out must not be empty");
    const bool thresholding = command == "threshold" || (command == "run" && mode == "threshold");
    if (thresholding) {
        if (!(eps > 0.0))
            throw ConfigError("eps must be positive");
        for (double e : eps_sweep)
            if (!(e > 0.0))
                throw ConfigError("eps-sweep entries must be positive");
        if (max_generation < 1)
            throw ConfigError("max-generation must be positive");
    }
}

std::vector<std::string> RunConfig::echo() const
{
    std::string sweep;
    for (double e : eps_sweep)
        sweep += (sweep.empty() ? "" : ",") + format_real(e);
    return {"problem=" + problem,
            "mesh=" + mesh,
            "mode=" + mode,
            "theta=" + format_real(theta),
            "estimator=" + estimator,
            "max-dofs=" + std::to_string(max_dofs),
            "max-iterations=" + std::to_string(max_iterations),
            "levels=" + std::to_string(levels),
            "seed=" + std::to_string(seed),
            "eps=" + format_real(eps),
            "indicator=" + indicator,
            "max-generation=" + std::to_string(max_generation),
            "eps-sweep=" + sweep};
}

std::map<std::string, std::string> read_config_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
        out[canonical_key(trim(t.substr(0, eq)))] = trim(t.substr(eq + 1));
    }
    return out;
}

void apply_config_value(RunConfig& cfg, const std::string& raw_key, const std::string& value)
{
    const std::string key = canonical_key(raw_key);
    if (key == "problem") cfg.problem = value;
    else if (key == "mesh") cfg.mesh = value;
    else if (key == "mode") cfg.mode = value;
    else if (key == "theta") cfg.theta = parse_number<double>(key, value);
    else if (key == "estimator") cfg.estimator = value;
    else if (key == "max-dofs") cfg.max_dofs = static_cast<std::size_t>(parse_number<double>(key, value));
    else if (key == "max-iterations") cfg.max_iterations = parse_number<int>(key, value);
    else if (key == "levels") cfg.levels = parse_number<int>(key, value);
    else if (key == "out") cfg.out = value;
    else if (key == "seed") cfg.seed = parse_number<unsigned>(key, value);
    else if (key == "export-mesh") cfg.export_mesh = value;
    else if (key == "dump-indicators") cfg.dump_indicators = value;
    else if (key == "dump-system") cfg.dump_system = value;
    else if (key == "eps") cfg.eps = parse_number<double>(key, value);
    else if (key == "indicator") cfg.indicator = value;
    else if (key == "max-generation") cfg.max_generation = parse_number<int>(key, value);
    else if (key == "eps-sweep") cfg.eps_sweep = parse_list(key, value);
    else throw ConfigError("unknown config key '" + raw_key + "'");
}

void execute(const RunConfig& cfg, std::ostream& log)
{
    cfg.validate();
    ProblemDef problem = find_problem(cfg.problem);
    if (!cfg.mesh.empty()) {
        const Partition p0 = import_mesh(cfg.mesh);
        problem.initial_mesh = [p0] { return p0; };
    }
    std::filesystem::create_directories(cfg.out);
    if (cfg.command == "threshold" || (cfg.command == "run" && cfg.mode == "threshold"))
        run_threshold(cfg, problem, log);
    else if (cfg.command == "run")
        run_solve(cfg, problem, log);
    else if (cfg.command == "mesh-info")
        run_mesh_info(cfg, problem, log);
    else
        run_infsup(cfg, problem, log);
}

int cli_main(int argc, char** argv)
{
    CLI::App app{"Adaptive Taylor-Hood finite elements for the Stokes problem"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // every option is kept as text and routed through apply_config_value so
    // that the command line and the config file share one parser
    const std::vector<std::pair<std::string, std::string>> flags{
        {"problem", "problem id"},
        {"mesh", "JSON mesh replacing the problem's initial partition"},
        {"mode", "adaptive, uniform or threshold"},
        {"theta", "marking parameter in (0, 1]"},
        {"estimator", "eta0, eta1 or eta2"},
        {"max-dofs", "dof budget"},
        {"max-iterations", "iteration budget"},
        {"levels", "uniform levels (two bisection sweeps each)"},
        {"out", "output directory"},
        {"seed", "seed echoed into the provenance header"},
        {"export-mesh", "write the final mesh as JSON"},
        {"dump-indicators", "write per-element indicators as CSV"},
        {"dump-system", "write the final KKT matrix in coordinate form"},
        {"eps", "threshold tolerance"},
        {"indicator", "osc or synthetic:<a>[@x,y]"},
        {"max-generation", "generation cap for thresholding"},
        {"eps-sweep", "comma-separated tolerances"},
    };
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    for (const auto& [name, help] : flags)
        options[name] = app.add_option("--" + name, values[name], help);
    std::string config_path;
    app.add_option("--config", config_path, "key=value configuration file");

    RunConfig cfg;
    const std::pair<const char*, const char*> commands[] = {
        {"run", "solve-estimate-mark-refine loop or uniform study"},
        {"threshold", "greedy thresholding of a local indicator"},
        {"mesh-info", "statistics of the initial or uniformly refined mesh"},
        {"infsup", "discrete inf-sup constant on uniform levels"},
    };
    for (const auto& [name, help] : commands)
        app.add_subcommand(name, help)->callback([&cfg, name] { cfg.command = name; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (!config_path.empty())
            for (const auto& [key, value] : read_config_file(config_path)) {
                const auto it = options.find(key);
                if (it == options.end() || it->second->count() == 0)
                    apply_config_value(cfg, key, value);
            }
        for (const auto& [name, opt] : options)
            if (opt->count() > 0)
                apply_config_value(cfg, name, values[name]);
        execute(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const BudgetError& e) {
        std::cerr << "budget exceeded: " << e.what() << '\n';
        return kExitBudget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}

} // namespace afem
