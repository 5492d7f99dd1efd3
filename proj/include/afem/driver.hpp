#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace afem {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitSolver = 3,
    kExitBudget = 4,
};

struct RunConfig {
    std::string command = "run"; ///< run, threshold, mesh-info, infsup
    std::string problem = "smooth-mms";
    std::string mesh; ///< optional JSON mesh replacing the problem's initial partition
    std::string mode = "adaptive"; ///< adaptive, uniform, threshold
    double theta = 0.5;
    std::string estimator = "eta1";
    std::size_t max_dofs = 200000;
    int max_iterations = 100;
    int levels = 4;
    std::string out = "out";
    unsigned seed = 0;
    std::string export_mesh;
    std::string dump_indicators;
    std::string dump_system;
    double eps = 1e-4;
    std::string indicator = "osc";
    int max_generation = 40;
    std::vector<double> eps_sweep;

    /// Throws ConfigError when a mode-specific field is out of range.
    void validate() const;
    /// key=value lines describing every field, in a fixed order.
    std::vector<std::string> echo() const;
};

/// Parses a flat key=value file (blank lines and '#' comments ignored).
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Sets one field from its key (dashes or underscores). Throws ConfigError.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Runs a validated configuration, writing artifacts below cfg.out and the
/// human-readable summary to `log`. Exceptions propagate.
void execute(const RunConfig& cfg, std::ostream& log);

/// Command-line entry point; maps errors to exit codes.
int cli_main(int argc, char** argv);

} // namespace afem
