#pragma once

#include "twistlab/convergence.hpp"
#include "twistlab/json_writer.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistlab {

inline constexpr int summary_schema_version = 1;

class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

struct KreinSettings {
    std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05, 0.025};
    int nodes = 400;
    std::vector<double> lemma_epsilons{0.4, 0.2, 0.1, 0.05};
};

struct RunConfig {
    CrossSectionSpec cross_section;
    TwistKind twist_kind = TwistKind::bump;
    TwistParams twist_params;
    double half_width = 12.0;
    int n_points = 1201;
    int min_support_intervals = 20;
    int n_modes = 6;
    std::vector<double> epsilons{0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05};
    double k2 = -1.0;
    Tolerances tol;
    KreinSettings krein;
    int spectrum_count = 10;
    int positivity_samples = 100;
    int norm_max_steps = 1600;
    bool truncation_check = true;
    int threads = 1;
    std::string output_dir;
};

// JSON document (comments allowed). Every violation is collected before
// ConfigError is thrown; unknown keys are violations.
RunConfig parse_config(const std::string& text, bool override_square = false);

Json config_to_json(const RunConfig& config);
SweepConfig to_sweep_config(const RunConfig& config);

enum class Command { transverse, spectrum1d, krein, assemble, sweep, report };
Command command_from_string(const std::string& name);
std::string to_string(Command c);

Json check_to_json(const Check& c);

Json report_to_json(const ConvergenceReport& report);
// Rows, rates and checks are rebuilt by re-running the summary on the stored rows.
ConvergenceReport report_from_json(const Json& j);

std::string sweep_csv(const ConvergenceReport& report);

struct DispatchResult {
    int exit_status = 0;  // 0 iff every verdict passes
    std::vector<Check> verdicts;
    std::vector<std::string> files;  // relative to the output directory
    Json summary;
};

// Runs one command, writing its artifacts, the verbatim config text and
// summary.json into out_dir. Module errors propagate as exceptions.
DispatchResult dispatch(Command command, const RunConfig& config, const std::string& config_text,
                        const std::filesystem::path& out_dir, std::ostream& log);

// summary.json for a run that failed before producing verdicts.
void write_error_summary(const std::filesystem::path& out_dir, const std::string& command,
                         const std::string& message, const std::vector<std::string>& details = {});

}  // namespace twistlab
