#include "twistlab/cli_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

constexpr int exit_usage = 2;
constexpr int exit_error = 3;

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Twisted waveguide spectral laboratory"};
    std::string config_path;
    std::string out_dir;
    std::string command_name;
    int threads = 0;
    bool override_square = false;
    app.add_option("--config", config_path, "run configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides output_dir in the config)");
    app.add_option("--command", command_name,
                   "transverse | spectrum1d | krein | assemble | sweep | report")
        ->required();
    app.add_option("--threads", threads, "worker threads for the sweep")->check(CLI::PositiveNumber);
    app.add_flag("--override-square", override_square, "accept a square rectangle cross-section");
    CLI11_PARSE(app, argc, argv);

    using namespace twistlab;
    Command command;
    try {
        command = command_from_string(command_name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }

    std::string text = "{}\n";
    if (!config_path.empty()) {
        try {
            text = read_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return exit_usage;
        }
    }

    RunConfig config;
    try {
        config = parse_config(text, override_square);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration:\n";
        for (const auto& v : e.violations())
            std::cerr << "  " << v << "\n";
        if (!out_dir.empty()) {
            try {
                write_error_summary(out_dir, command_name, "invalid configuration", e.violations());
            } catch (const std::exception&) {
            }
        }
        return exit_usage;
    }
    if (threads > 0)
        config.threads = threads;
    if (!out_dir.empty())
        config.output_dir = out_dir;
    if (config.output_dir.empty()) {
        std::cerr << "error: no output directory (use --out or output_dir in the config)\n";
        return exit_usage;
    }

    try {
        const DispatchResult r = dispatch(command, config, text, config.output_dir, std::cout);
        for (const auto& c : r.verdicts)
            std::cout << to_string(c.verdict) << ": " << c.name << " (measured " << format_number(c.measured)
                      << ", margin " << format_number(c.margin) << ")\n";
        std::cout << (r.exit_status == 0 ? "all verdicts pass" : "some verdicts did not pass") << "\n";
        return r.exit_status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        try {
            write_error_summary(config.output_dir, command_name, e.what());
        } catch (const std::exception&) {
        }
        return exit_error;
    }
}
