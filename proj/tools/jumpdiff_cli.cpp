// Experiment runner CLI: `run <config.json>` executes one experiment and
// writes its artifacts; `plots <dir>` derives tidy per-figure CSVs from them.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <jumpdiff/experiment.hpp>

int main(int argc, char** argv) {
    CLI::App app{"jumpdiff experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string plots_dir;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;

    auto* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config");
    run_cmd->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) { seed_set = true; });
    run_cmd->add_option("--threads", threads, "worker thread cap (0 = hardware)");
    run_cmd->add_option("--out", out_dir, "output directory override");

    auto* plots_cmd = app.add_subcommand("plots", "emit tidy plot CSVs from experiment artifacts");
    plots_cmd->add_option("dir", plots_dir, "artifact directory")->required()->check(CLI::ExistingDirectory);
    plots_cmd->add_option("--out", out_dir, "output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors count as errors, help is not
    }

    try {
        if (run_cmd->parsed()) {
            std::ifstream in(config_path);
            jumpdiff::json config = jumpdiff::json::parse(in);
            const auto result = jumpdiff::run_experiment(
                config, seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                threads >= 0 ? std::optional<int>(threads) : std::nullopt,
                out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));
            std::cout << result.summary;
            return result.exit_code;
        }
        const auto written = jumpdiff::emit_plot_data(plots_dir, out_dir);
        for (const auto& f : written) std::cout << f << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
