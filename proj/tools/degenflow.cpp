#include "degenflow/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace degenflow;
    CLI::App app{"Degenerate weighted p-Laplacian flow laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    int jobs = 1;
    std::string out_dir;
    for (const char* name : {"eigen", "solve", "blowup-scan", "verify-exact", "weights-check", "decay-fit"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--jobs", jobs, "concurrent runs for sweeps")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cli::exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    cli::ExperimentConfig cfg;
    try {
        cfg = cli::parse_config_file(config_path);
        if (command != cli::to_string(cfg.command))
            throw Error(ErrorKind::config, "config declares command '" + std::string(cli::to_string(cfg.command)) +
                                               "' but '" + command + "' was requested");
    } catch (const Error& e) {
        nlohmann::ordered_json j{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
        std::cout << j.dump(2) << '\n';
        return cli::exit_config;
    }

    cli::RunOptions opt;
    opt.jobs = jobs;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    auto result = cli::run_command(cfg, opt);
    std::cout << result.summary.dump(2) << '\n';
    return result.exit_code;
}
