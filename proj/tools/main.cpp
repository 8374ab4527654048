#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace rrisk::cli;

int main(int argc, char** argv) {
    CLI::App app{"Robust risk measures on finite scenario spaces"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string scenario_path, config_path, out_path, format = "json";
    bool strict = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    app.add_option("--scenario", scenario_path, "scenario JSON")->required();
    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--out", out_path, "write the machine-readable report here");
    app.add_option("--format", format, "report format for --out")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--strict", strict, "exit 1 when a property check finds a counterexample");
    app.add_option("--seed", seed, "root seed, overrides the config");
    app.add_option("--trials", trials, "sample count for property checks, overrides the config");

    for (const auto& name : subcommands()) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        auto scenario = parse_scenario(scenario_path);
        auto config = parse_config(config_path);
        if (seed) {
            config.seed = *seed;
            config.solver.seed = *seed;
        }
        if (trials) config.trials = *trials;

        auto report = run(command, config, scenario);
        std::cout << render_table(report);
        if (!out_path.empty()) {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw InputError("--out: cannot write " + out_path);
            out << (format == "csv" ? render_csv(report) : render_json(report));
        }
        return strict && report.counterexample ? 1 : 0;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
    } catch (const std::domain_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 2;
}
