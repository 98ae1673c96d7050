#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "greenkam/greenkam.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Green bundles, Lyapunov spectra and weak KAM diagnostics on tori"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir;
    std::int64_t seed_override = -1;

    auto* run_cmd = app.add_subcommand("run", "run a scenario and write its report");
    run_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    run_cmd->add_option("--out", out_dir, "output directory (overrides the scenario)");
    run_cmd->add_option("--seed", seed_override, "seed override");

    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a scenario file");
    validate_cmd->add_option("scenario", scenario_path, "scenario file")->required();

    auto* list_cmd = app.add_subcommand("list-models", "list the built-in models");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_cmd->parsed()) {
            for (const auto& name : greenkam::model_names()) std::cout << name << "\n";
            return 0;
        }
        greenkam::Scenario sc = greenkam::parse_scenario(scenario_path);
        if (validate_cmd->parsed()) {
            std::cout << "ok: model=" << sc.model << " task=" << sc.task << "\n";
            return 0;
        }
        if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
        if (!out_dir.empty()) sc.out_dir = out_dir;
        if (sc.out_dir.empty()) sc.out_dir = "greenkam-out";
        greenkam::Report rep = greenkam::run(sc);
        greenkam::emit_report(rep, sc.out_dir);
        std::cout << rep.text;
        if (rep.exit_code != 0) std::cerr << "greenkam: scenario reported failures\n";
        return rep.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "greenkam: " << e.what() << "\n";
        return 2;
    }
}
