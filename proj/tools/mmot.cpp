#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmot/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multimarginal repulsive-cost transport: solves, duals and theorem checks"};
    std::string task;
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    app.add_option("task", task, "solve | dual | verify | campaign | continuity")->required();
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out, "output directory (overrides outputs.directory)");
    app.add_option("--seed", seed, "replaces the generator seeds in the measures section");
    app.add_option("--budget", budget, "maximal number of LP variables m^N (overrides solver.budget)");
    CLI11_PARSE(app, argc, argv);

    mmot::io::ExperimentConfig config;
    try {
        auto j = mmot::io::json::parse(mmot::io::read_file(config_path));
        if (j.is_object()) j["task"] = task;
        config = mmot::io::config_from_json(j);
    } catch (const mmot::io::json::parse_error& e) {
        std::cerr << "error: " << config_path << ": invalid JSON: " << e.what() << '\n';
        return mmot::cli::kError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mmot::cli::kError;
    }
    mmot::cli::apply(config, {out, seed, budget});
    const auto base_dir = std::filesystem::absolute(config_path).parent_path();
    return mmot::cli::run_guarded(config, base_dir, std::cout, std::cerr);
}
