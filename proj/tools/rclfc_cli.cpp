// Command-line front end: train, simulate, eval-cost, robustness, stats.

#include "rclfc/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "master seed (overrides train.seed)");
    cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
}

rclfc::Config load(const CommonFlags& f) {
    return rclfc::apply_overrides(rclfc::load_config(f.config), rclfc::RunOverrides{f.seed, f.out});
}

/// Gain from --gain, or the zero gain on the config's pattern.
rclfc::StructuredGain gain_or_zero(const rclfc::Config& cfg, const std::string& path) {
    const auto pattern = rclfc::build_structure_pattern(cfg.build_graph());
    return path.empty() ? rclfc::StructuredGain::zero(pattern) : rclfc::load_gain_for(path, pattern);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-constrained structured LQR for multi-area load frequency control"};
    app.require_subcommand(1);

    CommonFlags train_f, sim_f, eval_f, rob_f, stats_f;
    std::string sim_gain, eval_gain, rob_gain, trace;

    auto* train = app.add_subcommand("train", "run SGDmax and write train_log.csv and K_final.json");
    add_common(train, train_f);

    auto* sim = app.add_subcommand("simulate", "simulate the scenario and write trajectory.csv");
    add_common(sim, sim_f);
    sim->add_option("--gain", sim_gain, "K JSON file (default: zero gain)")->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval-cost", "Monte-Carlo and Lyapunov evaluation of a gain");
    add_common(eval, eval_f);
    eval->add_option("--gain", eval_gain, "K JSON file (default: zero gain)")->check(CLI::ExistingFile);

    auto* rob = app.add_subcommand("robustness", "transfer a gain to perturbed models and write robustness.json");
    add_common(rob, rob_f);
    rob->add_option("--gain", rob_gain, "K JSON file")->required()->check(CLI::ExistingFile);

    auto* stats = app.add_subcommand("stats", "estimate noise moments from a load trace");
    add_common(stats, stats_f);
    stats->add_option("--trace", trace, "CSV with header area_1..area_N")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            rclfc::run_train(load(train_f), std::cout);
        } else if (*sim) {
            const auto cfg = load(sim_f);
            rclfc::run_simulate(cfg, gain_or_zero(cfg, sim_gain), std::cout);
        } else if (*eval) {
            const auto cfg = load(eval_f);
            rclfc::run_eval_cost(cfg, gain_or_zero(cfg, eval_gain), std::cout);
        } else if (*rob) {
            const auto cfg = load(rob_f);
            rclfc::run_robustness(cfg, gain_or_zero(cfg, rob_gain), std::cout);
        } else if (*stats) {
            rclfc::run_stats(load(stats_f), trace, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
