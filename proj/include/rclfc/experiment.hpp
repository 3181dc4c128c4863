#pragma once

// Subcommand pipelines shared by the CLI and the acceptance suite. Each
// computes first and writes its artifacts at the end from a single thread.

#include "rclfc/config.hpp"
#include "rclfc/harness.hpp"
#include "rclfc/io.hpp"
#include "rclfc/risk_lqr.hpp"
#include "rclfc/sgdmax.hpp"

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace rclfc {

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

inline Config apply_overrides(Config cfg, const RunOverrides& ov) {
    if (ov.seed) {
        cfg.train.master_seed = *ov.seed;
    }
    if (ov.out_dir) {
        cfg.output_dir = *ov.out_dir;
        cfg.base_dir.clear();
    }
    return cfg;
}

inline std::filesystem::path output_dir(const Config& cfg) { return cfg.resolve(cfg.output_dir); }

/// Model, cost, noise statistics and disturbance source for one config.
struct Problem {
    DiscreteModel model;
    CostSpec spec;
    NoiseStats stats;
    DisturbanceModel disturbance;
    StructurePattern pattern;
};

inline Problem build_problem(const Config& cfg) {
    const ModelRecipe recipe = cfg.recipe();
    DiscreteModel model = recipe.build(cfg.area);
    CostSpec spec = cfg.cost_spec();
    StructurePattern pattern = build_structure_pattern(recipe.graph);
    if (cfg.disturbance.type == "trace") {
        Matrix rows = read_trace_csv(cfg.resolve(cfg.disturbance.trace_path));
        if (rows.cols() != cfg.graph.n_areas) {
            throw std::invalid_argument("trace has " + std::to_string(rows.cols()) + " columns, expected " +
                                        std::to_string(cfg.graph.n_areas));
        }
        NoiseStats stats = stats_from_load_trace(model, rows, spec);
        return Problem{std::move(model), std::move(spec), std::move(stats), TraceDisturbance(std::move(rows)),
                       std::move(pattern)};
    }
    const GaussianDisturbance noise = cfg.gaussian_noise();
    NoiseStats stats = gaussian_noise_stats(model, noise, spec);
    return Problem{std::move(model), std::move(spec), std::move(stats), noise, std::move(pattern)};
}

inline StructuredGain initial_gain(const Config& cfg, const StructurePattern& pattern) {
    if (cfg.k0_path.empty()) {
        return StructuredGain::zero(pattern);
    }
    StructuredGain k = read_gain(cfg.resolve(cfg.k0_path));
    if (!(k.pattern() == pattern)) {
        throw std::invalid_argument("train.K0: mask does not match the graph's structure pattern");
    }
    return k;
}

inline StructuredGain load_gain_for(const std::string& path, const StructurePattern& pattern) {
    StructuredGain k = read_gain(path);
    if (!(k.pattern() == pattern)) {
        throw std::invalid_argument(path + ": mask does not match the graph's structure pattern");
    }
    return k;
}

/// Noise used for exact evaluation on a physical model: the configured
/// gaussian, or the trace's empirical mean and covariance.
inline GaussianDisturbance evaluation_noise(const Problem& problem) {
    if (const auto* g = std::get_if<GaussianDisturbance>(&problem.disturbance)) {
        return *g;
    }
    const Matrix& rows = std::get<TraceDisturbance>(problem.disturbance).rows();
    const Vector mean = rows.colwise().mean().transpose();
    const Matrix centered = rows.rowwise() - mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(rows.rows());
    return GaussianDisturbance(mean, 0.5 * (cov + cov.transpose()));
}

inline TrainResult run_train(const Config& cfg, std::ostream& out) {
    const Problem p = build_problem(cfg);
    const GainEvaluator evaluator(p.model, p.spec, p.stats, p.disturbance, cfg.train.budget, cfg.train.evaluator);
    const TrainResult result = sgdmax_train(evaluator, initial_gain(cfg, p.pattern), cfg.train);

    const auto dir = output_dir(cfg);
    write_text(dir / "train_log.csv", train_log_csv(result.log));
    write_gain(dir / "K_final.json", result.gain);
    if (cfg.train.snapshot_every > 0) {
        json snaps = json::array();
        for (const auto& [iter, k] : result.log.snapshots) {
            snaps.push_back({{"iter", iter}, {"K", gain_to_json(StructuredGain(k, p.pattern))}});
        }
        write_text(dir / "K_snapshots.json", dump_json(snaps));
    }

    const auto& first = result.log.records.front();
    const auto& last = result.log.records.back();
    out << "iterations        " << cfg.train.iterations << "\n"
        << "r0 initial        " << format_number(first.r0) << "\n"
        << "r0 final          " << format_number(last.r0) << "\n"
        << "rc final          " << format_number(last.rc) << "\n"
        << "lambda final      " << format_number(last.lambda) << "\n"
        << "spectral radius   " << format_number(last.spectral_radius) << "\n"
        << "trailing r0 var   " << format_number(result.log.trailing_variation()) << "\n"
        << "wrote             " << (dir / "train_log.csv").string() << ", " << (dir / "K_final.json").string()
        << "\n";
    return result;
}

inline Trajectory run_simulate(const Config& cfg, const StructuredGain& k, std::ostream& out) {
    const Problem p = build_problem(cfg);
    const Scenario scenario = cfg.build_scenario(cfg.train.master_seed);
    const Trajectory tr = simulate_closed_loop(p.model, k, scenario, cfg.train.master_seed);
    const auto dir = output_dir(cfg);
    write_text(dir / "trajectory.csv", trajectory_csv(tr));

    out << "steps             " << tr.length() << (tr.divergent ? " (divergent)" : "") << "\n";
    if (!tr.divergent) {
        out << "area  peak|df|(Hz)  settling(s)\n";
        for (int a = 1; a <= cfg.graph.n_areas; ++a) {
            const SettlingMetrics m = settling_metrics(tr, cfg.robustness.band, a);
            std::ostringstream row;
            row << std::setw(4) << a << "  " << std::setw(12) << std::setprecision(5) << m.peak << "  "
                << std::setw(11) << std::setprecision(5) << m.settling << (m.settled ? "" : " (not settled)");
            out << row.str() << "\n";
        }
    }
    out << "wrote             " << (dir / "trajectory.csv").string() << "\n";
    return tr;
}

inline json run_eval_cost(const Config& cfg, const StructuredGain& k, std::ostream& out) {
    const Problem p = build_problem(cfg);
    const GainEvaluation mc = mc_evaluate(p.model, k.values(), p.spec, p.stats, p.disturbance, cfg.train.budget,
                                          cfg.train.master_seed);
    const GainEvaluation ex = exact_evaluate(p.model, k.values(), p.spec, p.stats);
    auto to_json = [&](const GainEvaluation& e) {
        return json{{"r0", number_or_null(e.r0)},
                    {"rc", number_or_null(e.rc)},
                    {"delta_bar", e.delta_bar},
                    {"stable", e.stable},
                    {"spectral_radius", number_or_null(e.spectral_radius)},
                    {"lambda", e.stable ? max_oracle(e, p.spec) : p.spec.lambda_max},
                    {"lagrangian", number_or_null(e.lagrangian_at(e.stable ? max_oracle(e, p.spec) : 0.0))}};
    };
    json result{{"monte_carlo", to_json(mc)}, {"lyapunov", to_json(ex)}};
    const auto dir = output_dir(cfg);
    write_text(dir / "eval.json", dump_json(result));
    out << "                  monte_carlo            lyapunov\n"
        << "r0                " << std::setw(22) << std::left << format_number(mc.r0) << " " << format_number(ex.r0)
        << "\n"
        << "rc                " << std::setw(22) << format_number(mc.rc) << " " << format_number(ex.rc) << "\n"
        << std::right << "delta_bar         " << format_number(ex.delta_bar) << "\n"
        << "spectral radius   " << format_number(ex.spectral_radius) << "\n"
        << "wrote             " << (dir / "eval.json").string() << "\n";
    return result;
}

inline RobustnessReport run_robustness(const Config& cfg, const StructuredGain& k, std::ostream& out) {
    const Problem p = build_problem(cfg);
    const Scenario scenario = cfg.build_scenario(cfg.train.master_seed);
    const RobustnessReport report = robustness_sweep(cfg.area, cfg.recipe(), k, cfg.robustness, scenario, p.spec,
                                                     evaluation_noise(p), cfg.train.master_seed);
    const auto dir = output_dir(cfg);
    write_text(dir / "robustness.json", dump_json(robustness_to_json(report)));
    out << "fraction  stable/draws  settled  peak|df| mean  settling mean (s)\n";
    for (const auto& e : report.entries) {
        std::ostringstream row;
        row << std::setw(8) << std::setprecision(3) << e.fraction << "  " << std::setw(6) << e.n_stable << "/"
            << std::left << std::setw(5) << e.n_draws << std::right << "  " << std::setw(7) << e.n_settled << "  "
            << std::setw(13) << std::setprecision(5) << e.peak.mean << "  " << std::setw(17) << e.settling.mean;
        out << row.str() << "\n";
    }
    out << "wrote             " << (dir / "robustness.json").string() << "\n";
    return report;
}

inline NoiseStats run_stats(const Config& cfg, const std::string& trace_path, std::ostream& out) {
    const Matrix rows = read_trace_csv(trace_path);
    const DiscreteModel model = cfg.recipe().build(cfg.area);
    const NoiseStats stats = stats_from_load_trace(model, rows, cfg.cost_spec());
    const auto dir = output_dir(cfg);
    write_text(dir / "noise_stats.json", dump_json(noise_stats_to_json(stats)));
    out << "samples           " << rows.rows() << "\n"
        << "m4                " << format_number(stats.m4) << "\n"
        << "tr((W Qc)^2)      " << format_number(stats.trace_wqc_squared()) << "\n"
        << "|M3|              " << format_number(stats.m3.norm()) << "\n"
        << "delta_bar         " << format_number(stats.delta_bar) << "\n"
        << "wrote             " << (dir / "noise_stats.json").string() << "\n";
    return stats;
}

}  // namespace rclfc
