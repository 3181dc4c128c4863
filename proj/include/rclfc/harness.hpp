#pragma once

// Closed-loop scenario simulation, frequency settling metrics, transfer of a
// gain from the emulator to a physical model, and robustness sweeps over
// parameter perturbations.

#include "rclfc/disturbance.hpp"
#include "rclfc/lfc_model.hpp"
#include "rclfc/linalg.hpp"
#include "rclfc/risk_lqr.hpp"
#include "rclfc/rng.hpp"
#include "rclfc/sgdmax.hpp"
#include "rclfc/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclfc {

/// u = −K y. Shared by the simulator and by anything that re-derives u.
inline Vector control_from_output(const Matrix& k, const Vector& y) {
    Vector u = k * y;
    return -u;
}

/// Closed-loop rollout record; row t of each matrix is step t.
struct Trajectory {
    Vector time;
    Matrix x;
    Matrix y;
    Matrix u;
    Matrix w;
    bool divergent = false;
    std::uint64_t seed = 0;
    std::uint64_t model_hash = 0;
    std::uint64_t gain_hash = 0;

    Eigen::Index length() const { return time.size(); }

    /// Δf of a 1-based area at step t.
    double frequency(Eigen::Index t, int area) const { return x(t, kStatesPerArea * (area - 1) + kFreqSlot); }
};

inline void check_same_step(const DiscreteModel& model, const Scenario& scenario) {
    if (std::abs(model.dt - scenario.dt) > 1e-12 * std::max(1.0, model.dt)) {
        throw std::invalid_argument("scenario dt " + std::to_string(scenario.dt) + " does not match model dt " +
                                    std::to_string(model.dt));
    }
}

/// x0 = 0, x_{t+1} = A_d x_t + B_ud u_t + B_wd w_t with u_t = −K C x_t.
/// A state overflow truncates the record and flags it divergent.
inline Trajectory simulate_closed_loop(const DiscreteModel& model, const StructuredGain& k, const Scenario& scenario,
                                       std::uint64_t seed) {
    const int n_areas = static_cast<int>(model.n_disturbances());
    scenario.validate(n_areas);
    check_same_step(model, scenario);
    if (k.values().rows() != model.n_inputs() || k.values().cols() != model.n_outputs()) {
        throw std::invalid_argument("simulate_closed_loop: gain shape does not match the model");
    }
    const auto steps = static_cast<Eigen::Index>(scenario.n_steps());
    Trajectory tr;
    tr.seed = seed;
    tr.model_hash = model.hash();
    tr.gain_hash = matrix_hash(k.values());
    tr.time.resize(steps);
    tr.x.resize(steps, model.n_states());
    tr.y.resize(steps, model.n_outputs());
    tr.u.resize(steps, model.n_inputs());
    tr.w.resize(steps, n_areas);

    const DisturbanceModel source = scenario;
    Rng rng = make_stream(seed, StreamTag::scenario, {0});
    Vector x = Vector::Zero(model.n_states());
    for (Eigen::Index t = 0; t < steps; ++t) {
        const Vector y = model.c * x;
        const Vector u = control_from_output(k.values(), y);
        const Vector w = sample_disturbance(source, static_cast<std::size_t>(t), n_areas, rng);
        tr.time(t) = static_cast<double>(t) * scenario.dt;
        tr.x.row(t) = x.transpose();
        tr.y.row(t) = y.transpose();
        tr.u.row(t) = u.transpose();
        tr.w.row(t) = w.transpose();
        Vector next = model.a * x;
        next += model.b_u * u;
        next += model.b_w * w;
        if (!(next.cwiseAbs().maxCoeff() <= kOverflowGuard)) {
            const Eigen::Index kept = t + 1;
            tr.time.conservativeResize(kept);
            tr.x.conservativeResize(kept, Eigen::NoChange);
            tr.y.conservativeResize(kept, Eigen::NoChange);
            tr.u.conservativeResize(kept, Eigen::NoChange);
            tr.w.conservativeResize(kept, Eigen::NoChange);
            tr.divergent = true;
            break;
        }
        x = next;
    }
    return tr;
}

struct SettlingMetrics {
    double peak = 0.0;      // max |Δf|, Hz
    double settling = 0.0;  // s; equals the window length when never settled
    bool settled = true;
};

/// Peak |Δf| of one area and the time after which it stays within ±band.
inline SettlingMetrics settling_metrics(const Trajectory& tr, double band, int area) {
    if (tr.divergent) {
        throw std::invalid_argument("settling_metrics: trajectory is divergent");
    }
    if (tr.length() == 0) {
        return {};
    }
    const int n_areas = static_cast<int>(tr.w.cols());
    if (area < 1 || area > n_areas) {
        throw std::invalid_argument("settling_metrics: area out of range");
    }
    SettlingMetrics m;
    Eigen::Index last_outside = -1;
    for (Eigen::Index t = 0; t < tr.length(); ++t) {
        const double v = std::abs(tr.frequency(t, area));
        m.peak = std::max(m.peak, v);
        if (v > band) {
            last_outside = t;
        }
    }
    const double dt = tr.length() > 1 ? tr.time(1) - tr.time(0) : 0.0;
    const double window = tr.time(tr.length() - 1) + dt;
    if (last_outside < 0) {
        m.settling = 0.0;
    } else if (last_outside + 1 >= tr.length()) {
        m.settling = window;
        m.settled = false;
    } else {
        m.settling = tr.time(last_outside + 1);
    }
    return m;
}

struct TransferResult {
    Trajectory trajectory;
    GainEvaluation evaluation;
};

/// Runs a gain obtained on the emulator against the physical model.
/// Instability on the physical side is reported in the result.
inline TransferResult transfer_eval(const DiscreteModel& emulator, const DiscreteModel& physical,
                                    const StructuredGain& k, const Scenario& scenario, const CostSpec& spec,
                                    const GaussianDisturbance& noise, std::uint64_t seed) {
    if (emulator.n_states() != physical.n_states() || emulator.n_inputs() != physical.n_inputs() ||
        emulator.c != physical.c) {
        throw std::invalid_argument("transfer_eval: emulator and physical topology differ");
    }
    if (std::abs(emulator.dt - physical.dt) > 1e-12 * std::max(1.0, emulator.dt)) {
        throw std::invalid_argument("transfer_eval: emulator and physical dt differ");
    }
    TransferResult out;
    out.trajectory = simulate_closed_loop(physical, k, scenario, seed);
    const NoiseStats stats = gaussian_noise_stats(physical, noise, spec);
    out.evaluation = exact_evaluate(physical, k.values(), spec, stats);
    return out;
}

/// Everything needed to rebuild a model from (possibly perturbed) parameters.
struct ModelRecipe {
    InterconnectionGraph graph;
    bool include_frequency = false;
    double dt = 0.01;
    DiscretizationMethod method = DiscretizationMethod::euler;

    DiscreteModel build(const AreaParams& params) const {
        return discretize(assemble_network(params, graph, include_frequency), dt, method);
    }
};

struct DrawOutcome {
    AreaParams params;
    double spectral_radius = kInf;
    bool stable = false;
    double peak = 0.0;
    double settling = 0.0;
    bool settled = false;
};

struct SummaryStats {
    double mean = 0.0;
    double max = 0.0;
};

struct RobustnessEntry {
    double fraction = 0.0;
    PerturbMode mode = PerturbMode::uniform_scale;
    int n_draws = 0;
    int n_stable = 0;
    int n_settled = 0;
    SummaryStats peak;
    SummaryStats settling;
    std::vector<DrawOutcome> draws;
};

struct RobustnessReport {
    int area = 3;
    double band = 0.01;
    std::vector<RobustnessEntry> entries;
};

struct RobustnessOptions {
    std::vector<double> fractions{0.0, 0.10, 0.15, 0.20};
    PerturbMode mode = PerturbMode::uniform_scale;
    int n_draws = 1;
    int area = 3;
    double band = 0.01;
};

/// For each fraction: perturb the nominal parameters n_draws times, rebuild
/// the physical model, run the gain on it, and aggregate stability and
/// settling of the watched area. Metrics average over stable draws only.
inline RobustnessReport robustness_sweep(const AreaParams& nominal, const ModelRecipe& recipe, const StructuredGain& k,
                                         const RobustnessOptions& options, const Scenario& scenario,
                                         const CostSpec& spec, const GaussianDisturbance& noise,
                                         std::uint64_t master_seed) {
    if (options.fractions.empty()) {
        throw std::invalid_argument("robustness_sweep: fractions must be nonempty");
    }
    if (options.n_draws < 1) {
        throw std::invalid_argument("robustness_sweep: n_draws must be >= 1");
    }
    std::vector<double> fractions = options.fractions;
    std::sort(fractions.begin(), fractions.end());
    const DiscreteModel emulator = recipe.build(nominal);

    RobustnessReport report;
    report.area = options.area;
    report.band = options.band;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        RobustnessEntry entry;
        entry.fraction = fractions[fi];
        entry.mode = options.mode;
        entry.n_draws = options.n_draws;
        double peak_sum = 0.0;
        double settle_sum = 0.0;
        for (int d = 0; d < options.n_draws; ++d) {
            Rng rng = make_stream(master_seed, StreamTag::perturbation, {fi, static_cast<std::uint64_t>(d)});
            DrawOutcome draw;
            draw.params = perturb_parameters(nominal, entry.fraction, options.mode, rng);
            const DiscreteModel physical = recipe.build(draw.params);
            const TransferResult tr = transfer_eval(emulator, physical, k, scenario, spec, noise,
                                                    master_seed + static_cast<std::uint64_t>(d));
            draw.spectral_radius = tr.evaluation.spectral_radius;
            draw.stable = tr.evaluation.stable && !tr.trajectory.divergent;
            if (draw.stable) {
                const SettlingMetrics m = settling_metrics(tr.trajectory, options.band, options.area);
                draw.peak = m.peak;
                draw.settling = m.settling;
                draw.settled = m.settled;
                ++entry.n_stable;
                entry.n_settled += m.settled ? 1 : 0;
                peak_sum += m.peak;
                settle_sum += m.settling;
                entry.peak.max = std::max(entry.peak.max, m.peak);
                entry.settling.max = std::max(entry.settling.max, m.settling);
            }
            entry.draws.push_back(draw);
        }
        if (entry.n_stable > 0) {
            entry.peak.mean = peak_sum / entry.n_stable;
            entry.settling.mean = settle_sum / entry.n_stable;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace rclfc
