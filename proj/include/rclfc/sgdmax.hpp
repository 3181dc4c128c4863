#pragma once

// Zeroth-order policy search for structured static output feedback:
// random directions on the pattern's unit sphere, the one-point policy
// gradient estimate with a max-oracle over the dual variable, and the
// stochastic-gradient-descent-with-max-oracle training loop.

#include "rclfc/disturbance.hpp"
#include "rclfc/lfc_model.hpp"
#include "rclfc/linalg.hpp"
#include "rclfc/risk_lqr.hpp"
#include "rclfc/rng.hpp"
#include "rclfc/topology.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rclfc {

/// Feedback matrix whose entries outside the pattern are exactly zero.
class StructuredGain {
public:
    StructuredGain(Matrix values, StructurePattern pattern) : values_(std::move(values)), pattern_(std::move(pattern)) {
        if (values_.rows() != pattern_.rows() || values_.cols() != pattern_.cols()) {
            throw std::invalid_argument("structured gain: values are " + shape_string(values_) +
                                        " but the pattern is " + std::to_string(pattern_.rows()) + "x" +
                                        std::to_string(pattern_.cols()));
        }
        if (!pattern_.conforms(values_)) {
            throw std::invalid_argument("structured gain: nonzero entry outside the pattern");
        }
    }

    static StructuredGain zero(const StructurePattern& pattern) {
        return StructuredGain(Matrix::Zero(pattern.rows(), pattern.cols()), pattern);
    }

    const Matrix& values() const { return values_; }
    const StructurePattern& pattern() const { return pattern_; }

private:
    Matrix values_;
    StructurePattern pattern_;
};

/// Gaussian fill of the free entries, normalized to unit Frobenius norm.
inline Matrix sample_structured_direction(const StructurePattern& pattern, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix u = Matrix::Zero(pattern.rows(), pattern.cols());
    const auto support = pattern.support();
    double norm = 0.0;
    while (norm == 0.0) {
        for (const auto& [a, b] : support) {
            u(a, b) = normal(rng);
        }
        norm = u.norm();
    }
    return u / norm;
}

enum class EvaluatorKind { monte_carlo, lyapunov };

inline const char* to_string(EvaluatorKind kind) {
    return kind == EvaluatorKind::monte_carlo ? "monte_carlo" : "lyapunov";
}

/// Evaluates a gain on a fixed model: Monte-Carlo rollouts or the exact
/// Lyapunov oracle. Holds its inputs by value.
class GainEvaluator {
public:
    GainEvaluator(DiscreteModel model, CostSpec spec, NoiseStats stats, DisturbanceModel disturbance,
                  EvalBudget budget, EvaluatorKind kind)
        : model_(std::move(model)),
          spec_(std::move(spec)),
          stats_(std::move(stats)),
          disturbance_(std::move(disturbance)),
          budget_(budget),
          kind_(kind) {
        spec_.validate(model_.n_outputs(), model_.n_inputs());
        if (kind_ == EvaluatorKind::monte_carlo) {
            budget_.validate();
        }
    }

    GainEvaluation operator()(const Matrix& k, std::uint64_t seed) const {
        if (kind_ == EvaluatorKind::lyapunov) {
            return exact_evaluate(model_, k, spec_, stats_);
        }
        return mc_evaluate(model_, k, spec_, stats_, disturbance_, budget_, seed);
    }

    GainEvaluator with_kind(EvaluatorKind kind) const {
        GainEvaluator copy = *this;
        copy.kind_ = kind;
        return copy;
    }

    GainEvaluator with_budget(EvalBudget budget) const {
        GainEvaluator copy = *this;
        copy.budget_ = budget;
        return copy;
    }

    const DiscreteModel& model() const { return model_; }
    const CostSpec& spec() const { return spec_; }
    const NoiseStats& stats() const { return stats_; }
    const DisturbanceModel& disturbance() const { return disturbance_; }
    const EvalBudget& budget() const { return budget_; }
    EvaluatorKind kind() const { return kind_; }

private:
    DiscreteModel model_;
    CostSpec spec_;
    NoiseStats stats_;
    DisturbanceModel disturbance_;
    EvalBudget budget_;
    EvaluatorKind kind_;
};

struct ZopgSample {
    Matrix gradient;  // (n_K / r) 𝓛(K + rU, λ′) U; empty when unstable
    double lagrangian = kInf;
    double lambda = 0.0;
    GainEvaluation eval;

    bool ok() const { return eval.stable && std::isfinite(lagrangian); }
};

/// One-point zeroth-order estimate of the gradient of the max-oracle value
/// along direction U. The perturbed gain K + rU shares the pattern of K.
inline ZopgSample zopg(const GainEvaluator& evaluator, const StructuredGain& k, const Matrix& u, double r,
                       std::uint64_t eval_seed) {
    if (!(r > 0.0)) {
        throw std::invalid_argument("zopg: smoothing radius must be > 0");
    }
    if (!k.pattern().conforms(u)) {
        throw std::invalid_argument("zopg: direction does not follow the gain pattern");
    }
    ZopgSample out;
    out.eval = evaluator(k.values() + r * u, eval_seed);
    if (!out.eval.stable) {
        return out;
    }
    out.lambda = max_oracle(out.eval, evaluator.spec());
    out.lagrangian = out.eval.lagrangian_at(out.lambda);
    const double n_k = static_cast<double>(k.pattern().n_nonzero());
    out.gradient = (n_k / r * out.lagrangian) * u;
    return out;
}

struct BacktrackConfig {
    bool enabled = true;
    double shrink = 0.5;
    int max_tries = 10;
};

struct TrainConfig {
    double eta = 1e-4;
    double r = 0.1;
    int samples = 100;      // M
    int iterations = 1000;  // J
    double epsilon = 1e-2;  // reporting only
    std::uint64_t master_seed = 1;
    EvalBudget budget{20000, 200, 1};
    EvaluatorKind evaluator = EvaluatorKind::monte_carlo;
    EvaluatorKind log_evaluator = EvaluatorKind::lyapunov;
    BacktrackConfig backtrack;
    bool common_random_numbers = false;
    int snapshot_every = 0;  // 0: initial and final only
    bool record_wall_time = false;

    void validate() const {
        std::string problems;
        if (!(eta >= 0.0)) {
            problems += "\n  - eta must be >= 0";
        }
        if (!(r > 0.0)) {
            problems += "\n  - r must be > 0";
        }
        if (samples < 1) {
            problems += "\n  - M must be >= 1";
        }
        if (iterations < 1) {
            problems += "\n  - J must be >= 1";
        }
        if (budget.horizon <= budget.burn_in) {
            problems += "\n  - horizon must exceed burn_in";
        }
        if (budget.n_rollouts < 1) {
            problems += "\n  - n_rollouts must be >= 1";
        }
        if (backtrack.enabled && !(backtrack.shrink > 0.0 && backtrack.shrink < 1.0)) {
            problems += "\n  - backtrack shrink factor must be in (0, 1)";
        }
        if (backtrack.max_tries < 0) {
            problems += "\n  - backtrack max_tries must be >= 0";
        }
        if (snapshot_every < 0) {
            problems += "\n  - snapshot_every must be >= 0";
        }
        if (!problems.empty()) {
            throw std::invalid_argument("invalid training configuration:" + problems);
        }
    }
};

struct TrainRecord {
    int iter = 0;
    double r0 = kInf;
    double rc = kInf;
    double lambda = 0.0;
    double grad_norm = 0.0;
    double spectral_radius = kInf;
    double elapsed_s = 0.0;
    double step_size = 0.0;   // η actually applied, 0 when the step was rejected
    int unstable_samples = 0;
};

struct TrainLog {
    std::vector<TrainRecord> records;  // records[0] is the initial gain
    std::vector<std::pair<int, Matrix>> snapshots;

    /// (max − min) / mean of r0 over the trailing `fraction` of iterations.
    double trailing_variation(double fraction = 0.1) const {
        if (records.size() < 2) {
            return 0.0;
        }
        const std::size_t iters = records.size() - 1;
        const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * iters)));
        double lo = kInf;
        double hi = -kInf;
        double sum = 0.0;
        for (std::size_t i = records.size() - window; i < records.size(); ++i) {
            lo = std::min(lo, records[i].r0);
            hi = std::max(hi, records[i].r0);
            sum += records[i].r0;
        }
        return (hi - lo) / (sum / static_cast<double>(window));
    }
};

struct TrainResult {
    StructuredGain gain;
    TrainLog log;
};

namespace detail {

inline std::uint64_t derived_seed(std::uint64_t master, StreamTag tag, std::initializer_list<std::uint64_t> idx) {
    Rng rng = make_stream(master, tag, idx);
    return rng();
}

}  // namespace detail

/// Stochastic gradient descent with max-oracle over λ ∈ {0, Λ}. Each
/// iteration averages M one-point estimates and takes a step of size η,
/// projecting back onto the pattern. With backtracking, an unstable
/// candidate is retried with η shrunk; an iteration whose perturbed
/// evaluations hit the instability sentinel leaves the iterate unchanged.
inline TrainResult sgdmax_train(const GainEvaluator& evaluator, const StructuredGain& k0, const TrainConfig& config) {
    config.validate();
    const DiscreteModel& model = evaluator.model();
    const NoiseStats& stats = evaluator.stats();
    const StructurePattern& pattern = k0.pattern();
    if (k0.values().rows() != model.n_inputs() || k0.values().cols() != model.n_outputs()) {
        throw std::invalid_argument("sgdmax_train: initial gain shape does not match the model");
    }
    const double radius0 = closed_loop_radius(model, k0.values(), stats);
    if (!(radius0 < 1.0)) {
        throw std::invalid_argument("sgdmax_train: initial gain is not stabilizing (spectral radius " +
                                    std::to_string(radius0) + ")");
    }

    const GainEvaluator train_eval = evaluator.with_kind(config.evaluator);
    const GainEvaluator log_eval = evaluator.with_kind(config.log_evaluator);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&]() {
        if (!config.record_wall_time) {
            return 0.0;
        }
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    auto make_record = [&](int iter, const Matrix& k) {
        const GainEvaluation e =
            log_eval(k, detail::derived_seed(config.master_seed, StreamTag::logging, {static_cast<std::uint64_t>(iter)}));
        TrainRecord rec;
        rec.iter = iter;
        rec.r0 = e.r0;
        rec.rc = e.rc;
        rec.lambda = e.stable ? max_oracle(e, evaluator.spec()) : evaluator.spec().lambda_max;
        rec.spectral_radius = e.spectral_radius;
        return rec;
    };

    Matrix k = k0.values();
    TrainLog log;
    log.records.push_back(make_record(0, k));
    log.snapshots.emplace_back(0, k);

    for (int j = 0; j < config.iterations; ++j) {
        const auto ju = static_cast<std::uint64_t>(j);
        const StructuredGain current(k, pattern);
        Matrix grad = Matrix::Zero(k.rows(), k.cols());
        int unstable = 0;
        for (int s = 0; s < config.samples; ++s) {
            const auto su = static_cast<std::uint64_t>(s);
            Rng dir_rng = make_stream(config.master_seed, StreamTag::direction, {ju, su});
            const Matrix u = sample_structured_direction(pattern, dir_rng);
            const std::uint64_t eval_seed =
                config.common_random_numbers
                    ? detail::derived_seed(config.master_seed, StreamTag::disturbance, {ju})
                    : detail::derived_seed(config.master_seed, StreamTag::disturbance, {ju, su});
            const ZopgSample sample = zopg(train_eval, current, u, config.r, eval_seed);
            if (!sample.ok()) {
                ++unstable;
                continue;
            }
            grad += sample.gradient;
        }
        grad /= static_cast<double>(config.samples);

        double step = config.eta;
        Matrix candidate = k;
        bool accepted = false;
        if (unstable > 0) {
            if (!config.backtrack.enabled) {
                throw std::runtime_error("sgdmax_train: perturbed gain unstable at iteration " + std::to_string(j) +
                                         "; enable backtracking or reduce r");
            }
        } else {
            for (int attempt = 0; attempt <= (config.backtrack.enabled ? config.backtrack.max_tries : 0); ++attempt) {
                candidate = project_onto_pattern(k - step * grad, pattern);
                if (closed_loop_radius(model, candidate, stats) < 1.0) {
                    accepted = true;
                    break;
                }
                if (!config.backtrack.enabled) {
                    throw std::runtime_error("sgdmax_train: iterate became unstable at iteration " +
                                             std::to_string(j));
                }
                step *= config.backtrack.shrink;
            }
        }
        if (accepted) {
            k = candidate;
        }

        TrainRecord rec = make_record(j + 1, k);
        rec.grad_norm = unstable > 0 ? kInf : grad.norm();
        rec.elapsed_s = elapsed();
        rec.step_size = accepted ? step : 0.0;
        rec.unstable_samples = unstable;
        log.records.push_back(rec);
        if (config.snapshot_every > 0 && (j + 1) % config.snapshot_every == 0 && j + 1 != config.iterations) {
            log.snapshots.emplace_back(j + 1, k);
        }
    }
    log.snapshots.emplace_back(config.iterations, k);
    return TrainResult{StructuredGain(k, pattern), std::move(log)};
}

}  // namespace rclfc
