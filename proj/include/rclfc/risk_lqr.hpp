#pragma once

// LQR cost and mean-variance risk for static output feedback u = −K y:
// noise moments, per-step costs, a Monte-Carlo estimator of the ergodic
// averages, an exact Lyapunov-equation oracle for the same limits, and the
// bang-bang maximizer over the dual variable.

#include "rclfc/disturbance.hpp"
#include "rclfc/lfc_model.hpp"
#include "rclfc/linalg.hpp"
#include "rclfc/rng.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclfc {

struct CostSpec {
    Matrix q;            // output weight, p x p, symmetric PSD
    Matrix r_u;          // control weight, m x m, symmetric PD
    double delta = 0.0;  // risk budget
    double lambda_max = 100.0;  // dual upper bound Λ

    void validate(Eigen::Index p, Eigen::Index m) const {
        std::string problems;
        if (q.rows() != p || q.cols() != p) {
            problems += "\n  - Q must be " + std::to_string(p) + "x" + std::to_string(p);
        } else if (!is_psd(q)) {
            problems += "\n  - Q must be symmetric positive semidefinite";
        }
        if (r_u.rows() != m || r_u.cols() != m) {
            problems += "\n  - R must be " + std::to_string(m) + "x" + std::to_string(m);
        } else if (!is_pd(r_u)) {
            problems += "\n  - R must be symmetric positive definite";
        }
        if (!(delta >= 0.0)) {
            problems += "\n  - delta must be >= 0";
        }
        if (!(lambda_max >= 0.0)) {
            problems += "\n  - Lambda must be >= 0";
        }
        if (!problems.empty()) {
            throw std::invalid_argument("invalid cost specification:" + problems);
        }
    }
};

/// Moments of the state-space noise w_s = B_wd w and the quantities derived
/// from them for the reformulated risk constraint.
struct NoiseStats {
    Vector w_bar;        // n
    Matrix w;            // n x n covariance
    Vector m3;           // n, E[(w−w̄)(w−w̄)ᵀ Q_c (w−w̄)]
    double m4 = 0.0;     // E[((w−w̄)ᵀ Q_c (w−w̄) − tr(W Q_c))²]
    Matrix q_c;          // Cᵀ Q C
    double delta_bar = 0.0;  // δ − m4 + 4 tr((W Q_c)²)

    // Output-space forms used by risk_stage: 4 Q C W Cᵀ Q and 4 Q C M3.
    Matrix risk_weight;
    Vector risk_linear;

    double trace_wqc_squared() const {
        const Matrix wq = w * q_c;
        return (wq * wq).trace();
    }
};

/// Assembles NoiseStats from raw moments, output matrix C and weight Q.
inline NoiseStats make_noise_stats(Vector w_bar, Matrix w, Vector m3, double m4, const Matrix& c, const Matrix& q,
                                   double delta) {
    const Eigen::Index n = c.cols();
    if (w_bar.size() != n || w.rows() != n || w.cols() != n || m3.size() != n) {
        throw std::invalid_argument("noise stats: moment dimensions do not match the state dimension " +
                                    std::to_string(n));
    }
    if (q.rows() != c.rows() || q.cols() != c.rows()) {
        throw std::invalid_argument("noise stats: Q does not match the output dimension");
    }
    NoiseStats s;
    s.w_bar = std::move(w_bar);
    s.w = std::move(w);
    s.m3 = std::move(m3);
    s.m4 = m4;
    s.q_c = c.transpose() * q * c;
    s.delta_bar = delta - s.m4 + 4.0 * s.trace_wqc_squared();
    const Matrix qc_out = q * c;
    s.risk_weight = 4.0 * qc_out * s.w * qc_out.transpose();
    s.risk_linear = 4.0 * qc_out * s.m3;
    return s;
}

/// Empirical moments (population normalization) of state-space noise
/// samples, one sample per row.
inline NoiseStats estimate_noise_stats(const Matrix& samples, const Matrix& c, const Matrix& q, double delta) {
    const Eigen::Index count = samples.rows();
    if (count < 2) {
        throw std::invalid_argument("estimate_noise_stats: need at least 2 samples");
    }
    if (samples.cols() != c.cols()) {
        throw std::invalid_argument("estimate_noise_stats: samples have " + std::to_string(samples.cols()) +
                                    " columns, state dimension is " + std::to_string(c.cols()));
    }
    const double inv = 1.0 / static_cast<double>(count);
    const Vector mean = samples.colwise().sum().transpose() * inv;
    const Matrix centered = samples.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered * inv;
    const Matrix q_c = c.transpose() * q * c;
    const double tr_wq = (cov * q_c).trace();

    Vector m3 = Vector::Zero(samples.cols());
    double m4 = 0.0;
    const Matrix weighted = centered * q_c;  // row k: e_kᵀ Q_c
    for (Eigen::Index k = 0; k < count; ++k) {
        const double quad = weighted.row(k).dot(centered.row(k));
        m3 += centered.row(k).transpose() * quad;
        const double dev = quad - tr_wq;
        m4 += dev * dev;
    }
    m3 *= inv;
    m4 *= inv;
    return make_noise_stats(mean, 0.5 * (cov + cov.transpose()), m3, m4, c, q, delta);
}

/// Closed-form moments of B_wd·w for gaussian w: M3 = 0, m4 = 2 tr((W Q_c)²).
inline NoiseStats gaussian_noise_stats(const DiscreteModel& model, const GaussianDisturbance& dist,
                                       const CostSpec& spec) {
    if (dist.dim() != model.n_disturbances()) {
        throw std::invalid_argument("gaussian_noise_stats: disturbance dimension does not match the model");
    }
    const Vector w_bar = model.b_w * dist.mean();
    Matrix w = model.b_w * dist.covariance() * model.b_w.transpose();
    w = 0.5 * (w + w.transpose());
    const Matrix q_c = model.c.transpose() * spec.q * model.c;
    const Matrix wq = w * q_c;
    const double m4 = 2.0 * (wq * wq).trace();
    return make_noise_stats(w_bar, w, Vector::Zero(model.n_states()), m4, model.c, spec.q, spec.delta);
}

/// Moments of a recorded load trace after mapping through B_wd.
inline NoiseStats stats_from_load_trace(const DiscreteModel& model, const Matrix& load_rows, const CostSpec& spec) {
    if (load_rows.cols() != model.n_disturbances()) {
        throw std::invalid_argument("stats_from_load_trace: trace has " + std::to_string(load_rows.cols()) +
                                    " columns, model has " + std::to_string(model.n_disturbances()) + " areas");
    }
    const Matrix mapped = load_rows * model.b_w.transpose();
    return estimate_noise_stats(mapped, model.c, spec.q, spec.delta);
}

inline double stage_cost(const Vector& y, const Vector& u, const CostSpec& spec) {
    if (y.size() != spec.q.rows() || u.size() != spec.r_u.rows()) {
        throw std::invalid_argument("stage_cost: shape mismatch");
    }
    return y.dot(spec.q * y) + u.dot(spec.r_u * u);
}

/// 4 yᵀ Q C W Cᵀ Q y + 4 yᵀ Q C M3.
inline double risk_stage(const Vector& y, const NoiseStats& stats) {
    if (y.size() != stats.risk_weight.rows()) {
        throw std::invalid_argument("risk_stage: shape mismatch");
    }
    return y.dot(stats.risk_weight * y) + y.dot(stats.risk_linear);
}

struct GainEvaluation {
    double r0 = kInf;
    double rc = kInf;
    double delta_bar = 0.0;
    bool stable = false;
    double spectral_radius = kInf;

    /// r0 + λ (rc − δ̄); +∞ for an unstable gain.
    double lagrangian_at(double lambda) const {
        if (!stable || !std::isfinite(r0) || !std::isfinite(rc)) {
            return kInf;
        }
        return r0 + lambda * (rc - delta_bar);
    }

    static GainEvaluation unstable(double radius, double delta_bar) {
        GainEvaluation e;
        e.spectral_radius = radius;
        e.delta_bar = delta_bar;
        return e;
    }
};

/// λ′ = argmax over [0, Λ] of the affine map λ ↦ r0 + λ (rc − δ̄). Ties go to 0.
inline double max_oracle(const GainEvaluation& eval, const CostSpec& spec) {
    return eval.rc <= eval.delta_bar ? 0.0 : spec.lambda_max;
}

namespace detail {

inline Matrix noise_directions(const DiscreteModel& model, const NoiseStats& stats) {
    Matrix dirs(model.n_states(), model.b_w.cols() + stats.w.cols() + 1);
    dirs << model.b_w, stats.w, stats.w_bar;
    return dirs;
}

}  // namespace detail

/// Subsystem of A_d − B_ud K C that is driven by the noise and seen by the
/// output. Modes outside it (the ∫ACE integrators, the conserved sum of tie
/// flows) cannot influence any cost and are excluded from the stability test.
inline RelevantSubspace cost_relevant_subsystem(const DiscreteModel& model, const Matrix& k, const NoiseStats& stats) {
    return relevant_subspace(model.closed_loop(k), detail::noise_directions(model, stats), model.c);
}

inline double closed_loop_radius(const DiscreteModel& model, const Matrix& k, const NoiseStats& stats) {
    const Matrix a_k = model.closed_loop(k);
    if (!a_k.allFinite()) {
        return kInf;
    }
    return spectral_radius(cost_relevant_subsystem(model, k, stats).reduced_a);
}

struct EvalBudget {
    std::size_t horizon = 20000;
    std::size_t burn_in = 200;
    std::size_t n_rollouts = 4;

    void validate() const {
        if (horizon <= burn_in) {
            throw std::invalid_argument("evaluation budget: horizon must exceed burn_in");
        }
        if (n_rollouts < 1) {
            throw std::invalid_argument("evaluation budget: n_rollouts must be >= 1");
        }
    }
};

inline constexpr double kOverflowGuard = 1e12;

namespace detail {

// Load deviations for steps [0, horizon) of one rollout, one column per step.
inline Matrix disturbance_block(const DisturbanceModel& disturbance, std::size_t horizon, int n_areas, Rng& rng) {
    const auto cols = static_cast<Eigen::Index>(horizon);
    if (const auto* gauss = std::get_if<GaussianDisturbance>(&disturbance)) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix z(n_areas, cols);
        for (Eigen::Index t = 0; t < cols; ++t) {
            for (Eigen::Index i = 0; i < n_areas; ++i) {
                z(i, t) = normal(rng);
            }
        }
        Matrix w = gauss->factor() * z;
        w.colwise() += gauss->mean();
        return w;
    }
    Matrix w(n_areas, cols);
    for (Eigen::Index t = 0; t < cols; ++t) {
        w.col(t) = sample_disturbance(disturbance, static_cast<std::size_t>(t), n_areas, rng);
    }
    return w;
}

}  // namespace detail

/// Monte-Carlo estimate of the ergodic averages of stage_cost and risk_stage
/// from x0 = 0, averaging over [burn_in, horizon) and over rollouts. Rollout
/// r draws its disturbances from stream (seed, r).
inline GainEvaluation mc_evaluate(const DiscreteModel& model, const Matrix& k, const CostSpec& spec,
                                  const NoiseStats& stats, const DisturbanceModel& disturbance,
                                  const EvalBudget& budget, std::uint64_t seed) {
    budget.validate();
    const double radius = closed_loop_radius(model, k, stats);
    if (!(radius < 1.0)) {
        return GainEvaluation::unstable(radius, stats.delta_bar);
    }
    const Matrix a_k = model.closed_loop(k);
    const int n_areas = static_cast<int>(model.n_disturbances());
    const Eigen::Index n = model.n_states();
    const auto horizon = static_cast<Eigen::Index>(budget.horizon);
    const auto burn_in = static_cast<Eigen::Index>(budget.burn_in);
    const Eigen::Index kept = horizon - burn_in;

    double cost_sum = 0.0;
    double risk_sum = 0.0;
    Matrix states(n, kept);
    Vector x(n);
    Vector next(n);
    for (std::size_t r = 0; r < budget.n_rollouts; ++r) {
        Rng rng = make_stream(seed, StreamTag::rollout, {r});
        const Matrix forcing = model.b_w * detail::disturbance_block(disturbance, budget.horizon, n_areas, rng);
        x.setZero();
        for (Eigen::Index t = 0; t < horizon; ++t) {
            if (t >= burn_in) {
                states.col(t - burn_in) = x;
            }
            next.noalias() = a_k * x;
            next += forcing.col(t);
            x.swap(next);
            if (!(x.cwiseAbs().maxCoeff() <= kOverflowGuard)) {
                return GainEvaluation::unstable(radius, stats.delta_bar);
            }
        }
        const Matrix y = model.c * states;
        const Matrix u = k * y;
        cost_sum += (y.array() * (spec.q * y).array()).sum() + (u.array() * (spec.r_u * u).array()).sum();
        risk_sum += (y.array() * (stats.risk_weight * y).array()).sum() + (stats.risk_linear.transpose() * y).sum();
    }
    const double samples = static_cast<double>(budget.n_rollouts) * static_cast<double>(kept);
    GainEvaluation e;
    e.r0 = cost_sum / samples;
    e.rc = risk_sum / samples;
    e.delta_bar = stats.delta_bar;
    e.stable = true;
    e.spectral_radius = radius;
    return e;
}

/// Exact stationary values of the same averages from the discrete Lyapunov
/// equation on the cost-relevant subsystem. Returns the unstable sentinel
/// instead of throwing.
inline GainEvaluation exact_evaluate(const DiscreteModel& model, const Matrix& k, const CostSpec& spec,
                                     const NoiseStats& stats) {
    const Matrix a_k = model.closed_loop(k);
    if (!a_k.allFinite()) {
        return GainEvaluation::unstable(kInf, stats.delta_bar);
    }
    const RelevantSubspace sub = cost_relevant_subsystem(model, k, stats);
    const double radius = spectral_radius(sub.reduced_a);
    if (!(radius < 1.0)) {
        return GainEvaluation::unstable(radius, stats.delta_bar);
    }
    const Matrix& basis = sub.basis;
    const Eigen::Index dim = basis.cols();
    Matrix sigma_x = Matrix::Zero(model.n_states(), model.n_states());
    Vector mu_x = Vector::Zero(model.n_states());
    if (dim > 0) {
        const Matrix reduced_cov = basis.transpose() * stats.w * basis;
        const Matrix sigma = solve_discrete_lyapunov(sub.reduced_a, 0.5 * (reduced_cov + reduced_cov.transpose()));
        const Vector mu = (Matrix::Identity(dim, dim) - sub.reduced_a).partialPivLu().solve(basis.transpose() * stats.w_bar);
        sigma_x = basis * sigma * basis.transpose();
        mu_x = basis * mu;
    }
    const Matrix& c = model.c;
    const Matrix s_k = c.transpose() * (spec.q + k.transpose() * spec.r_u * k) * c;
    const Matrix s_r = c.transpose() * stats.risk_weight * c;
    const Vector l_r = c.transpose() * stats.risk_linear;

    GainEvaluation e;
    e.r0 = (s_k * sigma_x).trace() + mu_x.dot(s_k * mu_x);
    e.rc = (s_r * sigma_x).trace() + mu_x.dot(s_r * mu_x) + mu_x.dot(l_r);
    e.delta_bar = stats.delta_bar;
    e.stable = true;
    e.spectral_radius = radius;
    return e;
}

/// Throwing form of exact_evaluate: the oracle is undefined for unstable K.
inline GainEvaluation lyapunov_evaluate(const DiscreteModel& model, const Matrix& k, const CostSpec& spec,
                                        const NoiseStats& stats) {
    GainEvaluation e = exact_evaluate(model, k, spec, stats);
    if (!e.stable) {
        throw std::domain_error("lyapunov_evaluate: closed loop is not stable (spectral radius " +
                                std::to_string(e.spectral_radius) + ")");
    }
    return e;
}

/// Monte-Carlo estimate of the original constraint: the time average of
/// (s_{t+1} − E[s_{t+1} | x_t])² with s = yᵀ Q y, where the conditional mean
/// m_tᵀ Q_c m_t + tr(W Q_c), m_t = A_K x_t + w̄_s, uses the gaussian moments.
inline double mc_risk_original(const DiscreteModel& model, const Matrix& k, const CostSpec& spec,
                               const DisturbanceModel& disturbance, std::size_t horizon, std::size_t burn_in,
                               std::uint64_t seed) {
    if (!is_gaussian(disturbance)) {
        throw std::invalid_argument("mc_risk_original: only the gaussian disturbance has closed-form moments");
    }
    if (horizon <= burn_in) {
        throw std::invalid_argument("mc_risk_original: horizon must exceed burn_in");
    }
    const auto& gauss = std::get<GaussianDisturbance>(disturbance);
    const Matrix a_k = model.closed_loop(k);
    const Matrix q_c = model.c.transpose() * spec.q * model.c;
    const Vector w_bar = model.b_w * gauss.mean();
    const Matrix w = model.b_w * gauss.covariance() * model.b_w.transpose();
    const double tr_wq = (w * q_c).trace();
    const int n_areas = static_cast<int>(model.n_disturbances());

    Rng rng = make_stream(seed, StreamTag::rollout, {0});
    Vector x = Vector::Zero(model.n_states());
    double sum = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const Vector drift = a_k * x;
        const Vector w_t = sample_disturbance(disturbance, t, n_areas, rng);
        const Vector x_next = drift + model.b_w * w_t;
        if (t >= burn_in) {
            const Vector m = drift + w_bar;
            const double conditional = m.dot(q_c * m) + tr_wq;
            const double realized = x_next.dot(q_c * x_next);
            const double dev = realized - conditional;
            sum += dev * dev;
        }
        x = x_next;
        if (!(x.cwiseAbs().maxCoeff() <= kOverflowGuard)) {
            return kInf;
        }
    }
    return sum / static_cast<double>(horizon - burn_in);
}

}  // namespace rclfc
