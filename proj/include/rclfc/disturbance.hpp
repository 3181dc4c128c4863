#pragma once

// Load-deviation sources: i.i.d. gaussian noise, scripted step scenarios
// (optionally with gaussian background), and recorded traces.

#include "rclfc/linalg.hpp"
#include "rclfc/rng.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace rclfc {

/// i.i.d. N(mean, covariance) load deviation per step.
class GaussianDisturbance {
public:
    GaussianDisturbance(Vector mean, Matrix covariance) : mean_(std::move(mean)), cov_(std::move(covariance)) {
        if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
            throw std::invalid_argument("gaussian disturbance: covariance must be " + std::to_string(mean_.size()) +
                                        "x" + std::to_string(mean_.size()));
        }
        if (!is_psd(cov_)) {
            throw std::invalid_argument("gaussian disturbance: covariance must be symmetric PSD");
        }
        factor_ = psd_factor(cov_);
    }

    /// Zero mean, std² on the diagonal.
    static GaussianDisturbance isotropic(Eigen::Index n, double std_dev) {
        return GaussianDisturbance(Vector::Zero(n), Matrix::Identity(n, n) * (std_dev * std_dev));
    }

    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return cov_; }
    Eigen::Index dim() const { return mean_.size(); }
    /// L with L Lᵀ = covariance.
    const Matrix& factor() const { return factor_; }

    Vector sample(Rng& rng) const {
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector z(dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z(i) = normal(rng);
        }
        return mean_ + factor_ * z;
    }

private:
    Vector mean_;
    Matrix cov_;
    Matrix factor_;
};

struct LoadStep {
    int area = 1;               // 1-based
    double onset = 0.0;         // s
    double magnitude = 0.0;     // p.u.
    std::optional<double> offset;  // s, step removed at this time
};

/// Scripted load steps over a fixed window.
struct Scenario {
    double duration = 20.0;
    double dt = 0.01;
    std::vector<LoadStep> steps;
    std::optional<GaussianDisturbance> background;

    std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

    void validate(int n_areas) const {
        std::string problems;
        if (!(dt > 0.0)) {
            problems += "\n  - dt must be > 0";
        }
        if (!(duration > 0.0)) {
            problems += "\n  - duration must be > 0";
        }
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& s = steps[i];
            const std::string tag = "\n  - step " + std::to_string(i) + ": ";
            if (s.area < 1 || s.area > n_areas) {
                problems += tag + "area " + std::to_string(s.area) + " outside [1, " + std::to_string(n_areas) + "]";
            }
            if (!(s.onset >= 0.0 && s.onset < duration)) {
                problems += tag + "onset must be in [0, duration)";
            }
            if (s.offset && !(*s.offset > s.onset)) {
                problems += tag + "offset must be after onset";
            }
        }
        if (background && background->dim() != n_areas) {
            problems += "\n  - background dimension does not match the number of areas";
        }
        if (!problems.empty()) {
            throw std::invalid_argument("invalid scenario:" + problems);
        }
    }

    /// Deterministic part of the load at step index t.
    Vector step_load(std::size_t t, int n_areas) const {
        Vector w = Vector::Zero(n_areas);
        const double time = static_cast<double>(t) * dt;
        // Onsets that sit on the grid switch on at exactly that step.
        const double eps = 1e-9 * dt;
        for (const auto& s : steps) {
            const bool on = time + eps >= s.onset && (!s.offset || time + eps < *s.offset);
            if (on) {
                w(s.area - 1) += s.magnitude;
            }
        }
        return w;
    }
};

/// One large step per area at a random onset, the protocol used for the
/// 20-second tests.
inline Scenario default_scenario(int n_areas, double duration, double dt, std::uint64_t seed,
                                 double magnitude = 0.1) {
    Scenario sc;
    sc.duration = duration;
    sc.dt = dt;
    Rng rng = make_stream(seed, StreamTag::scenario);
    std::uniform_real_distribution<double> onset(1.0, 0.75 * duration);
    for (int a = 1; a <= n_areas; ++a) {
        const double t = std::round(onset(rng) / dt) * dt;
        sc.steps.push_back(LoadStep{a, t, magnitude, std::nullopt});
    }
    return sc;
}

/// Recorded load deviations, one row per step.
class TraceDisturbance {
public:
    explicit TraceDisturbance(Matrix rows) : rows_(std::move(rows)) {}
    const Matrix& rows() const { return rows_; }
    Eigen::Index length() const { return rows_.rows(); }
    Eigen::Index dim() const { return rows_.cols(); }

private:
    Matrix rows_;
};

using DisturbanceModel = std::variant<GaussianDisturbance, Scenario, TraceDisturbance>;

inline Vector sample_disturbance(const DisturbanceModel& model, std::size_t t, int n_areas, Rng& rng) {
    return std::visit(
        [&](const auto& m) -> Vector {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianDisturbance>) {
                return m.sample(rng);
            } else if constexpr (std::is_same_v<T, Scenario>) {
                Vector w = m.step_load(t, n_areas);
                if (m.background) {
                    w += m.background->sample(rng);
                }
                return w;
            } else {
                if (static_cast<Eigen::Index>(t) >= m.length()) {
                    throw std::out_of_range("trace disturbance exhausted at step " + std::to_string(t) + " (length " +
                                            std::to_string(m.length()) + ")");
                }
                return m.rows().row(static_cast<Eigen::Index>(t)).transpose();
            }
        },
        model);
}

inline bool is_gaussian(const DisturbanceModel& model) { return std::holds_alternative<GaussianDisturbance>(model); }

}  // namespace rclfc
