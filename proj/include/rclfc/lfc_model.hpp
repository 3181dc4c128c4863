#pragma once

// Multi-area load frequency control model: per-area blocks, Kronecker
// assembly over the interconnection graph, discretization, and parameter
// perturbation for building a "physical" model around a nominal emulator.

#include "rclfc/linalg.hpp"
#include "rclfc/rng.hpp"
#include "rclfc/topology.hpp"

#include <array>
#include <random>
#include <stdexcept>
#include <string>

namespace rclfc {

/// Identical-area physical parameters (p.u. / Hz / s).
struct AreaParams {
    double inertia = 10.0;       // M_a, s·p.u.
    double damping = 1.0;        // D, p.u./Hz
    double droop = 0.05;         // R_d, Hz/p.u.
    double gov_turbine_T = 0.4;  // combined governor-turbine lag, s
    double k_tie = 1.0;          // tie-line synchronizing coefficient, p.u./Hz
    double bias = 21.0;          // β, p.u./Hz
    bool bias_from_rule = true;  // β = D + 1/R_d

    static AreaParams nominal() { return AreaParams{}.with_rule_bias(); }

    AreaParams with_rule_bias() const {
        AreaParams p = *this;
        p.bias_from_rule = true;
        p.bias = p.damping + 1.0 / p.droop;
        return p;
    }

    /// k_tie may be zero (decoupled areas); everything else must be positive.
    void validate() const {
        std::string problems;
        auto check = [&problems](const char* name, double v, bool allow_zero) {
            if (!(allow_zero ? v >= 0.0 : v > 0.0) || !std::isfinite(v)) {
                problems += std::string("\n  - ") + name + (allow_zero ? " must be >= 0" : " must be > 0");
            }
        };
        check("inertia", inertia, false);
        check("damping", damping, false);
        check("droop", droop, false);
        check("gov_turbine_T", gov_turbine_T, false);
        check("k_tie", k_tie, true);
        check("bias", bias, false);
        if (!problems.empty()) {
            throw std::invalid_argument("invalid area parameters:" + problems);
        }
    }
};

struct AreaBlocks {
    Matrix a1;  // 4x4 local dynamics
    Matrix a2;  // 4x4 coupling, multiplied by the Laplacian
    Matrix bu;  // 4x1 AGC input
    Matrix bw;  // 4x1 load disturbance input
};

/// Per-area blocks for the state [Δf, ΔP_G, ΔP_tie, ∫ACE]:
///   Δḟ    = (−D Δf + ΔP_G − ΔP_tie − ΔP_L) / M_a
///   ΔṖ_G  = (−Δf / R_d − ΔP_G + ΔP_C) / T
///   ΔṖ_tie = k_tie Σ_j (Δf_i − Δf_j)          (via Laplacian ⊗ A2)
///   ż     = β Δf + ΔP_tie
inline AreaBlocks build_area_blocks(const AreaParams& p) {
    p.validate();
    AreaBlocks b;
    const double m = p.inertia;
    const double t = p.gov_turbine_T;
    b.a1 = Matrix::Zero(kStatesPerArea, kStatesPerArea);
    b.a1(kFreqSlot, kFreqSlot) = -p.damping / m;
    b.a1(kFreqSlot, kGenSlot) = 1.0 / m;
    b.a1(kFreqSlot, kTieSlot) = -1.0 / m;
    b.a1(kGenSlot, kFreqSlot) = -1.0 / (p.droop * t);
    b.a1(kGenSlot, kGenSlot) = -1.0 / t;
    b.a1(kAceSlot, kFreqSlot) = p.bias;
    b.a1(kAceSlot, kTieSlot) = 1.0;

    b.a2 = Matrix::Zero(kStatesPerArea, kStatesPerArea);
    b.a2(kTieSlot, kFreqSlot) = p.k_tie;

    b.bu = Matrix::Zero(kStatesPerArea, 1);
    b.bu(kGenSlot, 0) = 1.0 / t;

    b.bw = Matrix::Zero(kStatesPerArea, 1);
    b.bw(kFreqSlot, 0) = -1.0 / m;
    return b;
}

struct ContinuousModel {
    Matrix a;    // 4N x 4N
    Matrix b_u;  // 4N x N
    Matrix b_w;  // 4N x N
    Matrix c;    // p x 4N

    Eigen::Index n_states() const { return a.rows(); }
    Eigen::Index n_inputs() const { return b_u.cols(); }
    Eigen::Index n_outputs() const { return c.rows(); }
};

struct DiscreteModel {
    Matrix a;
    Matrix b_u;
    Matrix b_w;
    Matrix c;
    double dt = 0.0;

    Eigen::Index n_states() const { return a.rows(); }
    Eigen::Index n_inputs() const { return b_u.cols(); }
    Eigen::Index n_outputs() const { return c.rows(); }
    Eigen::Index n_disturbances() const { return b_w.cols(); }

    /// A_d − B_ud K C.
    Matrix closed_loop(const Matrix& k) const {
        if (k.rows() != n_inputs() || k.cols() != n_outputs()) {
            throw std::invalid_argument("closed_loop: gain is " + shape_string(k) + ", expected " +
                                        std::to_string(n_inputs()) + "x" + std::to_string(n_outputs()));
        }
        return a - b_u * k * c;
    }

    std::uint64_t hash() const {
        std::uint64_t h = matrix_hash(a);
        h = matrix_hash(b_u, h);
        h = matrix_hash(b_w, h);
        h = matrix_hash(c, h);
        Matrix step(1, 1);
        step(0, 0) = dt;
        return matrix_hash(step, h);
    }
};

inline ContinuousModel assemble_network(const AreaParams& params, const InterconnectionGraph& graph,
                                        bool include_frequency) {
    const AreaBlocks blocks = build_area_blocks(params);
    const int n = graph.n_areas();
    const Matrix eye = Matrix::Identity(n, n);
    const Matrix lap = build_laplacian(graph);
    ContinuousModel m;
    m.a = Eigen::kroneckerProduct(eye, blocks.a1).eval() + Eigen::kroneckerProduct(lap, blocks.a2).eval();
    m.b_u = Eigen::kroneckerProduct(eye, blocks.bu).eval();
    m.b_w = Eigen::kroneckerProduct(eye, blocks.bw).eval();
    m.c = build_output_matrix(graph, include_frequency);
    return m;
}

enum class DiscretizationMethod { euler, exact };

/// euler: (I + dt A, dt B). exact: zero-order hold via the exponential of
/// the augmented matrix [[A, B], [0, 0]]·dt, which needs no inverse of A.
inline DiscreteModel discretize(const ContinuousModel& m, double dt,
                                DiscretizationMethod method = DiscretizationMethod::euler) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("discretize: dt must be > 0");
    }
    const Eigen::Index n = m.a.rows();
    DiscreteModel d;
    d.c = m.c;
    d.dt = dt;
    if (method == DiscretizationMethod::euler) {
        d.a = Matrix::Identity(n, n) + dt * m.a;
        d.b_u = dt * m.b_u;
        d.b_w = dt * m.b_w;
        return d;
    }
    const Eigen::Index nu = m.b_u.cols();
    const Eigen::Index nw = m.b_w.cols();
    Matrix aug = Matrix::Zero(n + nu + nw, n + nu + nw);
    aug.topLeftCorner(n, n) = m.a * dt;
    aug.block(0, n, n, nu) = m.b_u * dt;
    aug.block(0, n + nu, n, nw) = m.b_w * dt;
    const Matrix e = aug.exp();
    d.a = e.topLeftCorner(n, n);
    d.b_u = e.block(0, n, n, nu);
    d.b_w = e.block(0, n + nu, n, nw);
    return d;
}

enum class PerturbMode { uniform_scale, random_sign };

/// Scales every physical parameter by (1 + fraction) or (1 ± fraction) with
/// an independent sign per field. β is re-derived when it follows the rule.
inline AreaParams perturb_parameters(const AreaParams& params, double fraction, PerturbMode mode, Rng& rng) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("perturb_parameters: fraction must be in [0, 1)");
    }
    std::array<double, 6> factor{};
    if (mode == PerturbMode::uniform_scale) {
        factor.fill(1.0 + fraction);
    } else {
        std::bernoulli_distribution coin(0.5);
        for (auto& f : factor) {
            f = 1.0 + (coin(rng) ? fraction : -fraction);
        }
    }
    AreaParams out = params;
    out.inertia *= factor[0];
    out.damping *= factor[1];
    out.droop *= factor[2];
    out.gov_turbine_T *= factor[3];
    out.k_tie *= factor[4];
    out.bias *= factor[5];
    if (out.bias_from_rule) {
        out = out.with_rule_bias();
    }
    out.validate();
    return out;
}

inline const char* to_string(PerturbMode mode) {
    return mode == PerturbMode::uniform_scale ? "uniform_scale" : "random_sign";
}

inline const char* to_string(DiscretizationMethod method) {
    return method == DiscretizationMethod::euler ? "euler" : "exact";
}

}  // namespace rclfc
