#include "rclfc/harness.hpp"

#include <gtest/gtest.h>

using namespace rclfc;

namespace {

struct LoopSetup {
    ModelRecipe recipe{InterconnectionGraph::chain(6), false, 0.01, DiscretizationMethod::euler};
    DiscreteModel model = recipe.build(AreaParams::nominal());
    StructurePattern pattern = build_structure_pattern(recipe.graph);
    CostSpec spec{Matrix::Identity(6, 6), 0.1 * Matrix::Identity(6, 6), 0.0, 100.0};
    GaussianDisturbance noise = GaussianDisturbance::isotropic(6, 1.0);

    StructuredGain gain(double diag, double off) const {
        Matrix k = Matrix::Zero(6, 6);
        for (int i = 0; i < 6; ++i) {
            k(i, i) = diag;
            if (i > 0) {
                k(i, i - 1) = off;
            }
            if (i < 5) {
                k(i, i + 1) = off;
            }
        }
        return StructuredGain(k, pattern);
    }
};

Scenario area3_step() {
    Scenario sc;
    sc.steps.push_back(LoadStep{3, 3.0, 0.1, std::nullopt});
    return sc;
}

}  // namespace

TEST(Simulate, NoStepsIsIdenticallyZero) {
    const LoopSetup s;
    const Trajectory tr = simulate_closed_loop(s.model, s.gain(0.5, 0.2), Scenario{}, 1);
    EXPECT_EQ(tr.length(), 2000);
    EXPECT_FALSE(tr.divergent);
    EXPECT_EQ(tr.x.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(tr.u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, StepInAreaThreeDepartsAfterOnsetAndCouples) {
    const LoopSetup s;
    const Trajectory tr = simulate_closed_loop(s.model, s.gain(0.5, 0.2), area3_step(), 1);
    for (Eigen::Index t = 0; t <= 300; ++t) {
        EXPECT_EQ(tr.frequency(t, 3), 0.0) << t;
    }
    EXPECT_NE(tr.frequency(302, 3), 0.0);
    const SettlingMetrics m3 = settling_metrics(tr, 0.01, 3);
    EXPECT_GT(m3.peak, 0.0);
    EXPECT_LT(std::abs(tr.frequency(tr.length() - 1, 3)), m3.peak);
    EXPECT_GT(settling_metrics(tr, 0.01, 2).peak, 0.0);
}

TEST(Simulate, ArraysShareLengthAndControlIsReproducible) {
    const LoopSetup s;
    Scenario sc = area3_step();
    sc.background = GaussianDisturbance::isotropic(6, 0.05);
    const StructuredGain k = s.gain(0.7, -0.1);
    const Trajectory tr = simulate_closed_loop(s.model, k, sc, 5);
    ASSERT_EQ(tr.x.rows(), tr.length());
    ASSERT_EQ(tr.y.rows(), tr.length());
    ASSERT_EQ(tr.u.rows(), tr.length());
    ASSERT_EQ(tr.w.rows(), tr.length());
    for (Eigen::Index t = 0; t < tr.length(); t += 37) {
        const Vector y = s.model.c * tr.x.row(t).transpose();
        EXPECT_EQ(y, Vector(tr.y.row(t).transpose()));
        EXPECT_EQ(control_from_output(k.values(), y), Vector(tr.u.row(t).transpose()));
    }
    EXPECT_EQ(tr.model_hash, s.model.hash());
    EXPECT_EQ(tr.gain_hash, matrix_hash(k.values()));
    EXPECT_EQ(tr.seed, 5u);
}

TEST(Simulate, Superposition) {
    const LoopSetup s;
    const StructuredGain k = s.gain(0.5, 0.2);
    Scenario a;
    a.steps.push_back(LoadStep{2, 1.0, 0.05, 6.0});
    Scenario b;
    b.steps.push_back(LoadStep{5, 4.5, -0.08, std::nullopt});
    Scenario both;
    both.steps = {a.steps[0], b.steps[0]};
    const Trajectory ta = simulate_closed_loop(s.model, k, a, 1);
    const Trajectory tb = simulate_closed_loop(s.model, k, b, 1);
    const Trajectory tab = simulate_closed_loop(s.model, k, both, 1);
    EXPECT_LT((tab.x - ta.x - tb.x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Simulate, DivergentIsTruncatedAndFlagged) {
    const LoopSetup s;
    Scenario sc = area3_step();
    sc.steps[0].onset = 0.0;
    const Trajectory tr = simulate_closed_loop(s.model, s.gain(-200.0, 0.0), sc, 1);
    EXPECT_TRUE(tr.divergent);
    EXPECT_LT(tr.length(), 2000);
    EXPECT_THROW(settling_metrics(tr, 0.01, 3), std::invalid_argument);
}

TEST(Simulate, RejectsDtMismatch) {
    const LoopSetup s;
    Scenario sc;
    sc.dt = 0.02;
    EXPECT_THROW(simulate_closed_loop(s.model, s.gain(0.0, 0.0), sc, 1), std::invalid_argument);
}

TEST(Settling, ZeroTrajectory) {
    const LoopSetup s;
    const Trajectory tr = simulate_closed_loop(s.model, s.gain(0.0, 0.0), Scenario{}, 1);
    const SettlingMetrics m = settling_metrics(tr, 0.01, 1);
    EXPECT_EQ(m.peak, 0.0);
    EXPECT_EQ(m.settling, 0.0);
    EXPECT_TRUE(m.settled);
}

TEST(Settling, DecayingExponential) {
    Trajectory tr;
    const Eigen::Index n = 2000;
    tr.time.resize(n);
    tr.x = Matrix::Zero(n, 4);
    tr.w = Matrix::Zero(n, 1);
    for (Eigen::Index t = 0; t < n; ++t) {
        tr.time(t) = 0.01 * static_cast<double>(t);
        tr.x(t, 0) = std::exp(-tr.time(t));
    }
    const SettlingMetrics m = settling_metrics(tr, 0.05, 1);
    EXPECT_NEAR(m.settling, 3.0, 0.011);
    EXPECT_EQ(m.peak, 1.0);
    // Never inside the band: sentinel equals the window length.
    const SettlingMetrics never = settling_metrics(tr, 1e-12, 1);
    EXPECT_FALSE(never.settled);
    EXPECT_NEAR(never.settling, 20.0, 1e-9);
}

TEST(Transfer, IdentityMatchesDirectEvaluation) {
    const LoopSetup s;
    const StructuredGain k = s.gain(0.5, 0.2);
    const TransferResult t = transfer_eval(s.model, s.model, k, area3_step(), s.spec, s.noise, 3);
    const Trajectory direct = simulate_closed_loop(s.model, k, area3_step(), 3);
    const GainEvaluation e = exact_evaluate(s.model, k.values(), s.spec, gaussian_noise_stats(s.model, s.noise, s.spec));
    EXPECT_EQ(t.trajectory.x, direct.x);
    EXPECT_EQ(t.evaluation.r0, e.r0);
    EXPECT_EQ(t.evaluation.rc, e.rc);
    EXPECT_EQ(t.evaluation.spectral_radius, e.spectral_radius);
}

TEST(Transfer, RejectsTopologyMismatch) {
    const LoopSetup s;
    ModelRecipe other = s.recipe;
    other.include_frequency = true;
    EXPECT_THROW(transfer_eval(s.model, other.build(AreaParams::nominal()), s.gain(0, 0), Scenario{}, s.spec, s.noise, 1),
                 std::invalid_argument);
}

TEST(Robustness, ZeroFractionMatchesNominalAndIsDeterministic) {
    const LoopSetup s;
    const StructuredGain k = s.gain(0.5, 0.2);
    RobustnessOptions opt;
    opt.fractions = {0.15, 0.0, 0.10, 0.20};
    const RobustnessReport r = robustness_sweep(AreaParams::nominal(), s.recipe, k, opt, area3_step(), s.spec, s.noise, 9);
    ASSERT_EQ(r.entries.size(), 4u);
    EXPECT_EQ(r.entries[0].fraction, 0.0);
    EXPECT_EQ(r.entries[1].fraction, 0.10);
    EXPECT_EQ(r.entries[3].fraction, 0.20);
    EXPECT_EQ(r.entries[0].n_stable, 1);

    const Trajectory nominal = simulate_closed_loop(s.model, k, area3_step(), 9);
    const SettlingMetrics m = settling_metrics(nominal, opt.band, opt.area);
    EXPECT_EQ(r.entries[0].peak.mean, m.peak);
    EXPECT_EQ(r.entries[0].settling.mean, m.settling);

    const RobustnessReport again = robustness_sweep(AreaParams::nominal(), s.recipe, k, opt, area3_step(), s.spec, s.noise, 9);
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        EXPECT_EQ(r.entries[i].peak.mean, again.entries[i].peak.mean);
        EXPECT_EQ(r.entries[i].draws[0].spectral_radius, again.entries[i].draws[0].spectral_radius);
    }
}

TEST(Robustness, RandomSignCountsBounded) {
    const LoopSetup s;
    RobustnessOptions opt;
    opt.fractions = {0.2, 0.5};
    opt.mode = PerturbMode::random_sign;
    opt.n_draws = 8;
    const RobustnessReport r =
        robustness_sweep(AreaParams::nominal(), s.recipe, s.gain(0.5, 0.2), opt, area3_step(), s.spec, s.noise, 4);
    for (const auto& e : r.entries) {
        EXPECT_LE(e.n_stable, e.n_draws);
        EXPECT_LE(e.n_settled, e.n_stable);
        EXPECT_EQ(e.draws.size(), 8u);
    }
    opt.fractions.clear();
    EXPECT_THROW(robustness_sweep(AreaParams::nominal(), s.recipe, s.gain(0, 0), opt, area3_step(), s.spec, s.noise, 4),
                 std::invalid_argument);
}
