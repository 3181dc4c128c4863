#include "rclfc/config.hpp"
#include "rclfc/experiment.hpp"
#include "rclfc/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace rclfc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("rclfc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST(Format, RoundTripsAndNormalizesZero) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125}) {
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(kInf), "inf");
}

TEST(GainJson, RoundTripIsExact) {
    const auto pattern = build_structure_pattern(InterconnectionGraph::chain(4));
    Matrix k = project_onto_pattern(Matrix::Random(4, 4), pattern);
    k(1, 1) = 1.0 / 3.0;
    const StructuredGain g(k, pattern);
    const json j = gain_to_json(g);
    EXPECT_EQ(j.at("rows"), 4);
    EXPECT_EQ(j.at("cols"), 4);
    EXPECT_EQ(j.at("mask")[0][2], 0);
    EXPECT_EQ(j.at("mask")[1][2], 1);
    const StructuredGain back = gain_from_json(json::parse(j.dump()));
    EXPECT_EQ(back.values(), k);
    EXPECT_TRUE(back.pattern() == pattern);
}

TEST(GainJson, RejectsValuesOutsideMask) {
    const json j = json::parse(R"({"rows": 2, "cols": 2, "mask": [[1,0],[0,1]], "values": [[1,2],[0,1]]})");
    EXPECT_THROW(gain_from_json(j), std::invalid_argument);
    const json ragged = json::parse(R"({"rows": 2, "cols": 2, "mask": [[1,0],[0]], "values": [[1,0],[0,1]]})");
    EXPECT_THROW(gain_from_json(ragged), std::invalid_argument);
}

TEST(TraceCsv, ReadsRowsAndChecksHeader) {
    const fs::path dir = scratch_dir("trace");
    write_text(dir / "ok.csv", "area_1,area_2\n0.1,0.2\n-0.3,0.4\n\n");
    const Matrix m = read_trace_csv(dir / "ok.csv");
    ASSERT_EQ(m.rows(), 2);
    EXPECT_EQ(m(1, 0), -0.3);
    write_text(dir / "bad_header.csv", "a1,a2\n1,2\n");
    EXPECT_THROW(read_trace_csv(dir / "bad_header.csv"), std::invalid_argument);
    write_text(dir / "bad_row.csv", "area_1,area_2\n1\n");
    EXPECT_THROW(read_trace_csv(dir / "bad_row.csv"), std::invalid_argument);
}

TEST(TrajectoryCsv, HeaderLayout) {
    const ModelRecipe recipe{InterconnectionGraph::chain(2), false, 0.01, DiscretizationMethod::euler};
    Scenario sc;
    sc.duration = 0.05;
    const Trajectory tr = simulate_closed_loop(recipe.build(AreaParams::nominal()),
                                               StructuredGain::zero(build_structure_pattern(recipe.graph)), sc, 1);
    const std::string csv = trajectory_csv(tr);
    EXPECT_EQ(first_line(csv), "t,df_1,dPG_1,dPtie_1,z_1,df_2,dPG_2,dPtie_2,z_2,u_1,u_2,w_1,w_2");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(TrainLogCsv, Header) {
    TrainLog log;
    log.records.push_back(TrainRecord{});
    EXPECT_EQ(first_line(train_log_csv(log)), "iter,r0,rc,lambda,grad_norm,spectral_radius,elapsed_s");
}

TEST(Config, DefaultsAreNominalSixArea) {
    const Config cfg = parse_config(json::object());
    EXPECT_EQ(cfg.graph.n_areas, 6);
    EXPECT_EQ(cfg.train.eta, 1e-4);
    EXPECT_EQ(cfg.train.r, 0.1);
    EXPECT_EQ(cfg.train.samples, 100);
    EXPECT_EQ(cfg.build_graph().edges().size(), 5u);
    EXPECT_EQ(cfg.cost_spec().r_u(0, 0), 0.1);
    EXPECT_NEAR(cfg.area.bias, 21.0, 1e-12);
}

TEST(Config, ParsesWeightsAndSections) {
    const json j = json::parse(R"({
        "graph": {"n_areas": 3, "edges": [[1,2],[1,3]], "include_frequency": true},
        "area_params": {"M": 12, "k_tie": 0.5},
        "cost": {"Q": [1, 2, 3], "R": [[1,0,0],[0,1,0],[0,0,2]], "delta": 0.3, "Lambda": 10},
        "discretization": {"dt": 0.02, "method": "exact"},
        "disturbance": {"type": "gaussian", "std": 2},
        "train": {"J": 5, "M": 7, "evaluator": "lyapunov", "seed": 99},
        "scenario": {"duration": 4, "steps": [{"area": 2, "onset": 1, "magnitude": 0.2, "offset": 3}]},
        "robustness": {"mode": "random_sign"}
    })");
    const Config cfg = parse_config(j);
    EXPECT_TRUE(cfg.build_graph().connected(0, 2));
    EXPECT_EQ(cfg.cost_spec().q(2, 2), 3.0);
    EXPECT_EQ(cfg.cost_spec().r_u(2, 2), 2.0);
    EXPECT_EQ(cfg.area.inertia, 12.0);
    EXPECT_EQ(cfg.method, DiscretizationMethod::exact);
    EXPECT_EQ(cfg.train.evaluator, EvaluatorKind::lyapunov);
    EXPECT_EQ(cfg.train.master_seed, 99u);
    EXPECT_EQ(cfg.robustness.n_draws, 100);
    const Scenario sc = cfg.build_scenario(1);
    EXPECT_EQ(sc.dt, 0.02);
    ASSERT_EQ(sc.steps.size(), 1u);
    EXPECT_EQ(*sc.steps[0].offset, 3.0);
    EXPECT_EQ(cfg.gaussian_noise().covariance()(1, 1), 4.0);
}

TEST(Config, ListsEveryViolation) {
    const json j = json::parse(R"({
        "graph": {"n_areas": 3, "edges": [[1,1]]},
        "area_params": {"M": -1},
        "cost": {"R": 0, "delta": -1},
        "discretization": {"dt": 0, "method": "rk4"},
        "disturbance": {"type": "laplace"},
        "train": {"eta": -1, "M": 0},
        "robustness": {"fractions": [1.5], "mode": "sometimes", "band": 0}
    })");
    try {
        parse_config(j);
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const char* needle : {"self-loop", "inertia", "R must", "delta", "dt must", "method", "disturbance.type",
                                   "eta", "M must", "fractions", "robustness.mode", "band"}) {
            EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
        }
    }
}

TEST(Config, WrongTypeIsReported) {
    EXPECT_THROW(parse_config(json::parse(R"({"train": {"J": "many"}})")), std::invalid_argument);
}

TEST(Experiment, EvalCostAndStatsWriteArtifacts) {
    const fs::path dir = scratch_dir("experiment");
    json j = json::parse(R"({"graph": {"n_areas": 2, "include_frequency": true},
                            "disturbance": {"std": 1.0},
                            "train": {"horizon": 2000, "burn_in": 100, "n_rollouts": 1}})");
    j["output_dir"] = dir.string();
    const Config cfg = parse_config(j);
    std::ostringstream out;
    const json ev = run_eval_cost(cfg, StructuredGain::zero(build_structure_pattern(cfg.build_graph())), out);
    EXPECT_TRUE(fs::exists(dir / "eval.json"));
    EXPECT_TRUE(ev.at("lyapunov").at("stable").get<bool>());

    write_text(dir / "trace.csv", "area_1,area_2\n0.1,0\n-0.1,0.2\n0.3,-0.2\n");
    const NoiseStats s = run_stats(cfg, (dir / "trace.csv").string(), out);
    EXPECT_TRUE(fs::exists(dir / "noise_stats.json"));
    EXPECT_EQ(s.w.rows(), 8);
}

TEST(Experiment, TraceDisturbanceDrivesTraining) {
    const fs::path dir = scratch_dir("trace_train");
    std::string csv = "area_1,area_2\n";
    Rng rng(3);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 700; ++i) {
        csv += format_number(normal(rng)) + "," + format_number(normal(rng)) + "\n";
    }
    write_text(dir / "trace.csv", csv);
    json j = json::parse(R"({"graph": {"n_areas": 2},
                            "disturbance": {"type": "trace", "path": "trace.csv"},
                            "train": {"J": 3, "M": 4, "horizon": 600, "burn_in": 100, "n_rollouts": 1}})");
    j["output_dir"] = (dir / "out").string();
    const Config cfg = parse_config(j, dir);
    std::ostringstream out;
    const TrainResult res = run_train(cfg, out);
    EXPECT_EQ(res.log.records.size(), 4u);
    EXPECT_TRUE(fs::exists(dir / "out" / "train_log.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "K_final.json"));
}
