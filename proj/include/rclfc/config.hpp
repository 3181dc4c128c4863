#pragma once

// Experiment configuration read from a JSON file. Every section is optional
// and falls back to the nominal six-area setup; validation collects all
// violations before failing.

#include "rclfc/disturbance.hpp"
#include "rclfc/harness.hpp"
#include "rclfc/io.hpp"
#include "rclfc/lfc_model.hpp"
#include "rclfc/risk_lqr.hpp"
#include "rclfc/sgdmax.hpp"
#include "rclfc/topology.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclfc {

struct GraphConfig {
    int n_areas = 6;
    std::vector<Edge> edges;  // empty: chain 1-2-…-N
    bool include_frequency = false;
};

struct DisturbanceConfig {
    std::string type = "gaussian";  // gaussian | trace
    double std_dev = 20.0;          // isotropic std when no covariance is given
    std::optional<Vector> mean;
    std::optional<Matrix> covariance;
    std::string trace_path;
};

struct ScenarioConfig {
    double duration = 20.0;
    std::optional<double> dt;  // defaults to the model's dt
    std::vector<LoadStep> steps;
    bool random_steps = false;  // one step per area at seeded onsets
    double random_magnitude = 0.1;
    std::optional<double> background_std;
};

struct Config {
    GraphConfig graph;
    AreaParams area = AreaParams::nominal();
    std::optional<Matrix> q;  // default identity
    std::optional<Matrix> r;  // default 0.1 identity
    double delta = 0.0;
    double lambda_max = 100.0;
    double dt = 0.01;
    DiscretizationMethod method = DiscretizationMethod::euler;
    DisturbanceConfig disturbance;
    TrainConfig train;
    std::string k0_path;  // empty: zero gain
    ScenarioConfig scenario;
    RobustnessOptions robustness;
    std::string output_dir = "out";
    std::filesystem::path base_dir;  // relative paths resolve against the config file

    InterconnectionGraph build_graph() const {
        return graph.edges.empty() ? InterconnectionGraph::chain(graph.n_areas)
                                   : InterconnectionGraph(graph.n_areas, graph.edges);
    }

    ModelRecipe recipe() const { return ModelRecipe{build_graph(), graph.include_frequency, dt, method}; }

    CostSpec cost_spec() const {
        const Eigen::Index p = graph.n_areas;
        CostSpec spec{q ? *q : Matrix::Identity(p, p), r ? *r : Matrix(0.1 * Matrix::Identity(p, p)), delta,
                      lambda_max};
        return spec;
    }

    std::filesystem::path resolve(const std::string& path) const {
        const std::filesystem::path p(path);
        return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }

    GaussianDisturbance gaussian_noise() const {
        const Eigen::Index n = graph.n_areas;
        const Vector mu = disturbance.mean ? *disturbance.mean : Vector(Vector::Zero(n));
        const Matrix cov = disturbance.covariance
                               ? *disturbance.covariance
                               : Matrix(Matrix::Identity(n, n) * (disturbance.std_dev * disturbance.std_dev));
        return GaussianDisturbance(mu, cov);
    }

    Scenario build_scenario(std::uint64_t seed) const {
        const double step = scenario.dt.value_or(dt);
        Scenario sc = scenario.random_steps
                          ? default_scenario(graph.n_areas, scenario.duration, step, seed, scenario.random_magnitude)
                          : Scenario{scenario.duration, step, scenario.steps, std::nullopt};
        if (scenario.background_std) {
            sc.background = GaussianDisturbance::isotropic(graph.n_areas, *scenario.background_std);
        }
        return sc;
    }
};

namespace detail {

/// Reads typed fields and records every problem instead of stopping at the first.
class FieldReader {
public:
    explicit FieldReader(std::vector<std::string>& problems) : problems_(problems) {}

    template <typename T>
    void read(const json& obj, const char* section, const char* key, T& out) {
        if (!obj.contains(key)) {
            return;
        }
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(std::string(section) + "." + key + ": wrong type");
        }
    }

    void fail(const std::string& msg) { problems_.push_back(msg); }

    /// Scalar s → s·I, list → diagonal, nested list → full matrix.
    std::optional<Matrix> weight(const json& obj, const char* section, const char* key, Eigen::Index n) {
        if (!obj.contains(key)) {
            return std::nullopt;
        }
        const json& v = obj.at(key);
        const std::string where = std::string(section) + "." + key;
        try {
            if (v.is_number()) {
                return Matrix(Matrix::Identity(n, n) * v.get<double>());
            }
            if (v.is_array() && !v.empty() && v.at(0).is_number()) {
                const auto diag = v.get<std::vector<double>>();
                if (static_cast<Eigen::Index>(diag.size()) != n) {
                    fail(where + ": diagonal must have " + std::to_string(n) + " entries");
                    return std::nullopt;
                }
                return Matrix(Eigen::Map<const Vector>(diag.data(), n).asDiagonal());
            }
            Matrix m = matrix_from_json(v, where);
            if (m.rows() != n || m.cols() != n) {
                fail(where + ": must be " + std::to_string(n) + "x" + std::to_string(n));
                return std::nullopt;
            }
            return m;
        } catch (const std::exception& e) {
            fail(where + ": " + e.what());
            return std::nullopt;
        }
    }

private:
    std::vector<std::string>& problems_;
};

inline const json& section(const json& root, const char* name) {
    static const json empty = json::object();
    return root.contains(name) ? root.at(name) : empty;
}

}  // namespace detail

/// Parses and validates a configuration; throws std::invalid_argument that
/// lists every violated constraint.
inline Config parse_config(const json& root, const std::filesystem::path& base_dir = {}) {
    std::vector<std::string> problems;
    detail::FieldReader rd(problems);
    Config cfg;
    cfg.base_dir = base_dir;
    if (!root.is_object()) {
        throw std::invalid_argument("config: top level must be an object");
    }

    const json& g = detail::section(root, "graph");
    rd.read(g, "graph", "n_areas", cfg.graph.n_areas);
    rd.read(g, "graph", "include_frequency", cfg.graph.include_frequency);
    if (g.contains("edges")) {
        try {
            for (const auto& e : g.at("edges")) {
                cfg.graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
            }
        } catch (const json::exception&) {
            rd.fail("graph.edges: expected a list of [i, j] pairs");
        }
    }
    bool graph_ok = cfg.graph.n_areas >= 1;
    if (!graph_ok) {
        rd.fail("graph.n_areas must be >= 1");
    } else {
        try {
            (void)cfg.build_graph();
        } catch (const std::exception& e) {
            rd.fail(e.what());
            graph_ok = false;
        }
    }
    const Eigen::Index n = std::max(cfg.graph.n_areas, 1);

    const json& a = detail::section(root, "area_params");
    rd.read(a, "area_params", "M", cfg.area.inertia);
    rd.read(a, "area_params", "D", cfg.area.damping);
    rd.read(a, "area_params", "R_d", cfg.area.droop);
    rd.read(a, "area_params", "T", cfg.area.gov_turbine_T);
    rd.read(a, "area_params", "k_tie", cfg.area.k_tie);
    if (a.contains("beta")) {
        rd.read(a, "area_params", "beta", cfg.area.bias);
        cfg.area.bias_from_rule = false;
    } else {
        cfg.area = cfg.area.with_rule_bias();
    }
    try {
        cfg.area.validate();
    } catch (const std::exception& e) {
        rd.fail(e.what());
    }

    const json& c = detail::section(root, "cost");
    cfg.q = rd.weight(c, "cost", "Q", n);
    cfg.r = rd.weight(c, "cost", "R", n);
    rd.read(c, "cost", "delta", cfg.delta);
    rd.read(c, "cost", "Lambda", cfg.lambda_max);
    try {
        cfg.cost_spec().validate(n, n);
    } catch (const std::exception& e) {
        rd.fail(e.what());
    }

    const json& d = detail::section(root, "discretization");
    rd.read(d, "discretization", "dt", cfg.dt);
    if (!(cfg.dt > 0.0)) {
        rd.fail("discretization.dt must be > 0");
    }
    std::string method = to_string(cfg.method);
    rd.read(d, "discretization", "method", method);
    if (method == "euler") {
        cfg.method = DiscretizationMethod::euler;
    } else if (method == "exact") {
        cfg.method = DiscretizationMethod::exact;
    } else {
        rd.fail("discretization.method must be euler or exact");
    }

    const json& w = detail::section(root, "disturbance");
    rd.read(w, "disturbance", "type", cfg.disturbance.type);
    rd.read(w, "disturbance", "std", cfg.disturbance.std_dev);
    rd.read(w, "disturbance", "path", cfg.disturbance.trace_path);
    if (w.contains("mean")) {
        std::vector<double> mu;
        rd.read(w, "disturbance", "mean", mu);
        if (static_cast<Eigen::Index>(mu.size()) != n) {
            rd.fail("disturbance.mean must have n_areas entries");
        } else {
            cfg.disturbance.mean = Eigen::Map<const Vector>(mu.data(), n);
        }
    }
    cfg.disturbance.covariance = rd.weight(w, "disturbance", "covariance", n);
    if (cfg.disturbance.type == "gaussian") {
        if (!(cfg.disturbance.std_dev >= 0.0)) {
            rd.fail("disturbance.std must be >= 0");
        } else {
            try {
                (void)cfg.gaussian_noise();
            } catch (const std::exception& e) {
                rd.fail(e.what());
            }
        }
    } else if (cfg.disturbance.type == "trace") {
        if (cfg.disturbance.trace_path.empty()) {
            rd.fail("disturbance.path is required for a trace disturbance");
        }
    } else {
        rd.fail("disturbance.type must be gaussian or trace");
    }

    const json& t = detail::section(root, "train");
    TrainConfig& tc = cfg.train;
    rd.read(t, "train", "eta", tc.eta);
    rd.read(t, "train", "r", tc.r);
    rd.read(t, "train", "M", tc.samples);
    rd.read(t, "train", "J", tc.iterations);
    rd.read(t, "train", "epsilon", tc.epsilon);
    rd.read(t, "train", "seed", tc.master_seed);
    rd.read(t, "train", "horizon", tc.budget.horizon);
    rd.read(t, "train", "burn_in", tc.budget.burn_in);
    rd.read(t, "train", "n_rollouts", tc.budget.n_rollouts);
    rd.read(t, "train", "backtrack", tc.backtrack.enabled);
    rd.read(t, "train", "crn", tc.common_random_numbers);
    rd.read(t, "train", "snapshot_every", tc.snapshot_every);
    rd.read(t, "train", "record_wall_time", tc.record_wall_time);
    rd.read(t, "train", "K0", cfg.k0_path);
    for (auto [key, slot] : {std::pair{"evaluator", &tc.evaluator}, std::pair{"log_evaluator", &tc.log_evaluator}}) {
        std::string kind = to_string(*slot);
        rd.read(t, "train", key, kind);
        if (kind == "monte_carlo") {
            *slot = EvaluatorKind::monte_carlo;
        } else if (kind == "lyapunov") {
            *slot = EvaluatorKind::lyapunov;
        } else {
            rd.fail(std::string("train.") + key + " must be monte_carlo or lyapunov");
        }
    }
    try {
        tc.validate();
    } catch (const std::exception& e) {
        rd.fail(e.what());
    }

    const json& s = detail::section(root, "scenario");
    rd.read(s, "scenario", "duration", cfg.scenario.duration);
    if (s.contains("dt")) {
        double sdt = 0.0;
        rd.read(s, "scenario", "dt", sdt);
        cfg.scenario.dt = sdt;
        if (std::abs(sdt - cfg.dt) > 1e-12 * std::max(1.0, cfg.dt)) {
            rd.fail("scenario.dt must equal discretization.dt");
        }
    }
    rd.read(s, "scenario", "random_steps", cfg.scenario.random_steps);
    rd.read(s, "scenario", "random_magnitude", cfg.scenario.random_magnitude);
    if (s.contains("background_std")) {
        double bs = 0.0;
        rd.read(s, "scenario", "background_std", bs);
        cfg.scenario.background_std = bs;
    }
    if (s.contains("steps")) {
        try {
            for (const auto& st : s.at("steps")) {
                LoadStep ls{st.at("area").get<int>(), st.at("onset").get<double>(), st.at("magnitude").get<double>(),
                            std::nullopt};
                if (st.contains("offset") && !st.at("offset").is_null()) {
                    ls.offset = st.at("offset").get<double>();
                }
                cfg.scenario.steps.push_back(ls);
            }
        } catch (const json::exception&) {
            rd.fail("scenario.steps: each step needs area, onset, magnitude");
        }
    }
    if (graph_ok && cfg.dt > 0.0) {
        try {
            cfg.build_scenario(0).validate(cfg.graph.n_areas);
        } catch (const std::exception& e) {
            rd.fail(e.what());
        }
    }

    const json& rb = detail::section(root, "robustness");
    RobustnessOptions& ro = cfg.robustness;
    rd.read(rb, "robustness", "fractions", ro.fractions);
    rd.read(rb, "robustness", "n_draws", ro.n_draws);
    ro.area = std::min(ro.area, cfg.graph.n_areas);
    rd.read(rb, "robustness", "area", ro.area);
    rd.read(rb, "robustness", "band", ro.band);
    std::string mode = to_string(ro.mode);
    rd.read(rb, "robustness", "mode", mode);
    if (mode == "uniform_scale") {
        ro.mode = PerturbMode::uniform_scale;
    } else if (mode == "random_sign") {
        ro.mode = PerturbMode::random_sign;
        if (!rb.contains("n_draws")) {
            ro.n_draws = 100;
        }
    } else {
        rd.fail("robustness.mode must be uniform_scale or random_sign");
    }
    if (ro.fractions.empty()) {
        rd.fail("robustness.fractions must be nonempty");
    }
    for (double f : ro.fractions) {
        if (!(f >= 0.0 && f < 1.0)) {
            rd.fail("robustness.fractions must lie in [0, 1)");
            break;
        }
    }
    if (ro.n_draws < 1) {
        rd.fail("robustness.n_draws must be >= 1");
    }
    if (ro.area < 1 || ro.area > cfg.graph.n_areas) {
        rd.fail("robustness.area must be a valid area index");
    }
    if (!(ro.band > 0.0)) {
        rd.fail("robustness.band must be > 0");
    }

    rd.read(root, "config", "output_dir", cfg.output_dir);

    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) {
            msg += "\n  - " + p;
        }
        throw std::invalid_argument(msg);
    }
    return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
    json root;
    try {
        root = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return parse_config(root, path.parent_path());
}

}  // namespace rclfc
