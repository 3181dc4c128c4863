#pragma once

// On-disk formats: train logs and trajectories as CSV, gains and reports as
// JSON. Numbers are written with 17 significant digits so a round trip is
// exact and repeated runs are byte-identical.

#include "rclfc/harness.hpp"
#include "rclfc/linalg.hpp"
#include "rclfc/risk_lqr.hpp"
#include "rclfc/sgdmax.hpp"
#include "rclfc/topology.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclfc {

using json = nlohmann::json;

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (v == 0.0) {
        return "0";  // also folds −0
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON has no infinity; unstable values become null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string train_log_csv(const TrainLog& log) {
    std::string s = "iter,r0,rc,lambda,grad_norm,spectral_radius,elapsed_s\n";
    for (const auto& r : log.records) {
        s += std::to_string(r.iter);
        for (double v : {r.r0, r.rc, r.lambda, r.grad_norm, r.spectral_radius, r.elapsed_s}) {
            s += ',';
            s += format_number(v);
        }
        s += '\n';
    }
    return s;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) {
        throw std::invalid_argument(what + ": expected a nonempty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::invalid_argument(what + ": ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

inline json gain_to_json(const StructuredGain& k) {
    const Matrix& v = k.values();
    json mask = json::array();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            row.push_back(k.pattern().free(i, j) ? 1 : 0);
        }
        mask.push_back(std::move(row));
    }
    return json{{"rows", v.rows()}, {"cols", v.cols()}, {"mask", mask}, {"values", matrix_to_json(v)}};
}

inline StructuredGain gain_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const Matrix mask_num = matrix_from_json(j.at("mask"), "gain mask");
    const Matrix values = matrix_from_json(j.at("values"), "gain values");
    if (mask_num.rows() != rows || mask_num.cols() != cols || values.rows() != rows || values.cols() != cols) {
        throw std::invalid_argument("gain file: rows/cols disagree with mask or values");
    }
    StructurePattern::Mask mask = (mask_num.array() != 0.0);
    return StructuredGain(values, StructurePattern(mask));
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline void write_gain(const std::filesystem::path& path, const StructuredGain& k) {
    write_text(path, dump_json(gain_to_json(k)));
}

inline StructuredGain read_gain(const std::filesystem::path& path) {
    return gain_from_json(json::parse(read_text(path)));
}

inline std::string trajectory_csv(const Trajectory& tr) {
    const Eigen::Index n_areas = tr.w.cols();
    static const char* const kSlotNames[kStatesPerArea] = {"df", "dPG", "dPtie", "z"};
    std::string s = "t";
    for (Eigen::Index a = 1; a <= n_areas; ++a) {
        for (const char* name : kSlotNames) {
            s += ',' + std::string(name) + '_' + std::to_string(a);
        }
    }
    for (Eigen::Index i = 1; i <= tr.u.cols(); ++i) {
        s += ",u_" + std::to_string(i);
    }
    for (Eigen::Index i = 1; i <= n_areas; ++i) {
        s += ",w_" + std::to_string(i);
    }
    s += '\n';
    for (Eigen::Index t = 0; t < tr.length(); ++t) {
        s += format_number(tr.time(t));
        for (const Matrix* m : {&tr.x, &tr.u, &tr.w}) {
            for (Eigen::Index c = 0; c < m->cols(); ++c) {
                s += ',';
                s += format_number((*m)(t, c));
            }
        }
        s += '\n';
    }
    return s;
}

/// Load trace with header area_1..area_N; one row per step.
inline Matrix read_trace_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument(path.string() + ": empty trace file");
    }
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
                cell.pop_back();
            }
            cells.push_back(cell);
        }
        return cells;
    };
    const auto header = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] != "area_" + std::to_string(i + 1)) {
            throw std::invalid_argument(path.string() + ": header must be area_1,...,area_N");
        }
    }
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            row.push_back(std::stod(c));
        }
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

inline json robustness_to_json(const RobustnessReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        json draws = json::array();
        for (const auto& d : e.draws) {
            draws.push_back({{"spectral_radius", number_or_null(d.spectral_radius)},
                             {"stable", d.stable},
                             {"peak_abs_df", d.peak},
                             {"settling_s", d.settling},
                             {"settled", d.settled},
                             {"params",
                              {{"inertia", d.params.inertia},
                               {"damping", d.params.damping},
                               {"droop", d.params.droop},
                               {"gov_turbine_T", d.params.gov_turbine_T},
                               {"k_tie", d.params.k_tie},
                               {"bias", d.params.bias}}}});
        }
        entries.push_back({{"fraction", e.fraction},
                           {"mode", to_string(e.mode)},
                           {"n_draws", e.n_draws},
                           {"n_stable", e.n_stable},
                           {"fraction_stable", static_cast<double>(e.n_stable) / e.n_draws},
                           {"n_settled", e.n_settled},
                           {"peak_abs_df", {{"mean", e.peak.mean}, {"max", e.peak.max}}},
                           {"settling_s", {{"mean", e.settling.mean}, {"max", e.settling.max}}},
                           {"draws", draws}});
    }
    return json{{"area", report.area}, {"band_hz", report.band}, {"entries", entries}};
}

inline json noise_stats_to_json(const NoiseStats& s) {
    return json{{"w_bar", std::vector<double>(s.w_bar.data(), s.w_bar.data() + s.w_bar.size())},
                {"W", matrix_to_json(s.w)},
                {"M3", std::vector<double>(s.m3.data(), s.m3.data() + s.m3.size())},
                {"m4", s.m4},
                {"tr_WQc_squared", s.trace_wqc_squared()},
                {"delta_bar", s.delta_bar}};
}

}  // namespace rclfc
