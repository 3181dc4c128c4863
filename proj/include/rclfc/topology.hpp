#pragma once

// Information-exchange graph between control areas and the objects derived
// from it: graph Laplacian, gain sparsity pattern and the output matrix.
// Area indices are 1-based at the interface (config files, edge lists) and
// 0-based internally.

#include "rclfc/linalg.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rclfc {

/// Per-area state layout [Δf, ΔP_G, ΔP_tie, ∫ACE].
inline constexpr int kStatesPerArea = 4;
inline constexpr int kFreqSlot = 0;
inline constexpr int kGenSlot = 1;
inline constexpr int kTieSlot = 2;
inline constexpr int kAceSlot = 3;

using Edge = std::pair<int, int>;

/// Undirected, unweighted, connected graph on areas 1..n_areas.
class InterconnectionGraph {
public:
    InterconnectionGraph(int n_areas, std::vector<Edge> edges) : n_areas_(n_areas), edges_(std::move(edges)) {
        validate();
        adjacency_.assign(static_cast<std::size_t>(n_areas_), {});
        for (const auto& [a, b] : edges_) {
            adjacency_[static_cast<std::size_t>(a - 1)].push_back(b - 1);
            adjacency_[static_cast<std::size_t>(b - 1)].push_back(a - 1);
        }
        for (auto& list : adjacency_) {
            std::sort(list.begin(), list.end());
        }
    }

    /// Chain 1-2-...-n, the radial layout used in the examples.
    static InterconnectionGraph chain(int n_areas) {
        std::vector<Edge> edges;
        for (int i = 1; i < n_areas; ++i) {
            edges.emplace_back(i, i + 1);
        }
        return InterconnectionGraph(n_areas, std::move(edges));
    }

    int n_areas() const { return n_areas_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// 0-based neighbours of 0-based area i, sorted.
    const std::vector<int>& neighbors(int i) const { return adjacency_.at(static_cast<std::size_t>(i)); }
    int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

    bool connected(int i, int j) const {
        const auto& list = neighbors(i);
        return std::binary_search(list.begin(), list.end(), j);
    }

private:
    void validate() const {
        std::vector<std::string> problems;
        if (n_areas_ < 1) {
            problems.push_back("n_areas must be >= 1");
        }
        std::set<Edge> seen;
        for (const auto& [a, b] : edges_) {
            std::ostringstream e;
            e << "(" << a << "," << b << ")";
            if (a < 1 || a > n_areas_ || b < 1 || b > n_areas_) {
                problems.push_back("edge " + e.str() + " has an index outside [1, n_areas]");
                continue;
            }
            if (a == b) {
                problems.push_back("edge " + e.str() + " is a self-loop");
                continue;
            }
            if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
                problems.push_back("edge " + e.str() + " is a duplicate");
            }
        }
        if (problems.empty() && n_areas_ >= 1) {
            // Connectivity by BFS from area 1.
            std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_areas_));
            for (const auto& [a, b] : edges_) {
                adj[static_cast<std::size_t>(a - 1)].push_back(b - 1);
                adj[static_cast<std::size_t>(b - 1)].push_back(a - 1);
            }
            std::vector<bool> visited(static_cast<std::size_t>(n_areas_), false);
            std::queue<int> frontier;
            frontier.push(0);
            visited[0] = true;
            int count = 1;
            while (!frontier.empty()) {
                const int u = frontier.front();
                frontier.pop();
                for (int v : adj[static_cast<std::size_t>(u)]) {
                    if (!visited[static_cast<std::size_t>(v)]) {
                        visited[static_cast<std::size_t>(v)] = true;
                        ++count;
                        frontier.push(v);
                    }
                }
            }
            if (count != n_areas_) {
                problems.push_back("graph is not connected");
            }
        }
        if (!problems.empty()) {
            std::string msg = "invalid interconnection graph:";
            for (const auto& p : problems) {
                msg += "\n  - " + p;
            }
            throw std::invalid_argument(msg);
        }
    }

    int n_areas_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// Boolean sparsity mask for the feedback gain (controls × outputs).
class StructurePattern {
public:
    using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

    explicit StructurePattern(Mask mask) : mask_(std::move(mask)) {
        n_nonzero_ = static_cast<int>(mask_.count());
        if (n_nonzero_ < 1) {
            throw std::invalid_argument("structure pattern must have at least one free entry");
        }
    }

    const Mask& mask() const { return mask_; }
    int n_nonzero() const { return n_nonzero_; }
    Eigen::Index rows() const { return mask_.rows(); }
    Eigen::Index cols() const { return mask_.cols(); }
    bool free(Eigen::Index a, Eigen::Index b) const { return mask_(a, b); }

    /// Column-major list of free (row, col) positions; fixes the order in
    /// which random directions are filled.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> support() const {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
        out.reserve(static_cast<std::size_t>(n_nonzero_));
        for (Eigen::Index b = 0; b < mask_.cols(); ++b) {
            for (Eigen::Index a = 0; a < mask_.rows(); ++a) {
                if (mask_(a, b)) {
                    out.emplace_back(a, b);
                }
            }
        }
        return out;
    }

    bool conforms(const Matrix& k) const {
        if (k.rows() != mask_.rows() || k.cols() != mask_.cols()) {
            return false;
        }
        for (Eigen::Index b = 0; b < k.cols(); ++b) {
            for (Eigen::Index a = 0; a < k.rows(); ++a) {
                if (!mask_(a, b) && k(a, b) != 0.0) {
                    return false;
                }
            }
        }
        return true;
    }

    friend bool operator==(const StructurePattern& x, const StructurePattern& y) {
        return x.mask_.rows() == y.mask_.rows() && x.mask_.cols() == y.mask_.cols() && x.mask_ == y.mask_;
    }

private:
    Mask mask_;
    int n_nonzero_ = 0;
};

/// Unweighted Laplacian: degree on the diagonal, -1 per edge.
inline Matrix build_laplacian(const InterconnectionGraph& graph) {
    const int n = graph.n_areas();
    Matrix lap = Matrix::Zero(n, n);
    for (const auto& [a, b] : graph.edges()) {
        const int i = a - 1;
        const int j = b - 1;
        lap(i, j) -= 1.0;
        lap(j, i) -= 1.0;
        lap(i, i) += 1.0;
        lap(j, j) += 1.0;
    }
    return lap;
}

/// An area may use its own output and the outputs of its graph neighbours.
inline StructurePattern build_structure_pattern(const InterconnectionGraph& graph) {
    const int n = graph.n_areas();
    StructurePattern::Mask mask = StructurePattern::Mask::Constant(n, n, false);
    for (int i = 0; i < n; ++i) {
        mask(i, i) = true;
        for (int j : graph.neighbors(i)) {
            mask(i, j) = true;
        }
    }
    return StructurePattern(std::move(mask));
}

/// Output i sums ΔP_G and ΔP_tie (and Δf when requested) over area i and
/// its neighbours.
inline Matrix build_output_matrix(const InterconnectionGraph& graph, bool include_frequency) {
    const int n = graph.n_areas();
    Matrix c = Matrix::Zero(n, kStatesPerArea * n);
    auto mark = [&](int row, int area) {
        const int base = kStatesPerArea * area;
        c(row, base + kGenSlot) = 1.0;
        c(row, base + kTieSlot) = 1.0;
        if (include_frequency) {
            c(row, base + kFreqSlot) = 1.0;
        }
    };
    for (int i = 0; i < n; ++i) {
        mark(i, i);
        for (int j : graph.neighbors(i)) {
            mark(i, j);
        }
    }
    return c;
}

/// Zeroes every entry outside the mask.
inline Matrix project_onto_pattern(const Matrix& m, const StructurePattern& pattern) {
    if (m.rows() != pattern.rows() || m.cols() != pattern.cols()) {
        throw std::invalid_argument("project_onto_pattern: matrix is " + shape_string(m) + " but pattern is " +
                                    std::to_string(pattern.rows()) + "x" + std::to_string(pattern.cols()));
    }
    Matrix out = m;
    for (Eigen::Index b = 0; b < m.cols(); ++b) {
        for (Eigen::Index a = 0; a < m.rows(); ++a) {
            if (!pattern.free(a, b)) {
                out(a, b) = 0.0;
            }
        }
    }
    return out;
}

}  // namespace rclfc
