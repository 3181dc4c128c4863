#pragma once

// Seeded random streams. Every consumer derives its own engine from a master
// seed and a tuple of indices, so results do not depend on evaluation order.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace rclfc {

using Rng = std::mt19937_64;

/// Stream purposes; keeps streams drawn for different jobs apart even when
/// the numeric indices coincide.
enum class StreamTag : std::uint64_t {
    direction = 1,
    disturbance = 2,
    rollout = 3,
    perturbation = 4,
    scenario = 5,
    logging = 6,
};

inline Rng make_stream(std::uint64_t master_seed, StreamTag tag, std::initializer_list<std::uint64_t> indices = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (indices.size() + 2));
    auto push = [&words](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(master_seed);
    push(static_cast<std::uint64_t>(tag));
    for (auto v : indices) {
        push(v);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace rclfc
