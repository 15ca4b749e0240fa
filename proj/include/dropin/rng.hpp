#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dropin {

using Seed = std::uint64_t;
using Engine = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words, good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child seed from a parent seed and a path of counters.
///
/// Each counter is folded in with one SplitMix64 round, so
/// derive_seed(m, {s, g, i}) gives the per-iteration seed of cell (s, g, i)
/// and derive_seed(child, {j}) gives the j-th stream below it.
constexpr Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> path) noexcept {
    Seed h = splitmix64(parent ^ 0x6A09E667F3BCC909ULL);
    for (auto c : path) h = splitmix64(h ^ splitmix64(c + 0x3C6EF372FE94F82BULL));
    return h;
}

inline Engine make_engine(Seed seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace dropin
