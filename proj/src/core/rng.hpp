#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace stegograph {

// splitmix64 finalizer. Used both as a seed scrambler and as the
// counter-based per-pixel generator of the embedding simulator: the draw for
// pixel k depends only on (seed, k), never on iteration order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Uniform double in [0,1) from the top 53 bits.
inline double u64_to_unit_double(std::uint64_t z) {
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    return u64_to_unit_double(splitmix64(seed ^ splitmix64(counter)));
}

// Derives an independent stream seed, e.g. the per-image seeds of a dataset.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x517cc1b727220a95ull));
}

// Seeded Fisher-Yates permutation of 0..n-1. mt19937_64 output is pinned by
// the standard, so the order is portable (std::shuffle is not).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[gen() % i]);
    return idx;
}

} // namespace stegograph
