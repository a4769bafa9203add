#pragma once

// Portable seeded randomness. std::mt19937_64 output is fixed by the
// standard; the distributions in <random> are not, so bounded draws and
// shuffles are done here.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ratatool {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x > limit);
    return x % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = uniform_index(rng, i);
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace ratatool
