#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace oncopipe::rng {

// Bounded draw via rejection so results do not depend on the stdlib's
// distribution implementation. mt19937_64 itself is bit-specified.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t m) {
    if (m == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % m;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % m;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded(gen, i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

// k distinct indices from [0, n), ascending.
inline std::vector<std::size_t> sorted_sample(std::size_t n, std::size_t k, std::uint64_t seed) {
    auto idx = shuffled_indices(n, seed);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace oncopipe::rng
