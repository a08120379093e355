#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace fairnn {

/// Every randomized routine in the library draws from a caller-owned
/// stream of this type.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent child seed; used to split one user seed into
/// separate streams (permutation, hashing, query).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

template <class Gen>
concept Full64Generator = Gen::min() == 0 && Gen::max() == std::numeric_limits<std::uint64_t>::max();

/// Uniform integer in [0, n), n > 0. Lemire's multiply-and-reject method.
template <class Gen>
    requires Full64Generator<Gen>
std::uint64_t uniform_index(Gen& gen, std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(gen()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(gen()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Gen>
    requires Full64Generator<Gen>
double uniform_unit(Gen& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// True with probability p (clamped to [0, 1]).
template <class Gen>
bool bernoulli(Gen& gen, double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform_unit(gen) < p;
}

}  // namespace fairnn
