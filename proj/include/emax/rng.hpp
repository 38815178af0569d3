#pragma once

// Counter-based random number generation for reproducible, partitionable
// Monte Carlo.  Every variate is a pure function of (key, index), so draws
// can be sharded across threads in any order and still produce bit-identical
// results for a given seed.
//
// The core permutation is the splitmix64 finalizer; normal variates use the
// Box-Muller transform on two counter-indexed uniforms, which samples the
// exact Gaussian law (no quantile approximation involved).

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace emax::rng {

// splitmix64 finalizer: a bijective 64-bit mix with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Fold an arbitrary tuple of indices (seed, stream, replicate, ...) into a
// single 64-bit key.  Order matters; collisions between distinct tuples are
// as unlikely as 64-bit hash collisions.
constexpr std::uint64_t make_key(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t k = 0x243f6a8885a308d3ull;  // arbitrary non-zero start
    for (std::uint64_t p : parts) k = mix64(k ^ p);
    return k;
}

// Uniform draw in (0, 1], indexed.  The open-at-zero side keeps log() in
// Box-Muller finite.
inline double uniform(std::uint64_t key, std::uint64_t idx) noexcept {
    const std::uint64_t bits = mix64(key + 0x9e3779b97f4a7c15ull * (idx + 1));
    return 1.0 - static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Standard normal draw, indexed.  Consumes the uniform slots (2*idx, 2*idx+1).
inline double gaussian(std::uint64_t key, std::uint64_t idx) noexcept {
    const double u1 = uniform(key, 2 * idx);
    const double u2 = uniform(key, 2 * idx + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double gaussian(std::uint64_t key, std::uint64_t idx, double mean, double sd) noexcept {
    return mean + sd * gaussian(key, idx);
}

}  // namespace emax::rng
