#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace mmi {

// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions below are written out by hand because the
// standard library distributions are implementation-defined, and seeded runs
// must reproduce bit-for-bit across toolchains.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for a named sub-task of a seeded operation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    return splitmix64(seed ^ splitmix64(h));
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    double u = 0.0;
    while (u == 0.0) u = uniform01(rng);
    return u;
}

// Uniform integer in [0, n) by rejection, free of modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

// Standard normal via Box-Muller (one value per call; the pair partner is
// discarded to keep the stream position simple to reason about).
inline double standard_normal(Rng& rng) {
    const double u1 = uniform_open(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mmi
