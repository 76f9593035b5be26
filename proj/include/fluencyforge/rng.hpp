#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fluencyforge::rng {

// All randomized behavior in the toolkit goes through this engine and the
// draw helpers below. std::shuffle and the std <random> distributions are
// implementation-defined, so using them would break bit-reproducibility
// across standard libraries; these helpers consume engine output in a fully
// specified way.
using Engine = std::mt19937_64;

// Unbiased uniform draw in [0, n). n must be >= 1.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n; // 2^64 mod n
    for (;;) {
        std::uint64_t x = eng();
        if (x >= threshold)
            return x % n;
    }
}

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch only, so one engine state
// advance pattern per call: exactly two draws).
inline double normal(Engine& eng) {
    double u1 = 1.0 - uniform01(eng); // (0, 1]
    double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Fisher-Yates shuffle driven by below().
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[below(eng, i)]);
}

} // namespace fluencyforge::rng
