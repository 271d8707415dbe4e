#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "synthdet/core/hash.hpp"

namespace synthdet {

// Deterministic random stream. Distribution sampling is implemented by hand
// (std::uniform_*_distribution output is not pinned by the standard), so the
// same seed yields the same draws on every platform and standard library.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : seed_(seed), eng_(mix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t bits() { return eng_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive; unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        if (range == 0) return static_cast<int64_t>(eng_());  // full 64-bit span
        uint64_t rem = (UINT64_MAX % range + 1) % range;      // 2^64 mod range
        uint64_t u = eng_();
        while (rem != 0 && u > UINT64_MAX - rem) u = eng_();
        return lo + static_cast<int64_t>(u % range);
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(t);
        has_cached_ = true;
        return r * std::cos(t);
    }

    // Independent substream keyed on the parent's seed plus arbitrary tags;
    // does not consume or depend on the parent's engine state.
    template <typename... Tags>
    RandomStream derive(Tags... tags) const {
        return RandomStream(hash_combine(seed_, tags...));
    }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace synthdet
