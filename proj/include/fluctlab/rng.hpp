#pragma once

#include <cstdint>

namespace fluctlab {

/// SplitMix64 stream. The whole pipeline draws from this generator so a
/// dataset or an initialization is reproducible from its 64-bit seed in any
/// language: state += 0x9E3779B97F4A7C15, then the standard mix.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    constexpr double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform();
    }

private:
    std::uint64_t state_;
};

}  // namespace fluctlab
