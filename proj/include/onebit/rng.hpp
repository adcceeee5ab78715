#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace onebit {

/// splitmix64 step; used only to derive engine seeds from (seed, tag) pairs.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic mix of a seed with a stream tag. Distinct tags give
/// independent substreams of the same run seed.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64_next(s);
    s ^= tag * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    std::uint64_t b = splitmix64_next(s);
    return a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
}

/// One named substream of a run. Gaussian draws use Box-Muller with a fixed
/// two-uniforms-per-draw budget, so the stream position after k draws does
/// not depend on library internals.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t tag)
        : engine_(derive_stream_seed(seed, tag)) {}

    /// Uniform on (0, 1]; never returns 0.
    double uniform01_open() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// N(0, stddev^2); consumes exactly two uniforms.
    double gaussian(double stddev) {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        return stddev * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// Stream tags. Input and observation noise use disjoint tags so changing
/// one generator family never shifts the other's draws.
inline constexpr std::uint64_t kInputStreamTag = 0x494E5055540000ULL;
inline constexpr std::uint64_t kNoiseStreamTag = 0x4E4F4953450000ULL;

}  // namespace onebit
