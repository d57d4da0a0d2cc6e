#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mewls {

/// Seeded generator with portable draws: std::mt19937_64 (its output sequence
/// is fixed by the standard) and hand-written transforms, since the standard
/// distributions are implementation-defined.
///
/// Independent substreams: stream k of seed s is seeded with
/// splitmix64(splitmix64(s) ^ (k * 0x9E3779B97F4A7C15)).
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(seed, stream)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller (cosine branch only).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        return splitmix64(splitmix64(seed) ^ (stream * 0x9E3779B97F4A7C15ULL));
    }

    std::mt19937_64 engine_;
};

}  // namespace mewls
