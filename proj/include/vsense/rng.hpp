#pragma once

#include <cmath>
#include <cstdint>

namespace vsense {

/// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state, one add + three
/// xor-shift-multiply mixes per draw. Chosen so that streams reproduce
/// bit-for-bit from a written-down algorithm rather than an
/// implementation-defined std:: distribution.
struct Rng {
    uint64_t state = 0;

    explicit Rng(uint64_t seed = 0) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller; the pair's second value is discarded
    /// so draws stay independent of call history.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent stream from a parent seed and a stream id.
    /// Mixing happens through one SplitMix64 step per word, so streams for
    /// distinct ids never overlap in practice.
    static Rng derive(uint64_t seed, uint64_t stream) {
        Rng mixer(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)));
        return Rng(mixer.next_u64());
    }
    static Rng derive(uint64_t seed, uint64_t a, uint64_t b) {
        return derive(derive(seed, a).state, b);
    }
    static Rng derive(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
        return derive(derive(seed, a, b).state, c);
    }
};

}  // namespace vsense
