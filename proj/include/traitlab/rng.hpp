#pragma once

#include <cmath>
#include <cstdint>

namespace traitlab {

// Deterministic, platform-independent randomness. Standard-library engines are
// reproducible but the distributions are not, so all samplers here are built
// from raw 64-bit outputs. One independent stream per replicate is derived by
// hashing (base_seed, replicate_index); no global state anywhere.

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// Derives the seed for an indexed sub-stream (replicate, phase, ...).
inline std::uint64_t derive_stream(std::uint64_t base_seed, std::uint64_t index) {
    SplitMix64 s(base_seed ^ (0xD1B54A32D192ED03ULL * (index + 1)));
    s.next();
    return s.next();
}

// xoshiro256++ (Blackman & Vigna), seeded through SplitMix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 0x9E3779B97F4A7C15ULL;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Strictly positive exponential with the given rate.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    // Exact Poisson sampling: Knuth product for small means, Hormann's PTRD
    // transformed rejection for large ones.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) return poisson_knuth(mean);
        return poisson_ptrd(mean);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    std::uint64_t poisson_ptrd(double mean) {
        const double smu = std::sqrt(mean);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mu = std::log(mean);
        for (;;) {
            double u = uniform01() - 0.5;
            double v = uniform01();
            double us = 0.5 - std::abs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            double k = kf;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_mu - mean - std::lgamma(k + 1.0)) {
                return static_cast<std::uint64_t>(kf);
            }
        }
    }

    std::uint64_t s_[4];
};

}  // namespace traitlab
