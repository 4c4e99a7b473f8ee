#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mipose {

// Deterministic random helpers. std::mt19937_64 output is fixed by the
// standard; the distribution shaping below is hand-rolled so that results
// are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    double gaussian() {
        // Box-Muller, one value per call (cache the pair).
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Derive an independent stream; used to give scenes/classes their own rng.
    Rng split(std::uint64_t salt) const {
        std::uint64_t x = seed_mix_ ^ (salt + 0x9e3779b97f4a7c15ULL);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return Rng(x);
    }

    static Rng seeded(std::uint64_t seed, std::uint64_t salt) {
        return Rng(seed).split(salt);
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = engine_();
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mipose
