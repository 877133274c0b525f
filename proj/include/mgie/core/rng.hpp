#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace mgie {

// splitmix64 finalizer, used to derive per-index seeds from a base seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG. Gaussian draws use Box-Muller on raw mt19937_64 output
// so streams are identical across standard library implementations.
struct Rng {
    std::mt19937_64 gen;
    bool has_spare = false;
    double spare = 0.0;

    explicit Rng(uint64_t seed = 0) : gen(seed) {}

    double uniform() {  // [0, 1)
        return (gen() >> 11) * (1.0 / 9007199254740992.0);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t randint(int64_t lo, int64_t hi) {  // inclusive range [lo, hi]
        return lo + static_cast<int64_t>(gen() % static_cast<uint64_t>(hi - lo + 1));
    }
    double normal() {
        if (has_spare) { has_spare = false; return spare; }
        double u1 = 0.0, u2 = 0.0;
        do { u1 = uniform(); } while (u1 <= 1e-300);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare = r * std::sin(2.0 * M_PI * u2);
        has_spare = true;
        return r * std::cos(2.0 * M_PI * u2);
    }
};

}  // namespace mgie
