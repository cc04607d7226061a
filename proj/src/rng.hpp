#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sigent {

// Deterministic random stream. All draws are pinned to explicit formulas on
// top of mt19937_64 so that a (seed, call sequence) pair fixes every number
// the library produces, independent of standard-library distribution details.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, one value per call, no cached state.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Unbiased integer in [0, n).
    uint64_t integer(uint64_t n) {
        uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        uint64_t r = gen_();
        while (r >= bound) r = gen_();
        return r % n;
    }

private:
    std::mt19937_64 gen_;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-stream derivation so independent consumers (env, sampling,
// initialization, ...) never share a generator.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

}  // namespace sigent
