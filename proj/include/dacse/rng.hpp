#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dacse {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combine a seed with a stream tag into a fresh seed. Used everywhere a
// per-record or per-stage RNG is split off a run seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x6a09e667f3bcc909ULL));
}

// Deterministic seeded RNG. The engine is std::mt19937_64 (portable by the
// standard); the distributions are implemented here because the standard
// library's distribution objects are not portable across implementations and
// every artifact in this project must be byte-reproducible from its seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection keeps the draw unbiased.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller. Consumes exactly two uniforms per call,
    // keeping the stream position independent of the values drawn.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Independent child stream keyed by a tag.
    Rng derive(uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace dacse
