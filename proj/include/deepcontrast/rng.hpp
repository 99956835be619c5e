#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace deepcontrast {

// Deterministic random streams. All stochastic operations in this project
// draw from an explicit Rng built via substream(), never from global state,
// so results are reproducible bit-for-bit across runs and independent of
// evaluation order.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// xoshiro256++ with splitmix64 seeding.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& s : state_) s = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    uint64_t uniform_below(uint64_t n) {
        // modulo with rejection to avoid bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    /// Poisson(lambda). Exact for lambda <= 1e4 (Knuth below 10, transformed
    /// rejection above); Gaussian approximation N(lambda, lambda) beyond,
    /// where its error is negligible.
    uint64_t poisson(double lambda);

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream from a root seed and a path of indices.
/// Derivation (stable): h = splitmix64 chain absorbing the root seed and
/// each path element in order; the resulting h seeds the xoshiro state.
/// Identical (seed, path) always produces the identical stream.
inline Rng substream(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t h = seed;
    uint64_t mixed = splitmix64(h);
    for (uint64_t elem : path) {
        h = mixed ^ (elem + 0x9e3779b97f4a7c15ull + (mixed << 6) + (mixed >> 2));
        mixed = splitmix64(h);
    }
    return Rng(mixed);
}

// Stream-purpose tags used in substream paths; keeping them distinct makes
// every (operation, plane, round) combination an independent stream.
namespace stream_tag {
inline constexpr uint64_t kDegrade = 1;
inline constexpr uint64_t kPhantomGeometry = 2;
inline constexpr uint64_t kPhantomNoise = 3;
inline constexpr uint64_t kModelInit = 4;
inline constexpr uint64_t kSampler = 5;
inline constexpr uint64_t kValSampler = 6;
}  // namespace stream_tag

}  // namespace deepcontrast
