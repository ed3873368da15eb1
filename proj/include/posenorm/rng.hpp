#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace posenorm {

// Deterministic RNG used everywhere. All variates are derived from the raw
// mt19937_64 stream by hand so that sequences do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // Standard normal via Box-Muller. Draws two uniforms per call.
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent sub-stream, e.g. one per pipeline stage.
    Rng fork(uint64_t stream) const {
        uint64_t z = state_hash() ^ (stream + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    std::string serialize() const;
    static Rng deserialize(const std::string& text);

private:
    uint64_t state_hash() const;

    std::mt19937_64 engine_;
};

// Stable 64-bit FNV-1a hash, used for config fingerprints and seed derivation.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t derive_seed(uint64_t base, const std::string& tag) {
    return Rng(base ^ fnv1a(tag)).next_u64();
}

}  // namespace posenorm
