#pragma once

// Counter-seeded xoshiro256** streams. Per-path streams are derived from
// (seed, stream index) by splitmix64 hashing, so batches can run on any
// number of threads and still produce identical output.

#include <cmath>
#include <cstdint>

namespace jumpdiff {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        has_spare_ = false;
        spare_ = 0.0;
    }

    // Stream derivation: hash-combines the base seed with stream labels.
    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t sm = seed;
        std::uint64_t h = splitmix64(sm);
        sm = h ^ (a * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL);
        h = splitmix64(sm);
        sm = h ^ (b * 0xc2b2ae3d27d4eb4fULL + 0x3c6ef372fe94f82bULL);
        h = splitmix64(sm);
        sm = h ^ (c * 0x165667b19e3779f9ULL + 0xa54ff53a5f1d36f1ULL);
        Rng r;
        r.reseed(splitmix64(sm));
        return r;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0,1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Marsaglia polar method; the spare is part of the stream state.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, r2;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            r2 = u * u + v * v;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double m = std::sqrt(-2.0 * std::log(r2) / r2);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4] = {1, 2, 3, 4};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace jumpdiff
