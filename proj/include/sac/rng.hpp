#pragma once

// Seeded, platform-independent randomness. Every stochastic step in the
// toolkit (probe sampling, weight init, shuffles, noise) draws from a
// xoshiro256** stream seeded through splitmix64, so fixed seeds give
// byte-identical results across platforms and builds. Standard library
// distributions are deliberately avoided: their output is unspecified.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace sac {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent child seed from (seed, tag). Used to give each
// pipeline role (probe sampling, model init, epoch shuffles, ...) its own
// stream without any cross-ordering coupling.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (tag + 1));
    return splitmix64(s);
}

inline uint64_t mix_seed(uint64_t seed, const std::string& tag) {
    // FNV-1a over the tag, then mixed with the seed.
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix_seed(seed, h);
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    uint64_t next() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Unbiased integer in [0, bound) by rejection.
    uint64_t below(uint64_t bound) {
        if (bound == 0) return 0;
        uint64_t threshold = -bound % bound;  // 2^64 mod bound
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    size_t index(size_t n) { return static_cast<size_t>(below(n)); }

    // Uniform in [0, 1) with 53 random bits.
    double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

    // Box-Muller, two uniforms per draw; parity-independent by design.
    double normal() {
        double u1 = real();
        while (u1 <= 0.0) u1 = real();
        double u2 = real();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    // Partial Fisher-Yates: the first `count` draws do not depend on `count`,
    // so a 25-element sample is a prefix of the 50-element sample at the same
    // seed. The probe-count sensitivity harness relies on this.
    std::vector<size_t> sample_without_replacement(size_t population, size_t count) {
        std::vector<size_t> idx(population);
        for (size_t i = 0; i < population; ++i) idx[i] = i;
        for (size_t i = 0; i < count && i + 1 < population; ++i) {
            size_t j = i + index(population - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(count);
        return idx;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace sac
