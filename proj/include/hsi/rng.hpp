#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

// Deterministic random number generation.
//
// Every stochastic step in this project draws from the generators below, never
// from std::random distributions, so that identical seeds give identical bytes
// on any platform / standard library.
//
//   SplitMix64   (Steele, Lea, Flood 2014) - seed expansion and derivation of
//                per-task child seeds from a root seed.
//   xoshiro256** (Blackman, Vigna 2018)    - the main uniform stream.
//   Box-Muller   (1958)                    - Gaussians from uniform pairs:
//                z0 = sqrt(-2 ln u1) cos(2 pi u2),
//                z1 = sqrt(-2 ln u1) sin(2 pi u2),
//                with u1 in (0,1]; the second value is cached and returned on
//                the next call.
//
// uniform_int uses rejection sampling on the high bits (no modulo bias).

namespace hsi {

struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

// Derive a child seed from a root seed and a path of indices (scene id, anchor
// row, draw index, ...). Mixing each path element through SplitMix64 keeps
// children decorrelated regardless of scheduling order.
inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path) {
    uint64_t s = root;
    for (uint64_t p : path) {
        SplitMix64 mix(s ^ (p + 0x632be59bd9b4e019ull));
        s = mix.next();
    }
    return s;
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        SplitMix64 mix(seed);
        for (auto& word : state_) word = mix.next();
        have_spare_ = false;
        spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Inclusive range, unbiased.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(next_u64());  // full range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return lo + static_cast<int64_t>(draw % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(theta);
        have_spare_ = true;
        return radius * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Fisher-Yates; visits indices high to low so the draw sequence is fixed.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    uint64_t state_[4];
    double spare_;
    bool have_spare_;
};

}  // namespace hsi
