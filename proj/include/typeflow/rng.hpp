#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace typeflow {

// Deterministic pseudo-random stream. Wraps splitmix64 with hand-written
// uniform/normal draws so results are bit-identical across standard library
// implementations (std::*_distribution is implementation-defined).
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (one value per call, no cache, so the
    // stream position is a pure function of call count).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream, e.g. per epoch or per generated file.
    static uint64_t derive(uint64_t seed, uint64_t salt) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace typeflow
