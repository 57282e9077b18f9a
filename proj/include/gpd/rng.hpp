#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "gpd/common.hpp"

namespace gpd {

// mt19937_64 raw output is pinned by the standard; the float helpers below are
// hand-rolled so streams are identical across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with a cached spare.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling keeps the distribution exact.
        uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = gen_();
        while (v >= lim) v = gen_();
        return v % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent substream seed from a base seed and a label.
inline uint64_t derive_seed(uint64_t base, const std::string& label) {
    uint64_t h = fnv1a64(label);
    h ^= base + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

inline uint64_t derive_seed(uint64_t base, const std::string& label, uint64_t index) {
    return derive_seed(base, label + "#" + std::to_string(index));
}

}  // namespace gpd
