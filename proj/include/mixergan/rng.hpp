#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mixergan/common.hpp"

namespace mixergan {

// Deterministic RNG. mt19937_64 is fully specified by the standard, and all
// distribution transforms live here (std:: distributions are
// implementation-defined), so a seed pins every drawn value.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) by rejection.
    uint64_t next_below(uint64_t n) {
        if (n == 0) throw ValidationError("Rng::next_below: n must be positive");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; second value cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Normal truncated to |z| <= 2 standard deviations.
    double truncated_normal(double mean, double stddev) {
        double z;
        do {
            z = normal();
        } while (std::fabs(z) > 2.0);
        return mean + stddev * z;
    }

    // Fisher-Yates permutation of [0, n).
    std::vector<int64_t> permutation(int64_t n) {
        std::vector<int64_t> p(n);
        for (int64_t i = 0; i < n; ++i) p[i] = i;
        for (int64_t i = n - 1; i > 0; --i) {
            int64_t j = static_cast<int64_t>(next_below(static_cast<uint64_t>(i) + 1));
            std::swap(p[i], p[j]);
        }
        return p;
    }

    // First k entries of a permutation: sample without replacement.
    std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k) {
        if (k > n) throw ValidationError("sample_without_replacement: k > n");
        std::vector<int64_t> p = permutation(n);
        p.resize(k);
        return p;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mixergan
