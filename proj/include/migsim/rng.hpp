// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace migsim {

// Seed mixing for deriving independent streams from one base seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = base;
    uint64_t z = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    z ^= splitmix64(s);
    s ^= b + 0xd1b54a32d192ed03ULL;
    z ^= splitmix64(s);
    s ^= c + 0x8cb92ba72f3d8dd7ULL;
    z ^= splitmix64(s);
    return z;
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard; the distributions below are hand-written because the standard
// library's distribution objects are implementation-defined, and identical
// output for identical seeds is a hard requirement here.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0,1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller (no caching, so call parity is stable).
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double lognormal(double median, double sigma) {
        return median * std::exp(sigma * gaussian());
    }

    // Knuth's method; fine for the small rates used here.
    uint64_t poisson(double lambda) {
        double l = std::exp(-lambda);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > l);
        return k - 1;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

// Zipf-distributed index sampler over {0, ..., n-1} with weight 1/(i+1)^theta.
// theta = 0 degenerates to the uniform distribution.
class ZipfSampler {
public:
    ZipfSampler(size_t n, double theta) : cdf_(n) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            acc += 1.0 / std::pow(static_cast<double>(i + 1), theta);
            cdf_[i] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }

    size_t sample(Rng& rng) const {
        double u = rng.uniform01();
        size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cdf_[mid] < u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    }

    size_t size() const { return cdf_.size(); }

private:
    std::vector<double> cdf_;
};

} // namespace migsim
