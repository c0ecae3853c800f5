#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "notefuse/core/errors.hpp"

namespace notefuse::core {

// splitmix64: used both as a seed scrambler and for tag hashing.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d029bb42dabf95ULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
    // FNV-1a 64
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic PRNG (xoshiro256++) with hand-rolled distributions so the
// stream is pinned by this code, not by the standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        gauss_cached_ = false;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Unbiased via rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) throw input_error("Rng::below: n must be positive");
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int range(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double std = 1.0) {
        // Box-Muller with cached spare.
        if (gauss_cached_) {
            gauss_cached_ = false;
            return mean + std * gauss_spare_;
        }
        double u1 = 1.0 - uniform();  // avoid log(0)
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        gauss_spare_ = r * std::sin(theta);
        gauss_cached_ = true;
        return mean + std * r * std::cos(theta);
    }

    // Marsaglia-Tsang for shape >= 1; boost for shape < 1.
    double gamma(double shape, double scale = 1.0) {
        if (shape <= 0.0 || scale <= 0.0) throw input_error("Rng::gamma: bad parameters");
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    // Knuth for small lambda, normal approximation above 60 (desk-scale means
    // stay well below that; the approximation keeps the tail cheap).
    int poisson(double lambda) {
        if (lambda < 0.0) throw input_error("Rng::poisson: negative mean");
        if (lambda == 0.0) return 0;
        if (lambda > 60.0) {
            double v = std::round(normal(lambda, std::sqrt(lambda)));
            return v < 0.0 ? 0 : static_cast<int>(v);
        }
        const double limit = std::exp(-lambda);
        double prod = uniform();
        int n = 0;
        while (prod > limit) {
            prod *= uniform();
            ++n;
        }
        return n;
    }

    // Negative binomial with the given mean/std via the gamma-Poisson mixture.
    // Falls back to Poisson when the pair is not overdispersed.
    int neg_binomial(double mean, double std) {
        if (mean <= 0.0) throw input_error("Rng::neg_binomial: mean must be positive");
        const double var = std * std;
        if (var <= mean) return poisson(mean);
        const double r = mean * mean / (var - mean);
        const double scale = (var - mean) / mean;  // gamma scale so E[lambda]=mean
        return poisson(gamma(r, scale));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Index sample from unnormalized weights.
    size_t weighted(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        if (total <= 0.0) throw input_error("Rng::weighted: non-positive weight total");
        double r = uniform() * total;
        double c = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            c += w[i];
            if (r < c) return i;
        }
        return w.size() - 1;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4] = {};
    double gauss_spare_ = 0.0;
    bool gauss_cached_ = false;
};

// Independent substream seed derived from a master seed and a tag.
// Generation, preprocessing, per-fold training etc. all fork through this.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
    uint64_t s = master ^ (0x9e3779b97f4a7c15ULL + hash_tag(tag));
    s ^= 0x6a09e667f3bcc909ULL * (index + 1);
    uint64_t t = s;
    splitmix64(t);
    return splitmix64(t);
}

}  // namespace notefuse::core
