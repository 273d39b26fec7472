#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace hsst {

// Deterministic RNG. Distributions are implemented here rather than with
// std::uniform_real_distribution et al., whose output is implementation
// defined; sequences from this class are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p = 0.5) { return uniform() < p; }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

    // Derive an independent stream, e.g. per identity or per sample.
    Rng fork(std::uint64_t salt) const {
        std::uint64_t s = seed_mix_ ^ (salt * 0x9E3779B97F4A7C15ull);
        return Rng(s == 0 ? 1 : s);
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace hsst
