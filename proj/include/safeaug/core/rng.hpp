#pragma once

#include <cstdint>
#include <cmath>
#include <vector>
#include <algorithm>

namespace safeaug {

/// Seedable pseudo-random generator with self-contained distributions.
///
/// std::uniform_*_distribution output is implementation-defined, so every
/// draw here is derived directly from the mt19937_64 bit stream. Same seed,
/// same platform or not: identical sequences.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        state_ = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
        // Warm up so nearby seeds decorrelate quickly.
        for (int i = 0; i < 8; ++i) next_u64();
    }

    std::uint64_t seed() const { return seed_; }

    /// Derive an independent child stream, e.g. one per epoch or worker.
    Rng child(std::uint64_t stream_id) const {
        return Rng(splitmix64(seed_ + 0x632be59bd9b4e019ULL * (stream_id + 1)));
    }

    std::uint64_t next_u64() {
        // xorshift* over a splitmix-initialised state; period 2^64-1.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Multiply-shift rejection (Lemire); unbiased.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * span;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < span) {
            const std::uint64_t t = (0 - span) % span;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * span;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return lo + static_cast<std::int64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (both values used).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Sample k distinct indices from [0, n) uniformly, in sampled order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out;
        out.reserve(k);
        for (int i = 0; i < k; ++i) {
            const int j = static_cast<int>(uniform_int(i, n - 1));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t state_ = 1;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace safeaug
