#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "fkpi/errors.hpp"

// Counter-based random streams (Philox4x32-10). Every (particle,
// replication) pair owns an independent stream addressed by a 64-bit stream
// id under a 64-bit key, so results never depend on thread count or on the
// order in which streams are consumed.

namespace fkpi {

namespace detail {

inline void philox_mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        philox_mulhilo(m0, ctr[0], hi0, lo0);
        philox_mulhilo(m1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

}  // namespace detail

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Deterministic sub-seed for a labelled sub-experiment (sweep cell,
/// replication, ...). Distinct labels give unrelated keys.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = seed;
    h = splitmix64(h ^ splitmix64(a ^ 0x243F6A8885A308D3ull));
    h = splitmix64(h ^ splitmix64(b ^ 0x13198A2E03707344ull));
    h = splitmix64(h ^ splitmix64(c ^ 0xA4093822299F31D0ull));
    return h;
}

/// One Philox stream: key = master seed, stream id in the high counter
/// words, draw index in the low ones.
class Rng {
public:
    Rng(std::uint64_t key, std::uint64_t stream) : stream_(stream) {
        key_[0] = static_cast<std::uint32_t>(key);
        key_[1] = static_cast<std::uint32_t>(key >> 32);
    }

    std::uint64_t next_u64() {
        if (have_ == 0) refill();
        --have_;
        std::uint64_t v = buf_[have_];
        return v;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_unit() < p; }

    /// Exponential with the given rate (rate > 0).
    double exponential(double rate) {
        return -std::log1p(-next_unit()) / rate;
    }

    /// Index j with probability weights[j] / sum(weights). Weights must be
    /// nonnegative with positive total.
    std::size_t categorical(const std::vector<double>& weights, double total) {
        double target = next_unit() * total;
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
            acc += weights[j];
            if (target < acc) return j;
        }
        return weights.size() - 1;
    }

    std::size_t uniform_index(std::size_t n) {
        std::size_t j = static_cast<std::size_t>(next_unit() * static_cast<double>(n));
        return j < n ? j : n - 1;
    }

    /// Poisson by Knuth's product method; means here are order one.
    std::size_t poisson(double mean) {
        double limit = std::exp(-mean);
        std::size_t k = 0;
        double prod = next_unit();
        while (prod > limit) {
            ++k;
            prod *= next_unit();
        }
        return k;
    }

    /// Standard normal via the Acklam inverse-CDF approximation
    /// (relative error ~1e-9, ample for moment-level checks).
    double normal() { return inverse_normal_cdf(std::max(next_unit(), 0x1.0p-60)); }

    static double inverse_normal_cdf(double p) {
        static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                        -2.759285104469687e+02, 1.383577518672690e+02,
                                        -3.066479806614716e+01, 2.506628277459239e+00};
        static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                        -1.556989798598866e+02, 6.680131188771972e+01,
                                        -1.328068155288572e+01};
        static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                        -2.400758277161838e+00, -2.549732539343734e+00,
                                        4.374664141464968e+00,  2.938163982698783e+00};
        static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                        2.445134137142996e+00, 3.754408661907416e+00};
        constexpr double plow = 0.02425;
        if (p < plow) {
            double q = std::sqrt(-2.0 * std::log(p));
            return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                   ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        }
        if (p > 1.0 - plow) {
            double q = std::sqrt(-2.0 * std::log(1.0 - p));
            return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                   ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        }
        double q = p - 0.5;
        double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

private:
    void refill() {
        std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        auto out = detail::philox4x32_10(ctr, key_);
        buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        have_ = 2;
        ++counter_;
    }

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t buf_[2] = {0, 0};
    int have_ = 0;
};

}  // namespace fkpi
