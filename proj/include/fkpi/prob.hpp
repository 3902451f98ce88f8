#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fkpi/errors.hpp"

// Finite-state measures, kernels and the elementary transforms everything
// else consumes. State spaces are {0, ..., d-1}; measures are dense vectors.

namespace fkpi {

inline constexpr double kNormTol = 1e-12;
inline constexpr double kWeightFloor = 1e-300;

using SignedVector = std::vector<double>;

inline bool all_finite(const SignedVector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// A probability measure on a finite state space. Weights are kept
/// normalized (sum 1 within 1e-12); construction renormalizes to kill the
/// drift of long deterministic recursions.
class ProbabilityVector {
public:
    ProbabilityVector() = default;

    explicit ProbabilityVector(SignedVector weights) : w_(std::move(weights)) {
        double sum = 0.0;
        for (double x : w_) {
            if (!(x >= 0.0)) throw BadSize("ProbabilityVector: negative or NaN weight");
            sum += x;
        }
        if (sum < kWeightFloor) throw DegenerateWeight("ProbabilityVector: total mass vanished");
        for (double& x : w_) x /= sum;
    }

    static ProbabilityVector dirac(std::size_t state, std::size_t space_size) {
        SignedVector w(space_size, 0.0);
        w.at(state) = 1.0;
        return ProbabilityVector(std::move(w));
    }

    static ProbabilityVector uniform(std::size_t space_size) {
        return ProbabilityVector(SignedVector(space_size, 1.0));
    }

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const SignedVector& weights() const { return w_; }

    /// Integral mu(f).
    double integrate(const SignedVector& f) const {
        if (f.size() != w_.size()) throw DimensionMismatch("integrate: size mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * f[i];
        return s;
    }

private:
    SignedVector w_;
};

/// Row-stochastic matrix (or plain nonnegative matrix for unnormalized
/// semigroups), stored row-major.
class TransitionKernel {
public:
    TransitionKernel() = default;

    static TransitionKernel stochastic(SignedVector row_major, std::size_t n) {
        TransitionKernel k = validated(std::move(row_major), n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += k.data_[i * n + j];
            if (std::abs(s - 1.0) > kNormTol)
                throw NotStochastic("kernel row " + std::to_string(i) + " sums to " +
                                    std::to_string(s));
        }
        k.stochastic_ = true;
        return k;
    }

    static TransitionKernel nonnegative(SignedVector row_major, std::size_t n) {
        return validated(std::move(row_major), n);
    }

    static TransitionKernel identity(std::size_t n) {
        SignedVector d(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
        TransitionKernel k;
        k.data_ = std::move(d);
        k.n_ = n;
        k.stochastic_ = true;
        return k;
    }

    std::size_t size() const { return n_; }
    bool is_stochastic() const { return stochastic_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    const SignedVector& data() const { return data_; }

    SignedVector row(std::size_t i) const {
        return SignedVector(data_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                            data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_));
    }

    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (std::size_t j = 0; j < n_; ++j) s += data_[i * n_ + j];
        return s;
    }

private:
    static TransitionKernel validated(SignedVector row_major, std::size_t n) {
        if (row_major.size() != n * n) throw DimensionMismatch("kernel: bad storage size");
        for (double x : row_major)
            if (!(x >= 0.0)) throw NotStochastic("kernel: negative or NaN entry");
        TransitionKernel k;
        k.data_ = std::move(row_major);
        k.n_ = n;
        return k;
    }

    SignedVector data_;
    std::size_t n_ = 0;
    bool stochastic_ = false;
};

/// Per-state potential values (V_t or log G) with cached bounds.
struct PotentialVector {
    SignedVector values;
    double lo = 0.0;
    double hi = 0.0;

    PotentialVector() = default;

    explicit PotentialVector(SignedVector v) : values(std::move(v)) {
        if (values.empty() || !all_finite(values))
            throw BadSize("PotentialVector: empty or non-finite");
        auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        lo = *mn;
        hi = *mx;
    }

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    /// sup-norm max_i |v_i|
    double sup_norm() const { return std::max(std::abs(lo), std::abs(hi)); }
};

// ---------------------------------------------------------------------------
// Elementary transforms
// ---------------------------------------------------------------------------

/// Boltzmann-Gibbs transform Psi_g(mu)_i = mu_i g_i / mu(g). Requires g > 0.
inline ProbabilityVector boltzmann_gibbs(const ProbabilityVector& mu, const SignedVector& g) {
    if (g.size() != mu.size()) throw DimensionMismatch("boltzmann_gibbs: size mismatch");
    for (double x : g)
        if (!(x > 0.0)) throw SignViolation("boltzmann_gibbs: potential weight must be > 0");
    double z = mu.integrate(g);
    if (!(z > kWeightFloor)) throw DegenerateWeight("boltzmann_gibbs: mu(g) vanished");
    SignedVector r(mu.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = mu[i] * g[i];
    return ProbabilityVector(std::move(r));
}

inline ProbabilityVector boltzmann_gibbs(const ProbabilityVector& mu, const PotentialVector& g) {
    return boltzmann_gibbs(mu, g.values);
}

/// Dual action mu -> mu K (row vector times matrix).
inline SignedVector apply_kernel(const SignedVector& mu, const TransitionKernel& k) {
    if (mu.size() != k.size()) throw DimensionMismatch("apply_kernel: size mismatch");
    SignedVector out(k.size(), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double w = mu[i];
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < k.size(); ++j) out[j] += w * k(i, j);
    }
    return out;
}

inline ProbabilityVector apply_kernel(const ProbabilityVector& mu, const TransitionKernel& k) {
    if (!k.is_stochastic()) throw NotStochastic("apply_kernel: kernel not stochastic");
    return ProbabilityVector(apply_kernel(mu.weights(), k));
}

/// Total variation distance: half the L1 distance. On finite spaces this
/// equals the sup over osc(f) <= 1 test functions.
inline double tv_distance(const SignedVector& mu, const SignedVector& nu) {
    if (mu.size() != nu.size()) throw DimensionMismatch("tv_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
    return 0.5 * s;
}

inline double tv_distance(const ProbabilityVector& mu, const ProbabilityVector& nu) {
    return tv_distance(mu.weights(), nu.weights());
}

/// Dobrushin contraction coefficient: max pairwise row TV distance.
inline double dobrushin(const TransitionKernel& k) {
    if (!k.is_stochastic()) throw NotStochastic("dobrushin: kernel not stochastic");
    const std::size_t n = k.size();
    double beta = 0.0;
    for (std::size_t x = 0; x + 1 < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += std::abs(k(x, j) - k(y, j));
            beta = std::max(beta, 0.5 * s);
        }
    }
    return beta;
}

/// osc(f) = max f - min f.
inline double oscillation(const SignedVector& f) {
    if (f.empty()) return 0.0;
    auto [mn, mx] = std::minmax_element(f.begin(), f.end());
    return *mx - *mn;
}

/// Minimal row overlap rho = min_{x,y} sum_z min(K(x,z), K(y,z)); the kernel
/// satisfies the one-step mixing condition K(x,.) >= rho K(y,.) in the
/// Doeblin sense, and dobrushin(K) = 1 - rho for two rows at the argmin.
inline double min_row_overlap(const TransitionKernel& k) {
    if (!k.is_stochastic()) throw NotStochastic("min_row_overlap: kernel not stochastic");
    const std::size_t n = k.size();
    double rho = 1.0;
    for (std::size_t x = 0; x + 1 < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += std::min(k(x, j), k(y, j));
            rho = std::min(rho, s);
        }
    }
    return rho;
}

}  // namespace fkpi
