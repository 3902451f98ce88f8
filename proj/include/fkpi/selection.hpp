#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "fkpi/matrix.hpp"
#include "fkpi/prob.hpp"

// The mu-dependent selection kernels S_{t,mu} realizing the Markov
// transport identity Psi_{exp(V/m)}(mu) = mu S, their interacting jump
// generators, and the first-order expansion remainders. Kernels are
// materialized as dense matrices keyed to the mu snapshot; they must be
// rebuilt whenever mu changes.

namespace fkpi {

enum class SelectionCase {
    Case1NegPotential,    // V = -U, U >= 0: accept w.p. e^{-U(x)/m}
    Case2PosPotential,    // V >= 0: accept w.p. 1/mu(e^{V/m})
    Case3PairwisePositive,  // any bounded V: pairwise positive-part rates
    UniformRecycling,     // Case 1 with the recycler replaced by plain mu
};

inline const char* to_string(SelectionCase c) {
    switch (c) {
        case SelectionCase::Case1NegPotential: return "case1";
        case SelectionCase::Case2PosPotential: return "case2";
        case SelectionCase::Case3PairwisePositive: return "case3";
        case SelectionCase::UniformRecycling: return "uniform";
    }
    return "?";
}

inline void check_case_sign(SelectionCase c, const PotentialVector& v) {
    switch (c) {
        case SelectionCase::Case1NegPotential:
        case SelectionCase::UniformRecycling:
            if (v.hi > 0.0) throw SignViolation("case 1 requires V = -U with U >= 0");
            break;
        case SelectionCase::Case2PosPotential:
            if (v.lo < 0.0) throw SignViolation("case 2 requires V >= 0");
            break;
        case SelectionCase::Case3PairwisePositive:
            break;
    }
}

struct SelectionKernelInstance {
    TransitionKernel kernel;
    SelectionCase kind = SelectionCase::Case1NegPotential;
    std::size_t m = 1;
    ProbabilityVector mu_snapshot;
};

/// Exact finite-space selection matrix for the given case. The Case-2 and
/// Case-3 rows are assembled in the cancellation-free form
/// S(x,y) = (...) delta_xy + mu_y w_y(x) / mu(e^{V/m}), which extends
/// continuously through the degenerate recycler (V constant gives the
/// identity kernel, the unique kernel still satisfying the transport
/// identity there).
inline SelectionKernelInstance build_selection_kernel(SelectionCase c, const PotentialVector& v,
                                                      std::size_t m, const ProbabilityVector& mu) {
    if (v.size() != mu.size()) throw DimensionMismatch("build_selection_kernel: size mismatch");
    if (m == 0) throw BadSize("build_selection_kernel: m must be >= 1");
    check_case_sign(c, v);
    const std::size_t d = v.size();
    const double dm = static_cast<double>(m);
    SignedVector ev(d);  // e^{V/m}
    for (std::size_t i = 0; i < d; ++i) ev[i] = std::exp(v[i] / dm);
    SignedVector rows(d * d, 0.0);

    switch (c) {
        case SelectionCase::Case1NegPotential: {
            // recycler Psi_{e^{-U/m}}(mu); note e^{V/m} = e^{-U/m} here
            double z = mu.integrate(ev);
            if (!(z > kWeightFloor)) throw DegenerateWeight("case 1: recycler mass vanished");
            for (std::size_t x = 0; x < d; ++x) {
                double keep = ev[x];
                for (std::size_t y = 0; y < d; ++y)
                    rows[x * d + y] = (1.0 - keep) * mu[y] * ev[y] / z;
                rows[x * d + x] += keep;
            }
            break;
        }
        case SelectionCase::UniformRecycling: {
            for (std::size_t x = 0; x < d; ++x) {
                double keep = ev[x];
                for (std::size_t y = 0; y < d; ++y) rows[x * d + y] = (1.0 - keep) * mu[y];
                rows[x * d + x] += keep;
            }
            break;
        }
        case SelectionCase::Case2PosPotential: {
            double z = mu.integrate(ev);  // >= 1 since V >= 0
            for (std::size_t x = 0; x < d; ++x) {
                for (std::size_t y = 0; y < d; ++y) rows[x * d + y] = mu[y] * (ev[y] - 1.0) / z;
                rows[x * d + x] += 1.0 / z;
            }
            break;
        }
        case SelectionCase::Case3PairwisePositive: {
            double z = mu.integrate(ev);
            if (!(z > kWeightFloor)) throw DegenerateWeight("case 3: mu(e^{V/m}) vanished");
            for (std::size_t x = 0; x < d; ++x) {
                double total = 0.0;
                for (std::size_t y = 0; y < d; ++y) {
                    double w = std::max(ev[y] - ev[x], 0.0);
                    rows[x * d + y] = mu[y] * w / z;
                    total += rows[x * d + y];
                }
                rows[x * d + x] += 1.0 - total;  // total = a(x) in [0,1]
            }
            break;
        }
    }
    return SelectionKernelInstance{TransitionKernel::stochastic(std::move(rows), d), c, m, mu};
}

/// Interacting jump generator of the case (rows sum to 0):
///   case 1: L(x,y) = U(x) mu(y)
///   case 2: L(x,y) = V(y) mu(y)
///   case 3: L(x,y) = (V(y) - V(x))_+ mu(y)
inline Matrix jump_generator(SelectionCase c, const PotentialVector& v,
                             const ProbabilityVector& mu) {
    if (v.size() != mu.size()) throw DimensionMismatch("jump_generator: size mismatch");
    check_case_sign(c, v);
    const std::size_t d = v.size();
    Matrix l(d);
    switch (c) {
        case SelectionCase::Case1NegPotential:
        case SelectionCase::UniformRecycling: {
            for (std::size_t x = 0; x < d; ++x) {
                double u = -v[x];
                for (std::size_t y = 0; y < d; ++y) l(x, y) = u * mu[y];
                l(x, x) -= u;
            }
            break;
        }
        case SelectionCase::Case2PosPotential: {
            double mean = 0.0;
            for (std::size_t y = 0; y < d; ++y) mean += v[y] * mu[y];
            for (std::size_t x = 0; x < d; ++x) {
                for (std::size_t y = 0; y < d; ++y) l(x, y) = v[y] * mu[y];
                l(x, x) -= mean;
            }
            break;
        }
        case SelectionCase::Case3PairwisePositive: {
            for (std::size_t x = 0; x < d; ++x) {
                double rate = 0.0;
                for (std::size_t y = 0; y < d; ++y) {
                    l(x, y) = std::max(v[y] - v[x], 0.0) * mu[y];
                    rate += l(x, y);
                }
                l(x, x) -= rate;
            }
            break;
        }
    }
    return l;
}

/// Max-row L1 norm of R = m^2 (S - Id - L/m); the first-order expansion
/// states this stays bounded uniformly in m and mu.
inline double expansion_remainder(SelectionCase c, const PotentialVector& v, std::size_t m,
                                  const ProbabilityVector& mu) {
    SelectionKernelInstance s = build_selection_kernel(c, v, m, mu);
    Matrix l = jump_generator(c, v, mu);
    const std::size_t d = v.size();
    const double dm = static_cast<double>(m);
    double worst = 0.0;
    for (std::size_t x = 0; x < d; ++x) {
        double row = 0.0;
        for (std::size_t y = 0; y < d; ++y) {
            double id = (x == y) ? 1.0 : 0.0;
            row += std::abs(dm * dm * (s.kernel(x, y) - id - l(x, y) / dm));
        }
        worst = std::max(worst, row);
    }
    return worst;
}

/// The +/- decomposition L = L+ + L- around the mean mu(V); both parts are
/// jump generators and their sum satisfies mu(Lf) = mu(Vf) - mu(V)mu(f).
inline std::pair<Matrix, Matrix> plus_minus_generator(const PotentialVector& v,
                                                      const ProbabilityVector& mu) {
    if (v.size() != mu.size()) throw DimensionMismatch("plus_minus_generator: size mismatch");
    const std::size_t d = v.size();
    double mean = 0.0;
    for (std::size_t y = 0; y < d; ++y) mean += v[y] * mu[y];
    Matrix plus(d), minus(d);
    for (std::size_t x = 0; x < d; ++x) {
        double neg_rate = std::max(mean - v[x], 0.0);  // [V(x) - mu(V)]_-
        double plus_total = 0.0;
        for (std::size_t y = 0; y < d; ++y) {
            minus(x, y) = neg_rate * mu[y];
            plus(x, y) = std::max(v[y] - mean, 0.0) * mu[y];
            plus_total += plus(x, y);
        }
        minus(x, x) -= neg_rate;
        plus(x, x) -= plus_total;
    }
    return {plus, minus};
}

}  // namespace fkpi
