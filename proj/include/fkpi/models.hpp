#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fkpi/errors.hpp"
#include "fkpi/matrix.hpp"
#include "fkpi/prob.hpp"

// Feynman-Kac problem instances on finite state spaces: a discrete-time
// chain with per-step potentials, and a continuous-time Markov chain with a
// piecewise-constant generator/potential schedule.

namespace fkpi {

/// Discrete-time model: eta_{n+1} = Psi_{G_n}(eta_n) M_{n+1}.
/// kernels[p] is the transition from time p to p+1; potentials[p] is G_p.
class FKModelDiscrete {
public:
    FKModelDiscrete(ProbabilityVector initial, std::vector<TransitionKernel> kernels,
                    std::vector<PotentialVector> potentials)
        : initial_(std::move(initial)), kernels_(std::move(kernels)), potentials_(std::move(potentials)) {
        if (kernels_.size() != potentials_.size())
            throw DimensionMismatch("FKModelDiscrete: kernels/potentials length mismatch");
        if (kernels_.empty()) throw BadSize("FKModelDiscrete: empty horizon");
        for (const auto& k : kernels_) {
            if (!k.is_stochastic()) throw NotStochastic("FKModelDiscrete: kernel not stochastic");
            if (k.size() != initial_.size()) throw DimensionMismatch("FKModelDiscrete: kernel size");
        }
        for (const auto& g : potentials_) {
            if (g.size() != initial_.size()) throw DimensionMismatch("FKModelDiscrete: potential size");
            if (!(g.lo > 0.0)) throw SignViolation("FKModelDiscrete: potentials must be > 0");
        }
    }

    /// Time-homogeneous convenience: one kernel and one potential repeated.
    static FKModelDiscrete homogeneous(ProbabilityVector initial, TransitionKernel kernel,
                                       PotentialVector potential, std::size_t horizon) {
        return FKModelDiscrete(std::move(initial),
                               std::vector<TransitionKernel>(horizon, kernel),
                               std::vector<PotentialVector>(horizon, potential));
    }

    std::size_t state_count() const { return initial_.size(); }
    std::size_t horizon() const { return kernels_.size(); }
    const ProbabilityVector& initial_law() const { return initial_; }

    const TransitionKernel& kernel(std::size_t p) const {
        if (p >= kernels_.size()) throw HorizonExceeded("FKModelDiscrete: step beyond horizon");
        return kernels_[p];
    }
    const PotentialVector& potential(std::size_t p) const {
        if (p >= potentials_.size()) throw HorizonExceeded("FKModelDiscrete: step beyond horizon");
        return potentials_[p];
    }

    /// log G_p as the mesh potential V_{t} for t in [p, p+1).
    SignedVector log_potential(std::size_t p) const {
        const auto& g = potential(p);
        SignedVector v(g.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(g[i]);
        return v;
    }

    /// Same flow with every G_p divided by its max, so that log G <= 0 and
    /// Case-1 selection applies. The normalized flow eta_n is unchanged;
    /// only the mass gamma picks up a known deterministic factor.
    FKModelDiscrete case1_shifted() const {
        std::vector<PotentialVector> shifted;
        shifted.reserve(potentials_.size());
        for (const auto& g : potentials_) {
            SignedVector v = g.values;
            for (double& x : v) x /= g.hi;
            shifted.emplace_back(std::move(v));
        }
        return FKModelDiscrete(initial_, kernels_, std::move(shifted));
    }

private:
    ProbabilityVector initial_;
    std::vector<TransitionKernel> kernels_;
    std::vector<PotentialVector> potentials_;
};

/// Continuous-time model with a piecewise-constant (generator, potential)
/// schedule. Segment j applies on [breaks[j], breaks[j+1]).
class FKModelCTMC {
public:
    FKModelCTMC(ProbabilityVector initial, Matrix generator, PotentialVector potential,
                double horizon)
        : FKModelCTMC(std::move(initial), {0.0}, {std::move(generator)}, {std::move(potential)},
                      horizon) {}

    FKModelCTMC(ProbabilityVector initial, std::vector<double> breaks,
                std::vector<Matrix> generators, std::vector<PotentialVector> potentials,
                double horizon)
        : initial_(std::move(initial)),
          breaks_(std::move(breaks)),
          generators_(std::move(generators)),
          potentials_(std::move(potentials)),
          horizon_(horizon) {
        if (breaks_.empty() || breaks_.front() != 0.0)
            throw ConfigError("FKModelCTMC: schedule must start at t=0");
        if (breaks_.size() != generators_.size() || breaks_.size() != potentials_.size())
            throw DimensionMismatch("FKModelCTMC: schedule length mismatch");
        for (std::size_t j = 1; j < breaks_.size(); ++j)
            if (!(breaks_[j] > breaks_[j - 1])) throw ConfigError("FKModelCTMC: breaks not increasing");
        if (!(horizon_ > 0.0)) throw BadSize("FKModelCTMC: horizon must be > 0");
        for (const auto& l : generators_) validate_generator(l, initial_.size());
        for (const auto& v : potentials_)
            if (v.size() != initial_.size()) throw DimensionMismatch("FKModelCTMC: potential size");
    }

    static void validate_generator(const Matrix& l, std::size_t dim) {
        if (l.n != dim) throw DimensionMismatch("FKModelCTMC: generator size");
        for (std::size_t i = 0; i < l.n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < l.n; ++j) {
                if (i != j && l(i, j) < 0.0)
                    throw SignViolation("FKModelCTMC: negative off-diagonal rate");
                s += l(i, j);
            }
            if (std::abs(s) > kNormTol)
                throw SignViolation("FKModelCTMC: generator row " + std::to_string(i) +
                                    " does not sum to 0");
        }
    }

    std::size_t state_count() const { return initial_.size(); }
    double horizon() const { return horizon_; }
    const ProbabilityVector& initial_law() const { return initial_; }
    std::size_t segment_count() const { return breaks_.size(); }
    double segment_start(std::size_t j) const { return breaks_[j]; }
    double segment_end(std::size_t j) const {
        return j + 1 < breaks_.size() ? breaks_[j + 1] : horizon_;
    }

    std::size_t segment_at(double t) const {
        if (t < 0.0 || t > horizon_ + kNormTol) throw HorizonExceeded("FKModelCTMC: time out of range");
        std::size_t j = breaks_.size() - 1;
        while (j > 0 && breaks_[j] > t) --j;
        return j;
    }

    const Matrix& generator_at(double t) const { return generators_[segment_at(t)]; }
    const PotentialVector& potential_at(double t) const { return potentials_[segment_at(t)]; }
    const Matrix& generator_of(std::size_t seg) const { return generators_[seg]; }
    const PotentialVector& potential_of(std::size_t seg) const { return potentials_[seg]; }

    /// Potential shifted per segment so V <= 0 everywhere (Case-1 form:
    /// V = -U with U >= 0). Normalized flows are invariant under the shift.
    FKModelCTMC case1_shifted() const {
        std::vector<PotentialVector> shifted;
        shifted.reserve(potentials_.size());
        for (const auto& v : potentials_) {
            SignedVector s = v.values;
            for (double& x : s) x -= v.hi;
            shifted.emplace_back(std::move(s));
        }
        return FKModelCTMC(initial_, breaks_, generators_, std::move(shifted), horizon_);
    }

private:
    ProbabilityVector initial_;
    std::vector<double> breaks_;
    std::vector<Matrix> generators_;
    std::vector<PotentialVector> potentials_;
    double horizon_ = 0.0;
};

// ---------------------------------------------------------------------------
// Model zoo
// ---------------------------------------------------------------------------

/// TS1: two-state chain, M = [[0.7,0.3],[0.4,0.6]], G = (1,2), mu0 = delta_0.
inline FKModelDiscrete make_ts1(std::size_t horizon = 4) {
    auto m = TransitionKernel::stochastic({0.7, 0.3, 0.4, 0.6}, 2);
    return FKModelDiscrete::homogeneous(ProbabilityVector::dirac(0, 2), m,
                                        PotentialVector({1.0, 2.0}), horizon);
}

/// CT1: three-state CTMC with V = (0, 0.3, 0.6), irreducible generator,
/// started at delta_0.
inline FKModelCTMC make_ct1(double horizon = 4.0) {
    Matrix l(3, {-1.0, 0.7, 0.3,  //
                 0.4, -0.9, 0.5,  //
                 0.2, 0.8, -1.0});
    return FKModelCTMC(ProbabilityVector::dirac(0, 3), std::move(l),
                       PotentialVector({0.0, 0.3, 0.6}), horizon);
}

/// MIX1: five-state chain whose kernel has a large minimal row overlap, so
/// the one-step mixing condition holds with rho extracted numerically.
/// Potentials are gentle (values near 1).
inline FKModelDiscrete make_mix1(std::size_t horizon = 8) {
    SignedVector local = {
        0.50, 0.30, 0.10, 0.05, 0.05,  //
        0.20, 0.40, 0.20, 0.10, 0.10,  //
        0.10, 0.20, 0.40, 0.20, 0.10,  //
        0.10, 0.10, 0.20, 0.40, 0.20,  //
        0.05, 0.05, 0.10, 0.30, 0.50,
    };
    SignedVector rows(25);
    for (std::size_t i = 0; i < 25; ++i) rows[i] = 0.5 * 0.2 + 0.5 * local[i];
    auto m = TransitionKernel::stochastic(std::move(rows), 5);
    return FKModelDiscrete::homogeneous(ProbabilityVector::uniform(5), m,
                                        PotentialVector({1.05, 0.95, 1.00, 1.10, 0.90}), horizon);
}

}  // namespace fkpi
