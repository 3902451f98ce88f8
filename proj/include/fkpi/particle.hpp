#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fkpi/mesh.hpp"
#include "fkpi/models.hpp"
#include "fkpi/prob.hpp"
#include "fkpi/rng.hpp"
#include "fkpi/selection.hpp"

// The mean-field N-particle chain on the time mesh: per cell one
// acceptance/rejection selection with recycling, then one mutation move.
// Each particle owns a counter-based RNG stream, so a run is reproducible
// bit-for-bit regardless of how replications are scheduled.

namespace fkpi {

// ---------------------------------------------------------------------------
// Mesh models driving the engine
// ---------------------------------------------------------------------------

/// Discrete-time chain viewed on the mesh: mutation is the identity inside
/// an integer cell and the chain kernel when t_{k+1} is an integer.
class DiscreteMeshModel {
public:
    using State = std::uint32_t;
    static constexpr bool finite_space = true;

    DiscreteMeshModel(const FKModelDiscrete& model, MeshSchedule mesh)
        : model_(&model), mesh_(mesh) {
        for (std::size_t p = 0; p < model.horizon(); ++p) {
            log_g_.push_back(model.log_potential(p));
            const auto& k = model.kernel(p);
            kernel_rows_.emplace_back();
            auto& rows = kernel_rows_.back();
            rows.resize(model.state_count());
            for (std::size_t x = 0; x < model.state_count(); ++x) rows[x] = k.row(x);
        }
    }

    std::size_t state_count() const { return model_->state_count(); }
    MeshSchedule mesh() const { return mesh_; }
    std::size_t max_index() const { return model_->horizon() * mesh_.m; }

    State sample_initial(Rng& rng) const {
        return static_cast<State>(rng.categorical(model_->initial_law().weights(), 1.0));
    }

    double potential(std::size_t cell, State x) const { return log_g_[cell / mesh_.m][x]; }

    void mutate(State& x, std::size_t cell, Rng& rng) const {
        if ((cell + 1) % mesh_.m != 0) return;  // identity inside the cell
        const auto& row = kernel_rows_[cell / mesh_.m][x];
        x = static_cast<State>(rng.categorical(row, 1.0));
    }

private:
    const FKModelDiscrete* model_;
    MeshSchedule mesh_;
    std::vector<SignedVector> log_g_;
    std::vector<std::vector<SignedVector>> kernel_rows_;
};

/// CTMC viewed on the mesh: mutation is one uniformized step of exp(L/m)
/// (Poisson number of jumps of the uniformized chain), keeping the engine's
/// sampling path independent of the oracle's matrix exponential.
class CtmcMeshModel {
public:
    using State = std::uint32_t;
    static constexpr bool finite_space = true;

    CtmcMeshModel(const FKModelCTMC& model, MeshSchedule mesh) : model_(&model), mesh_(mesh) {
        const std::size_t d = model.state_count();
        for (std::size_t seg = 0; seg < model.segment_count(); ++seg) {
            const Matrix& l = model.generator_of(seg);
            double lambda = 0.0;
            for (std::size_t i = 0; i < d; ++i) lambda = std::max(lambda, -l(i, i));
            Segment s;
            s.lambda = lambda;
            s.jump_rows.resize(d, SignedVector(d, 0.0));
            if (lambda > 0.0) {
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        s.jump_rows[i][j] = (i == j ? 1.0 : 0.0) + l(i, j) / lambda;
            }
            segments_.push_back(std::move(s));
        }
    }

    std::size_t state_count() const { return model_->state_count(); }
    MeshSchedule mesh() const { return mesh_; }
    std::size_t max_index() const {
        return static_cast<std::size_t>(std::floor(model_->horizon() * double(mesh_.m) + kNormTol));
    }

    State sample_initial(Rng& rng) const {
        return static_cast<State>(rng.categorical(model_->initial_law().weights(), 1.0));
    }

    double potential(std::size_t cell, State x) const {
        return model_->potential_at(mesh_.time_of(cell))[x];
    }

    void mutate(State& x, std::size_t cell, Rng& rng) const {
        const Segment& s = segments_[model_->segment_at(mesh_.time_of(cell))];
        if (s.lambda <= 0.0) return;
        std::size_t jumps = rng.poisson(s.lambda / double(mesh_.m));
        for (std::size_t j = 0; j < jumps; ++j)
            x = static_cast<State>(rng.categorical(s.jump_rows[x], 1.0));
    }

private:
    struct Segment {
        double lambda = 0.0;
        std::vector<SignedVector> jump_rows;
    };
    const FKModelCTMC* model_;
    MeshSchedule mesh_;
    std::vector<Segment> segments_;
};

/// Euler discretization of an Ornstein-Uhlenbeck diffusion with a bounded
/// confining potential U(x) = amp * x^2 / (1 + x^2); demo model, checked at
/// moment level only (no exact flow exists for it here).
class OuEulerModel {
public:
    using State = double;
    static constexpr bool finite_space = false;

    OuEulerModel(double theta, double sigma, double x0, double u_amp, MeshSchedule mesh,
                 double horizon)
        : theta_(theta), sigma_(sigma), x0_(x0), u_amp_(u_amp), mesh_(mesh), horizon_(horizon) {}

    MeshSchedule mesh() const { return mesh_; }
    std::size_t max_index() const {
        return static_cast<std::size_t>(std::floor(horizon_ * double(mesh_.m) + kNormTol));
    }

    State sample_initial(Rng&) const { return x0_; }

    double potential(std::size_t, State x) const { return -u_amp_ * x * x / (1.0 + x * x); }

    void mutate(State& x, std::size_t, Rng& rng) const {
        double dt = 1.0 / double(mesh_.m);
        x += -theta_ * x * dt + sigma_ * std::sqrt(dt) * rng.normal();
    }

    double theta() const { return theta_; }
    double sigma() const { return sigma_; }

private:
    double theta_, sigma_, x0_, u_amp_;
    MeshSchedule mesh_;
    double horizon_;
};

// ---------------------------------------------------------------------------
// Population
// ---------------------------------------------------------------------------

template <class Model>
class ParticleSystem {
public:
    using State = typename Model::State;

    /// N i.i.d. draws from the initial law; all acceptance flags start true.
    ParticleSystem(const Model& model, std::size_t n, std::uint64_t key)
        : model_(&model), key_(key) {
        if (n < 1) throw BadSize("ParticleSystem: need at least one particle");
        states_.reserve(n);
        flags_.assign(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng = stream(i);
            states_.push_back(model.sample_initial(rng));
            clock_.push_back(rng);
        }
    }

    std::size_t size() const { return states_.size(); }
    std::size_t step_index() const { return k_; }
    const std::vector<State>& states() const { return states_; }
    const std::vector<std::uint8_t>& flags() const { return flags_; }
    double mass_estimate() const { return mass_; }

    /// One selection at the current cell: independent Bernoulli acceptance
    /// per particle, rejected particles redrawn from the case recycling
    /// measure built on the frozen pre-step population (simultaneous
    /// update). Also folds mu^N(G) into the running mass product.
    void selection_step(SelectionCase sel) {
        if (k_ >= model_->max_index()) throw HorizonExceeded("selection_step: past horizon");
        if (mid_cell_) throw ModelMismatch("selection_step: mutation pending");
        const std::size_t n = states_.size();
        const double m = static_cast<double>(model_->mesh().m);

        SignedVector v(n), ev(n);
        double mean_ev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = model_->potential(k_, states_[i]);
            ev[i] = std::exp(v[i] / m);
            mean_ev += ev[i];
        }
        mean_ev /= static_cast<double>(n);
        mass_ *= mean_ev;

        const std::vector<State> frozen = states_;
        Recycler recycler(*this, sel, frozen, ev);

        for (std::size_t i = 0; i < n; ++i) {
            double accept_p = 0.0;
            switch (sel) {
                case SelectionCase::Case1NegPotential:
                case SelectionCase::UniformRecycling:
                    if (v[i] > 0.0) throw SignViolation("case 1 selection needs V <= 0");
                    accept_p = ev[i];
                    break;
                case SelectionCase::Case2PosPotential:
                    if (v[i] < 0.0) throw SignViolation("case 2 selection needs V >= 0");
                    accept_p = 1.0 / mean_ev;
                    break;
                case SelectionCase::Case3PairwisePositive: {
                    double above = 0.0;
                    for (std::size_t j = 0; j < n; ++j) above += std::max(ev[j] - ev[i], 0.0);
                    accept_p = 1.0 - above / static_cast<double>(n) / mean_ev;
                    break;
                }
            }
            Rng& rng = clock_[i];
            if (rng.bernoulli(accept_p)) continue;
            states_[i] = recycler.draw(i, rng);
            flags_[i] = 0;
        }
        mid_cell_ = true;
    }

    /// One mutation move per particle, completing the cell.
    void mutation_step() {
        if (!mid_cell_) throw ModelMismatch("mutation_step: selection pending");
        for (std::size_t i = 0; i < states_.size(); ++i)
            model_->mutate(states_[i], k_, clock_[i]);
        mid_cell_ = false;
        ++k_;
    }

    void advance(SelectionCase sel) {
        selection_step(sel);
        mutation_step();
    }

    /// Empirical measure on a finite state space.
    ProbabilityVector empirical() const
        requires Model::finite_space
    {
        SignedVector w(model_->state_count(), 0.0);
        for (State s : states_) w[s] += 1.0;
        return ProbabilityVector(std::move(w));
    }

    double empirical_mean(const std::function<double(const State&)>& f) const {
        double s = 0.0;
        for (const State& x : states_) s += f(x);
        return s / static_cast<double>(states_.size());
    }

    /// Particles never rejected since time zero, and their empirical law.
    std::pair<std::size_t, std::optional<ProbabilityVector>> exact_subpopulation() const
        requires Model::finite_space
    {
        SignedVector w(model_->state_count(), 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < states_.size(); ++i) {
            if (!flags_[i]) continue;
            ++count;
            w[states_[i]] += 1.0;
        }
        if (count == 0) return {0, std::nullopt};
        return {count, ProbabilityVector(std::move(w))};
    }

    std::size_t survivor_count() const {
        std::size_t count = 0;
        for (auto f : flags_) count += f;
        return count;
    }

private:
    Rng stream(std::size_t particle) const { return Rng(key_, particle); }

    /// Recycling draws from the frozen pre-step population. On finite
    /// spaces the per-particle weights collapse to per-state tables; on
    /// general spaces the particle-weight vector is used directly.
    class Recycler {
    public:
        Recycler(const ParticleSystem& sys, SelectionCase sel, const std::vector<State>& frozen,
                 const SignedVector& ev)
            : sel_(sel), frozen_(frozen), ev_(ev) {
            const std::size_t n = frozen.size();
            if constexpr (Model::finite_space) {
                const std::size_t d = sys.model_->state_count();
                counts_.assign(d, 0.0);
                state_ev_.assign(d, 1.0);
                for (std::size_t j = 0; j < n; ++j) {
                    counts_[frozen[j]] += 1.0;
                    state_ev_[frozen[j]] = ev[j];
                }
                if (sel == SelectionCase::Case1NegPotential ||
                    sel == SelectionCase::Case2PosPotential) {
                    weights_.assign(d, 0.0);
                    total_ = 0.0;
                    for (std::size_t s = 0; s < d; ++s) {
                        double w = sel == SelectionCase::Case1NegPotential
                                       ? counts_[s] * state_ev_[s]
                                       : counts_[s] * (state_ev_[s] - 1.0);
                        weights_[s] = w;
                        total_ += w;
                    }
                }
            } else {
                if (sel == SelectionCase::Case1NegPotential ||
                    sel == SelectionCase::Case2PosPotential) {
                    weights_.resize(n);
                    total_ = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        weights_[j] = sel == SelectionCase::Case1NegPotential ? ev[j] : ev[j] - 1.0;
                        total_ += weights_[j];
                    }
                }
            }
        }

        State draw(std::size_t self, Rng& rng) {
            const std::size_t n = frozen_.size();
            switch (sel_) {
                case SelectionCase::UniformRecycling:
                    return frozen_[rng.uniform_index(n)];
                case SelectionCase::Case1NegPotential:
                case SelectionCase::Case2PosPotential: {
                    if (!(total_ > 0.0))
                        throw DegenerateWeight("selection recycler: zero total weight");
                    if constexpr (Model::finite_space) {
                        return static_cast<State>(rng.categorical(weights_, total_));
                    } else {
                        return frozen_[rng.categorical(weights_, total_)];
                    }
                }
                case SelectionCase::Case3PairwisePositive: {
                    // weights (e^{V(y)/m} - e^{V(x)/m})_+ depend on the
                    // rejected particle's own state
                    if constexpr (Model::finite_space) {
                        const std::size_t d = counts_.size();
                        SignedVector w(d);
                        double total = 0.0;
                        for (std::size_t s = 0; s < d; ++s) {
                            w[s] = counts_[s] *
                                   std::max(state_ev_[s] - ev_[self], 0.0);
                            total += w[s];
                        }
                        if (!(total > 0.0))
                            throw DegenerateWeight("case 3 recycler: zero total weight");
                        return static_cast<State>(rng.categorical(w, total));
                    } else {
                        SignedVector w(n);
                        double total = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            w[j] = std::max(ev_[j] - ev_[self], 0.0);
                            total += w[j];
                        }
                        if (!(total > 0.0))
                            throw DegenerateWeight("case 3 recycler: zero total weight");
                        return frozen_[rng.categorical(w, total)];
                    }
                }
            }
            throw ModelMismatch("unknown selection case");
        }

    private:
        SelectionCase sel_;
        const std::vector<State>& frozen_;
        const SignedVector& ev_;
        SignedVector counts_, state_ev_, weights_;
        double total_ = 0.0;
    };

    const Model* model_;
    std::uint64_t key_;
    std::vector<State> states_;
    std::vector<Rng> clock_;
    std::vector<std::uint8_t> flags_;
    std::size_t k_ = 0;
    bool mid_cell_ = false;
    double mass_ = 1.0;
};

// ---------------------------------------------------------------------------
// Whole runs
// ---------------------------------------------------------------------------

struct RunRecord {
    std::size_t mesh_index = 0;
    std::vector<double> f_values;    // one per configured test function
    double mass_estimate = 1.0;
    std::size_t survivors = 0;
    SignedVector empirical;          // finite models only; empty otherwise
};

struct RunEstimate {
    std::vector<RunRecord> records;
    std::uint64_t seed = 0;
    std::size_t n_particles = 0;
    std::size_t m = 1;
};

/// Alternate selection and mutation up to the largest recorded index,
/// taking snapshots of mu^N(f), the mass product and the never-rejected
/// pool at each requested mesh index. Deterministic given the seed.
template <class Model>
RunEstimate run_particles(const Model& model, SelectionCase sel, std::size_t n_particles,
                          std::uint64_t seed, const std::vector<std::size_t>& record_at,
                          const std::vector<std::function<double(const typename Model::State&)>>&
                              test_functions = {}) {
    RunEstimate out;
    out.seed = seed;
    out.n_particles = n_particles;
    out.m = model.mesh().m;
    if (record_at.empty()) return out;
    std::size_t last = 0;
    for (std::size_t k : record_at) {
        if (k > model.max_index()) throw HorizonExceeded("run_particles: record index beyond horizon");
        last = std::max(last, k);
    }

    ParticleSystem<Model> sys(model, n_particles, seed);
    auto snapshot = [&]() {
        RunRecord rec;
        rec.mesh_index = sys.step_index();
        rec.mass_estimate = sys.mass_estimate();
        rec.survivors = sys.survivor_count();
        for (const auto& f : test_functions) rec.f_values.push_back(sys.empirical_mean(f));
        if constexpr (Model::finite_space) rec.empirical = sys.empirical().weights();
        out.records.push_back(std::move(rec));
    };

    for (std::size_t k = 0; k <= last; ++k) {
        for (std::size_t want : record_at)
            if (want == k) snapshot();
        if (k < last) sys.advance(sel);
    }
    return out;
}

/// Survival probabilities of the geometric rejection clock along a path of
/// U values: entry p is prod_{q<p} e^{-U_q/m}, the probability the clock
/// has not rung strictly before reaching t_p (so entry 0 is 1).
inline std::vector<double> geometric_clock_survival(const SignedVector& u_along_path,
                                                    std::size_t m) {
    if (m == 0) throw BadSize("geometric_clock_survival: m must be >= 1");
    std::vector<double> out;
    out.reserve(u_along_path.size() + 1);
    double acc = 1.0;
    out.push_back(acc);
    for (double u : u_along_path) {
        if (u < 0.0) throw SignViolation("geometric_clock_survival: U must be >= 0");
        acc *= std::exp(-u / static_cast<double>(m));
        out.push_back(acc);
    }
    return out;
}

}  // namespace fkpi
