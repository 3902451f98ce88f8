#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "fkpi/matrix.hpp"
#include "fkpi/mesh.hpp"
#include "fkpi/models.hpp"
#include "fkpi/prob.hpp"

// Deterministic, matrix-exact computation of every measure flow, semigroup
// and constant the convergence statements mention. This module is the
// verification oracle for the stochastic engines: everything here is linear
// algebra on small dense matrices, no sampling.

namespace fkpi {

struct DiscreteFlowResult {
    double gamma_mass = 1.0;   // gamma_n(1)
    ProbabilityVector eta;     // eta_n
};

/// Exact recursion eta_{n+1} = Psi_{G_n}(eta_n) M_{n+1}, with the
/// unnormalized mass accumulated multiplicatively as prod_p eta_p(G_p).
inline DiscreteFlowResult flow_discrete(const FKModelDiscrete& model, std::size_t n) {
    if (n > model.horizon()) throw HorizonExceeded("flow_discrete: n beyond horizon");
    DiscreteFlowResult r{1.0, model.initial_law()};
    for (std::size_t p = 0; p < n; ++p) {
        const auto& g = model.potential(p);
        r.gamma_mass *= r.eta.integrate(g.values);
        r.eta = apply_kernel(boltzmann_gibbs(r.eta, g), model.kernel(p));
    }
    return r;
}

struct MeshFlowResult {
    double mass = 1.0;         // nu_{t_k}(1) of the m-approximation
    ProbabilityVector mu;      // mu_{t_k}^{(m)}
};

namespace detail {

/// Per-cell data of the m-approximation of a discrete model: potential
/// V_{t_j} = log G_{floor(t_j)}, transport = identity except when t_{j+1}
/// is an integer, where the chain kernel fires.
struct DiscreteMeshCells {
    const FKModelDiscrete* model;
    MeshSchedule mesh;

    std::size_t max_index() const { return model->horizon() * mesh.m; }

    SignedVector potential(std::size_t j) const { return model->log_potential(j / mesh.m); }

    const TransitionKernel* transport(std::size_t j) const {
        if ((j + 1) % mesh.m != 0) return nullptr;  // identity inside the cell
        return &model->kernel(j / mesh.m);
    }
};

/// Per-cell data of the m-approximation of a CTMC model: schedule sampled
/// at the left endpoint t_j, transport exp(L(t_j)/m) cached per segment.
struct CtmcMeshCells {
    const FKModelCTMC* model;
    MeshSchedule mesh;
    mutable std::vector<std::optional<TransitionKernel>> cache;

    CtmcMeshCells(const FKModelCTMC* mdl, MeshSchedule ms)
        : model(mdl), mesh(ms), cache(mdl->segment_count()) {}

    std::size_t max_index() const {
        return static_cast<std::size_t>(std::floor(model->horizon() * static_cast<double>(mesh.m) +
                                                   kNormTol));
    }

    SignedVector potential(std::size_t j) const {
        return model->potential_at(mesh.time_of(j)).values;
    }

    const TransitionKernel* transport(std::size_t j) const {
        std::size_t seg = model->segment_at(mesh.time_of(j));
        if (!cache[seg]) {
            cache[seg] = transition_from_generator(model->generator_of(seg),
                                                   1.0 / static_cast<double>(mesh.m));
        }
        return &*cache[seg];
    }
};

template <class Cells>
MeshFlowResult run_mesh_flow(const Cells& cells, std::size_t k) {
    if (k > cells.max_index()) throw HorizonExceeded("mesh_flow: index beyond horizon");
    const double m = static_cast<double>(cells.mesh.m);
    MeshFlowResult r{1.0, cells.model->initial_law()};
    for (std::size_t j = 0; j < k; ++j) {
        SignedVector v = cells.potential(j);
        SignedVector g(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) g[i] = std::exp(v[i] / m);
        r.mass *= r.mu.integrate(g);
        r.mu = boltzmann_gibbs(r.mu, g);
        if (const TransitionKernel* t = cells.transport(j)) r.mu = apply_kernel(r.mu, *t);
    }
    return r;
}

inline ProbabilityVector clamp_normalize(SignedVector v) {
    double mass = 0.0;
    for (double x : v) mass += x;
    for (double& x : v) {
        if (x < 0.0 && x > -1e-9 * std::max(mass, 1e-30)) x = 0.0;
    }
    return ProbabilityVector(std::move(v));
}

}  // namespace detail

inline MeshFlowResult mesh_flow_full(const FKModelDiscrete& model, MeshSchedule mesh,
                                     std::size_t k) {
    return detail::run_mesh_flow(detail::DiscreteMeshCells{&model, mesh}, k);
}

inline MeshFlowResult mesh_flow_full(const FKModelCTMC& model, MeshSchedule mesh, std::size_t k) {
    return detail::run_mesh_flow(detail::CtmcMeshCells(&model, mesh), k);
}

/// mu_{t_k}^{(m)} from the deterministic evolution equation with
/// G_{t_j} = exp(V_{t_j}/m).
template <class Model>
ProbabilityVector mesh_flow(const Model& model, MeshSchedule mesh, std::size_t k) {
    return mesh_flow_full(model, mesh, k).mu;
}

struct CtFlowResult {
    double mass = 1.0;         // nu_t(1)
    ProbabilityVector mu;      // mu_t
};

/// Exact continuous-time flow: nu_t = mu_0 exp((L + diag(V)) t), evaluated
/// piecewise over the constant segments of the schedule.
inline CtFlowResult ct_exact_flow(const FKModelCTMC& model, double t) {
    if (t < 0.0 || t > model.horizon() + kNormTol)
        throw HorizonExceeded("ct_exact_flow: time out of range");
    SignedVector nu = model.initial_law().weights();
    double mass_scale = 1.0;
    double cursor = 0.0;
    while (cursor < t - kNormTol) {
        std::size_t seg = model.segment_at(cursor);
        double stop = std::min(t, model.segment_end(seg));
        Matrix h = model.generator_of(seg);
        const auto& v = model.potential_of(seg);
        for (std::size_t i = 0; i < h.n; ++i) h(i, i) += v[i];
        h *= (stop - cursor);
        nu = row_times(nu, expm(h));
        // keep nu at order one; fold the scale into the mass
        double s = 0.0;
        for (double x : nu) s += std::abs(x);
        if (s > 0.0) {
            mass_scale *= s;
            for (double& x : nu) x /= s;
        }
        cursor = stop;
    }
    double mass = 0.0;
    for (double x : nu) mass += x;
    return CtFlowResult{mass * mass_scale, detail::clamp_normalize(std::move(nu))};
}

// ---------------------------------------------------------------------------
// Semigroups
// ---------------------------------------------------------------------------

struct SemigroupBundle {
    Matrix q;             // unnormalized Q_{k,n}
    TransitionKernel p;   // P_{k,n} = Q(.)/Q(1)
    double g = 1.0;       // max_x Q1(x) / min_y Q1(y)
    double beta = 0.0;    // dobrushin(P)
};

/// Q_{k,n} = prod_{l=k}^{n-1} diag(G_l) M_{l+1} with its normalized kernel
/// and the two constants entering the nonasymptotic variance bound.
inline SemigroupBundle semigroup(const FKModelDiscrete& model, std::size_t k, std::size_t n) {
    if (k > n) throw IndexOrder("semigroup: k > n");
    if (n > model.horizon()) throw HorizonExceeded("semigroup: n beyond horizon");
    const std::size_t d = model.state_count();
    Matrix q = Matrix::identity(d);
    for (std::size_t l = k; l < n; ++l) {
        const auto& g = model.potential(l);
        const auto& m = model.kernel(l);
        Matrix factor(d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) factor(i, j) = g[i] * m(i, j);
        q = matmul(q, factor);
    }
    SignedVector q1(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) q1[i] += q(i, j);
    double lo = q1[0], hi = q1[0];
    for (double x : q1) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!(lo > 0.0)) throw DegenerateWeight("semigroup: Q(1) vanished");
    SignedVector rows(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) rows[i * d + j] = q(i, j) / q1[i];
    SemigroupBundle b;
    b.q = std::move(q);
    b.p = TransitionKernel::stochastic(std::move(rows), d);
    b.g = hi / lo;
    b.beta = dobrushin(b.p);
    return b;
}

/// Nonlinear semigroup Phi_{k,n}(mu) computed through the step recursion
/// (an independent route from the Q-matrix product above).
inline ProbabilityVector fk_semigroup_map(const FKModelDiscrete& model, std::size_t k,
                                          std::size_t n, ProbabilityVector mu) {
    if (k > n) throw IndexOrder("fk_semigroup_map: k > n");
    if (n > model.horizon()) throw HorizonExceeded("fk_semigroup_map: n beyond horizon");
    for (std::size_t l = k; l < n; ++l)
        mu = apply_kernel(boltzmann_gibbs(mu, model.potential(l)), model.kernel(l));
    return mu;
}

/// Structural part of the variance constant a(n):
/// sum_{k<n} g_{k,n}^3 g_{k,k+1}^3 (||log G_k|| v 1)^2 beta(P_{k,n}).
/// The universal multiplicative constant is not computable and is omitted.
inline double theorem2_constant(const FKModelDiscrete& model, std::size_t n) {
    if (n > model.horizon()) throw HorizonExceeded("theorem2_constant: n beyond horizon");
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        SemigroupBundle far = semigroup(model, k, n);
        SemigroupBundle near = semigroup(model, k, k + 1);
        const auto& g = model.potential(k);
        double log_norm = std::max(std::abs(std::log(g.lo)), std::abs(std::log(g.hi)));
        double factor = std::max(log_norm, 1.0);
        total += std::pow(far.g, 3) * std::pow(near.g, 3) * factor * factor * far.beta;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Uniform recycling flow
// ---------------------------------------------------------------------------

namespace detail {

/// One step of mu S~ where S~(x,.) = e^{-U(x)/m} delta_x
/// + (1 - e^{-U(x)/m}) mu: rejected mass recycles into plain mu.
inline ProbabilityVector uniform_recycling_step(const ProbabilityVector& mu, const SignedVector& v,
                                                double m) {
    SignedVector accept(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double u = -v[i];
        if (u < 0.0) throw WrongPotentialSign("uniform recycling requires V = -U with U >= 0");
        accept[i] = std::exp(-u / m);
    }
    double recycled = 1.0 - mu.integrate(accept);
    SignedVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = mu[i] * (accept[i] + recycled);
    return ProbabilityVector(std::move(out));
}

template <class Cells>
ProbabilityVector run_uniform_recycling(const Cells& cells, std::size_t k) {
    if (k > cells.max_index()) throw HorizonExceeded("uniform_recycling_flow: index beyond horizon");
    const double m = static_cast<double>(cells.mesh.m);
    ProbabilityVector mu = cells.model->initial_law();
    for (std::size_t j = 0; j < k; ++j) {
        mu = uniform_recycling_step(mu, cells.potential(j), m);
        if (const TransitionKernel* t = cells.transport(j)) mu = apply_kernel(mu, *t);
    }
    return mu;
}

}  // namespace detail

/// Deterministic flow of the simplified (uniform-recycling) selection.
/// Requires the Case-1 sign convention V = -U, U >= 0.
inline ProbabilityVector uniform_recycling_flow(const FKModelDiscrete& model, MeshSchedule mesh,
                                                std::size_t k) {
    return detail::run_uniform_recycling(detail::DiscreteMeshCells{&model, mesh}, k);
}

inline ProbabilityVector uniform_recycling_flow(const FKModelCTMC& model, MeshSchedule mesh,
                                                std::size_t k) {
    return detail::run_uniform_recycling(detail::CtmcMeshCells(&model, mesh), k);
}

// ---------------------------------------------------------------------------
// Generator utilities
// ---------------------------------------------------------------------------

/// (L f)(x) = sum_y L(x,y) f(y).
inline SignedVector generator_apply(const Matrix& l, const SignedVector& f) {
    if (f.size() != l.n) throw DimensionMismatch("generator_apply: size mismatch");
    SignedVector out(l.n, 0.0);
    for (std::size_t i = 0; i < l.n; ++i)
        for (std::size_t j = 0; j < l.n; ++j) out[i] += l(i, j) * f[j];
    return out;
}

/// Carre du champ Gamma_L(f,f) = L(f^2) - 2 f L(f), entrywise.
inline SignedVector carre_du_champ(const Matrix& generator, const SignedVector& f) {
    SignedVector f2(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) f2[i] = f[i] * f[i];
    SignedVector lf2 = generator_apply(generator, f2);
    SignedVector lf = generator_apply(generator, f);
    SignedVector out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = lf2[i] - 2.0 * f[i] * lf[i];
    return out;
}

/// K^j as a stochastic kernel (used to extract mixing constants at lag j).
inline TransitionKernel kernel_power(const TransitionKernel& k, std::size_t j) {
    Matrix acc = Matrix::identity(k.size());
    Matrix base(k.size(), k.data());
    for (std::size_t i = 0; i < j; ++i) acc = matmul(acc, base);
    SignedVector rows = acc.a;
    for (std::size_t i = 0; i < k.size(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < k.size(); ++c) s += rows[i * k.size() + c];
        for (std::size_t c = 0; c < k.size(); ++c) rows[i * k.size() + c] /= s;
    }
    return TransitionKernel::stochastic(std::move(rows), k.size());
}

}  // namespace fkpi
