#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "fkpi/ctjump.hpp"
#include "fkpi/models.hpp"
#include "fkpi/oracle.hpp"
#include "fkpi/particle.hpp"
#include "fkpi/stats.hpp"

// Replication harnesses: (N, m) sweeps of the particle engine against the
// matrix oracles, and the geometric-vs-exponential engine comparison.
// Replications are farmed out to a thread pool; every task derives its own
// seed from the master, so results are identical for any thread count.

namespace fkpi {

/// Run fn(0..count-1) on up to `threads` workers. Tasks must not share
/// mutable state except through their own index slot.
inline void parallel_tasks(std::size_t count, unsigned threads,
                           const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(count));
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

enum class ReferenceFlow { MeshFlow, ExactFlow };

struct SweepRow {
    std::size_t n_particles = 0;
    std::size_t m = 1;
    std::size_t step = 0;        // recorded mesh index
    std::string f_id;            // "ind<k>" or "mass"
    double mean = 0.0;
    double var = 0.0;
    double exact = 0.0;
    double bias = 0.0;
    double se = 0.0;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
};

inline const char* kSweepHeader = "N,m,step,f_id,mean,var,exact,bias,se,seed,wall_ms";

inline std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = kSweepHeader;
    out += '\n';
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%.3f\n",
                      r.n_particles, r.m, r.step, r.f_id.c_str(), r.mean, r.var, r.exact, r.bias,
                      r.se, static_cast<unsigned long long>(r.seed), r.wall_ms);
        out += buf;
    }
    return out;
}

namespace detail {

struct CellRefs {
    SignedVector mu_ref;    // per-state reference probabilities
    double mass_ref = 1.0;  // reference unnormalized mass
};

inline CellRefs cell_refs(const FKModelDiscrete& model, MeshSchedule mesh, std::size_t k,
                          ReferenceFlow ref) {
    CellRefs r;
    if (ref == ReferenceFlow::MeshFlow) {
        auto f = mesh_flow_full(model, mesh, k);
        r.mu_ref = f.mu.weights();
        r.mass_ref = f.mass;
    } else {
        if (k % mesh.m != 0) throw ConfigError("exact reference needs an integer record time");
        auto f = flow_discrete(model, k / mesh.m);
        r.mu_ref = f.eta.weights();
        r.mass_ref = f.gamma_mass;
    }
    return r;
}

inline CellRefs cell_refs(const FKModelCTMC& model, MeshSchedule mesh, std::size_t k,
                          ReferenceFlow ref) {
    CellRefs r;
    if (ref == ReferenceFlow::MeshFlow) {
        auto f = mesh_flow_full(model, mesh, k);
        r.mu_ref = f.mu.weights();
        r.mass_ref = f.mass;
    } else {
        auto f = ct_exact_flow(model, mesh.time_of(k));
        r.mu_ref = f.mu.weights();
        r.mass_ref = f.mass;
    }
    return r;
}

template <class FkModel, class EngineModel>
std::vector<SweepRow> run_sweep(const FkModel& model, SelectionCase sel,
                                const std::vector<std::size_t>& n_list,
                                const std::vector<std::size_t>& m_list, std::size_t replications,
                                double record_time, ReferenceFlow ref, std::uint64_t seed,
                                unsigned threads) {
    if (n_list.empty() || m_list.empty()) throw ConfigError("sweep: empty N or m list");
    if (replications < 1) throw ConfigError("sweep: replications must be >= 1");

    struct Cell {
        std::size_t n, m, k;
        CellRefs refs;
    };
    std::vector<Cell> cells;
    for (std::size_t m : m_list) {
        MeshSchedule mesh(m);
        auto k = static_cast<std::size_t>(std::llround(record_time * static_cast<double>(m)));
        auto refs = cell_refs(model, mesh, k, ref);
        for (std::size_t n : n_list) cells.push_back(Cell{n, m, k, refs});
    }

    const std::size_t d = model.state_count();
    // observations[cell][estimator][rep]; estimators = d indicators + mass
    std::vector<std::vector<std::vector<double>>> obs(
        cells.size(),
        std::vector<std::vector<double>>(d + 1, std::vector<double>(replications, 0.0)));
    std::vector<double> wall(cells.size() * replications, 0.0);

    parallel_tasks(cells.size() * replications, threads, [&](std::size_t task) {
        std::size_t c = task / replications;
        std::size_t r = task % replications;
        const Cell& cell = cells[c];
        EngineModel engine(model, MeshSchedule(cell.m));
        auto t0 = std::chrono::steady_clock::now();
        auto est = run_particles(engine, sel, cell.n, derive_seed(seed, cell.n, cell.m, r),
                                 {cell.k});
        auto t1 = std::chrono::steady_clock::now();
        wall[task] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const auto& rec = est.records[0];
        for (std::size_t s = 0; s < d; ++s) obs[c][s][r] = rec.empirical[s];
        obs[c][d][r] = rec.mass_estimate;
    });

    std::vector<SweepRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        double cell_ms = 0.0;
        for (std::size_t r = 0; r < replications; ++r) cell_ms += wall[c * replications + r];
        for (std::size_t e = 0; e <= d; ++e) {
            auto mv = mean_var(obs[c][e]);
            SweepRow row;
            row.n_particles = cell.n;
            row.m = cell.m;
            row.step = cell.k;
            row.f_id = e < d ? "ind" + std::to_string(e) : "mass";
            row.mean = mv.mean;
            row.var = mv.var;
            row.exact = e < d ? cell.refs.mu_ref[e] : cell.refs.mass_ref;
            row.bias = mv.mean - row.exact;
            row.se = mv.se_mean;
            row.seed = seed;
            row.wall_ms = cell_ms;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace detail

/// (N, m) grid of seeded replications: per cell and per estimator the
/// replication mean/variance against the chosen deterministic reference.
inline std::vector<SweepRow> bias_variance_sweep(const FKModelDiscrete& model, SelectionCase sel,
                                                 const std::vector<std::size_t>& n_list,
                                                 const std::vector<std::size_t>& m_list,
                                                 std::size_t replications, double record_time,
                                                 ReferenceFlow ref, std::uint64_t seed,
                                                 unsigned threads = 1) {
    return detail::run_sweep<FKModelDiscrete, DiscreteMeshModel>(
        model, sel, n_list, m_list, replications, record_time, ref, seed, threads);
}

inline std::vector<SweepRow> bias_variance_sweep(const FKModelCTMC& model, SelectionCase sel,
                                                 const std::vector<std::size_t>& n_list,
                                                 const std::vector<std::size_t>& m_list,
                                                 std::size_t replications, double record_time,
                                                 ReferenceFlow ref, std::uint64_t seed,
                                                 unsigned threads = 1) {
    return detail::run_sweep<FKModelCTMC, CtmcMeshModel>(model, sel, n_list, m_list, replications,
                                                         record_time, ref, seed, threads);
}

// ---------------------------------------------------------------------------
// Geometric vs exponential engines
// ---------------------------------------------------------------------------

struct GapRow {
    std::size_t m = 1;
    std::size_t state = 0;
    double mean_geo = 0.0;
    double mean_exp = 0.0;
    double gap = 0.0;  // |mean_geo - mean_exp|
    double se = 0.0;   // combined standard error of the difference
};

/// For each mesh size run the geometric (mesh) engine and the
/// exponential-clock engine with matched N and paired seeds; the systematic
/// component of the per-state gap is expected to shrink at first order.
inline std::vector<GapRow> geometric_vs_exponential_gap(const FKModelCTMC& model,
                                                        std::size_t n_particles,
                                                        const std::vector<std::size_t>& m_list,
                                                        double horizon, std::size_t replications,
                                                        std::uint64_t seed, unsigned threads = 1) {
    const std::size_t d = model.state_count();
    // one exponential-engine ensemble, shared across the m grid
    std::vector<std::vector<double>> exp_obs(d, std::vector<double>(replications, 0.0));
    parallel_tasks(replications, threads, [&](std::size_t r) {
        auto res = simulate_ct(model, CtJumpCase::Case1, n_particles, horizon,
                               JumpSchedulingMode::PopulationClock, derive_seed(seed, 0xCE, r),
                               {horizon});
        for (std::size_t s = 0; s < d; ++s) exp_obs[s][r] = res.snapshots.back()[s];
    });

    std::vector<GapRow> rows;
    for (std::size_t m : m_list) {
        MeshSchedule mesh(m);
        auto k = static_cast<std::size_t>(std::llround(horizon * static_cast<double>(m)));
        std::vector<std::vector<double>> geo_obs(d, std::vector<double>(replications, 0.0));
        parallel_tasks(replications, threads, [&](std::size_t r) {
            CtmcMeshModel engine(model, mesh);
            auto est = run_particles(engine, SelectionCase::Case1NegPotential, n_particles,
                                     derive_seed(seed, m, r), {k});
            for (std::size_t s = 0; s < d; ++s) geo_obs[s][r] = est.records[0].empirical[s];
        });
        for (std::size_t s = 0; s < d; ++s) {
            auto g = mean_var(geo_obs[s]);
            auto e = mean_var(exp_obs[s]);
            GapRow row;
            row.m = m;
            row.state = s;
            row.mean_geo = g.mean;
            row.mean_exp = e.mean;
            row.gap = std::abs(g.mean - e.mean);
            row.se = std::sqrt(g.se_mean * g.se_mean + e.se_mean * e.se_mean);
            rows.push_back(row);
        }
    }
    return rows;
}

/// Deterministic mesh-vs-exact TV gaps over an m grid (no sampling).
inline std::vector<std::pair<double, double>> deterministic_mesh_gap(
    const FKModelCTMC& model, const std::vector<std::size_t>& m_list, double t) {
    auto exact = ct_exact_flow(model, t);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t m : m_list) {
        MeshSchedule mesh(m);
        auto k = static_cast<std::size_t>(std::llround(t * static_cast<double>(m)));
        pts.emplace_back(static_cast<double>(m), tv_distance(mesh_flow(model, mesh, k), exact.mu));
    }
    return pts;
}

/// Deterministic TV between the uniform-recycling flow and the mesh flow.
inline std::vector<std::pair<double, double>> recycling_gap(const FKModelCTMC& model,
                                                            const std::vector<std::size_t>& m_list,
                                                            double t) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t m : m_list) {
        MeshSchedule mesh(m);
        auto k = static_cast<std::size_t>(std::llround(t * static_cast<double>(m)));
        pts.emplace_back(static_cast<double>(m),
                         tv_distance(uniform_recycling_flow(model, mesh, k),
                                     mesh_flow(model, mesh, k)));
    }
    return pts;
}

}  // namespace fkpi
