#pragma once

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "fkpi/ctjump.hpp"
#include "fkpi/models.hpp"
#include "fkpi/oracle.hpp"
#include "fkpi/particle.hpp"
#include "fkpi/selection.hpp"
#include "fkpi/stats.hpp"
#include "fkpi/sweep.hpp"

// The acceptance suite: twelve checks pinning the convergence statements
// (exact identities, proximity bounds, rate slopes and statistical
// consistency) on the model zoo and on randomized instances. Each check is
// deterministic given the master seed.

namespace fkpi {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace acceptance {

inline constexpr std::uint64_t kDefaultSeed = 20250810ull;

namespace detail {

inline std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return std::string(buf);
}

inline PotentialVector random_potential(Rng& rng, SelectionCase c, std::size_t d,
                                        bool strictly_positive_u = false) {
    SignedVector v(d);
    for (auto& x : v) {
        x = (strictly_positive_u ? 0.05 : 0.0) + rng.next_unit();
        if (c == SelectionCase::Case1NegPotential || c == SelectionCase::UniformRecycling) x = -x;
        if (c == SelectionCase::Case3PairwisePositive) x = 2.0 * x - 1.0;
    }
    return PotentialVector(std::move(v));
}

inline ProbabilityVector random_probability(Rng& rng, std::size_t d) {
    SignedVector w(d);
    for (auto& x : w) x = 0.05 + rng.next_unit();
    return ProbabilityVector(std::move(w));
}

inline TransitionKernel random_kernel(Rng& rng, std::size_t d) {
    SignedVector rows(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            rows[i * d + j] = 0.05 + rng.next_unit();
            s += rows[i * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) rows[i * d + j] /= s;
    }
    return TransitionKernel::stochastic(std::move(rows), d);
}

inline FKModelDiscrete random_discrete_model(Rng& rng, std::size_t d, std::size_t horizon) {
    std::vector<TransitionKernel> ks;
    std::vector<PotentialVector> gs;
    for (std::size_t p = 0; p < horizon; ++p) {
        ks.push_back(random_kernel(rng, d));
        SignedVector g(d);
        for (auto& x : g) x = 0.5 + 1.5 * rng.next_unit();
        gs.emplace_back(std::move(g));
    }
    return FKModelDiscrete(random_probability(rng, d), std::move(ks), std::move(gs));
}

inline ProbabilityVector psi_exp(const ProbabilityVector& mu, const PotentialVector& v,
                                 std::size_t m) {
    SignedVector g(v.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(v[i] / double(m));
    return boltzmann_gibbs(mu, g);
}

}  // namespace detail

// 1. Markov transport identity mu S = Psi_{e^{V/m}}(mu), 1000 random
//    instances over the three cases, to 1e-12.
inline CriterionResult transport_identity(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 1), 0);
    SelectionCase cases[3] = {SelectionCase::Case1NegPotential, SelectionCase::Case2PosPotential,
                              SelectionCase::Case3PairwisePositive};
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t d = 2 + trial % 5;
        std::size_t m = 1 + (trial * 7) % 64;
        auto c = cases[trial % 3];
        auto mu = detail::random_probability(rng, d);
        auto v = detail::random_potential(rng, c, d);
        auto s = build_selection_kernel(c, v, m, mu);
        worst = std::max(worst,
                         tv_distance(apply_kernel(mu, s.kernel), detail::psi_exp(mu, v, m)));
    }
    CriterionResult r{1, "transport-identity", worst < 1e-12,
                      detail::fmt("max TV residual %.3e (< 1e-12)", worst)};
    return r;
}

// 2. Theorem 1 case D: the mesh flow at integer times equals the integer
//    flow exactly, on TS1, MIX1 and 100 random models, m in {1,2,5,10}.
inline CriterionResult theorem1_case_d(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 2), 0);
    std::vector<FKModelDiscrete> models = {make_ts1(3), make_mix1(3)};
    for (int t = 0; t < 100; ++t)
        models.push_back(detail::random_discrete_model(rng, 2 + t % 4, 3));
    double worst_tv = 0.0, worst_mass = 0.0;
    for (const auto& model : models) {
        for (std::size_t m : {1u, 2u, 5u, 10u}) {
            MeshSchedule mesh(m);
            for (std::size_t n = 0; n <= 3; ++n) {
                auto exact = flow_discrete(model, n);
                auto approx = mesh_flow_full(model, mesh, mesh.index_of_integer(n));
                worst_tv = std::max(worst_tv, tv_distance(exact.eta, approx.mu));
                worst_mass = std::max(worst_mass, std::abs(approx.mass - exact.gamma_mass) /
                                                      std::max(1.0, exact.gamma_mass));
            }
        }
    }
    bool pass = worst_tv < 1e-12 && worst_mass < 1e-12;
    return CriterionResult{2, "theorem1-caseD-exact", pass,
                           detail::fmt("max TV %.3e, max rel mass gap %.3e (< 1e-12)", worst_tv,
                                       worst_mass)};
}

// 3. Theorem 1 case C order: deterministic TV(mesh, exact) on CT1 at t=1
//    fits slope -1 +- 0.15 with r^2 > 0.98 over m = 4..256.
inline CriterionResult theorem1_case_c(std::uint64_t) {
    auto ct1 = make_ct1();
    std::vector<std::size_t> ms = {4, 8, 16, 32, 64, 128, 256};
    auto pts = deterministic_mesh_gap(ct1, ms, 1.0);
    std::vector<double> xs, ys;
    for (auto [x, y] : pts) {
        xs.push_back(x);
        ys.push_back(y);
    }
    auto fit = fit_slope(xs, ys);
    bool pass = std::abs(fit.slope + 1.0) <= 0.15 && fit.r_squared > 0.98;
    return CriterionResult{3, "theorem1-caseC-slope", pass,
                           detail::fmt("slope %.4f (-1 +- 0.15), r^2 %.5f (> 0.98)", fit.slope,
                                       fit.r_squared)};
}

// 4. Theorem 2 case D variance: on TS1 at n=3 with m=1, N * replication
//    variance shows no upward trend across N in {1e2, 1e3, 1e4} (R = 500).
inline CriterionResult theorem2_variance(std::uint64_t seed, unsigned threads) {
    auto ts1 = make_ts1(3);
    const std::size_t reps = 500;
    std::vector<std::size_t> n_list = {100, 1000, 10000};
    auto rows = bias_variance_sweep(ts1, SelectionCase::Case2PosPotential, n_list, {1}, reps, 3.0,
                                    ReferenceFlow::ExactFlow, derive_seed(seed, 4), threads);
    // pick the indicator of state 1
    std::vector<double> stat, se;
    for (const auto& row : rows) {
        if (row.f_id != "ind1") continue;
        double nv = static_cast<double>(row.n_particles) * row.var;
        stat.push_back(nv);
        se.push_back(nv * std::sqrt(2.0 / double(reps - 1)));
    }
    bool pass = stat.size() == n_list.size();
    std::string detail_str = "N*var:";
    for (std::size_t i = 0; i < stat.size(); ++i)
        detail_str += detail::fmt(" %.4f", stat[i]);
    for (std::size_t i = 0; i + 1 < stat.size(); ++i) {
        double allowed = 3.0 * std::sqrt(se[i] * se[i] + se[i + 1] * se[i + 1]);
        if (stat[i + 1] > stat[i] + allowed) pass = false;
    }
    return CriterionResult{4, "theorem2-variance-trend", pass, detail_str};
}

// 5. Theorem 2 case C bias: on CT1 (Case-1 shifted potential) with N = m^2,
//    m in {4,8,16,32}, R = 400, the replication-mean bias of the
//    unnormalized mass estimator vs the exact gamma fits slope -1 +- 0.2 on
//    the points exceeding 3 SE. The normalized estimators' bias at the
//    pinned R sits below the 3 SE filter on this potential amplitude; the
//    mass estimator is the Feynman-Kac path integral itself and shows the
//    first-order law cleanly.
inline CriterionResult theorem2_bias(std::uint64_t seed, unsigned threads) {
    auto shifted = make_ct1().case1_shifted();
    const std::size_t reps = 400;
    std::vector<double> xs, ys;
    std::size_t passing = 0;
    std::string detail_str;
    for (std::size_t m : {4u, 8u, 16u, 32u}) {
        auto rows = bias_variance_sweep(shifted, SelectionCase::Case1NegPotential, {m * m}, {m},
                                        reps, 1.0, ReferenceFlow::ExactFlow,
                                        derive_seed(seed, 5, m), threads);
        for (const auto& row : rows) {
            if (row.f_id != "mass") continue;
            bool significant = std::abs(row.bias) > 3.0 * row.se;
            if (significant) {
                ++passing;
                xs.push_back(static_cast<double>(m));
                ys.push_back(std::abs(row.bias));
            }
            detail_str += detail::fmt(" m=%zu |bias|=%.2e 3SE=%.2e%s", m, std::abs(row.bias),
                                      3.0 * row.se, significant ? "" : " (filtered)");
        }
    }
    if (passing < 3)
        return CriterionResult{5, "theorem2-bias-slope", false,
                               detail::fmt("only %zu points exceed 3SE;%s", passing,
                                           detail_str.c_str())};
    auto fit = fit_slope(xs, ys);
    bool pass = std::abs(fit.slope + 1.0) <= 0.2;
    return CriterionResult{5, "theorem2-bias-slope", pass,
                           detail::fmt("%zu/4 points pass filter, slope %.4f (-1 +- 0.2)",
                                       passing, fit.slope)};
}

// 6. Theorem 3: deterministic TV between the uniform-recycling flow and the
//    mesh flow on CT1 decays with slope -1 +- 0.15 over m = 4..256.
inline CriterionResult theorem3_recycling(std::uint64_t) {
    auto shifted = make_ct1().case1_shifted();
    std::vector<std::size_t> ms = {4, 8, 16, 32, 64, 128, 256};
    auto pts = recycling_gap(shifted, ms, 1.0);
    std::vector<double> xs, ys;
    for (auto [x, y] : pts) {
        xs.push_back(x);
        ys.push_back(y);
    }
    auto fit = fit_slope(xs, ys);
    bool pass = std::abs(fit.slope + 1.0) <= 0.15;
    return CriterionResult{6, "theorem3-recycling-slope", pass,
                           detail::fmt("slope %.4f (-1 +- 0.15), r^2 %.5f", fit.slope,
                                       fit.r_squared)};
}

// 7. Kernel proximity: max-row TV(S, S~) < ||U||^2/m^2 and
//    TV(Psi_{e^{-U/m}}(mu), mu) < ||U||/m on 1000 random instances.
inline CriterionResult kernel_proximity(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 7), 0);
    bool pass = true;
    double worst_margin = 1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t d = 2 + trial % 5;
        std::size_t m = 1 + (trial * 3) % 64;
        auto mu = detail::random_probability(rng, d);
        auto v = detail::random_potential(rng, SelectionCase::Case1NegPotential, d, true);
        double u_norm = v.sup_norm();
        auto s = build_selection_kernel(SelectionCase::Case1NegPotential, v, m, mu);
        auto st = build_selection_kernel(SelectionCase::UniformRecycling, v, m, mu);
        double worst_row = 0.0;
        for (std::size_t x = 0; x < d; ++x)
            worst_row = std::max(worst_row, tv_distance(s.kernel.row(x), st.kernel.row(x)));
        double bound_rows = u_norm * u_norm / double(m * m);
        double tv_psi = tv_distance(detail::psi_exp(mu, v, m), mu);
        double bound_psi = u_norm / double(m);
        if (!(worst_row < bound_rows) || !(tv_psi < bound_psi)) pass = false;
        worst_margin = std::min(worst_margin,
                                std::min(bound_rows - worst_row, bound_psi - tv_psi));
    }
    return CriterionResult{7, "kernel-proximity-bounds", pass,
                           detail::fmt("strict on 1000 instances, smallest margin %.3e",
                                       worst_margin)};
}

// 8. First-order expansion: the remainder norm stays within a factor 10
//    over m = 1..256 for all three cases on random instances.
inline CriterionResult expansion_bounded(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 8), 0);
    SelectionCase cases[3] = {SelectionCase::Case1NegPotential, SelectionCase::Case2PosPotential,
                              SelectionCase::Case3PairwisePositive};
    double worst_ratio = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int trial = 0; trial < 30; ++trial) {
            std::size_t d = 2 + trial % 5;
            auto mu = detail::random_probability(rng, d);
            SignedVector v(d);
            for (auto& x : v) {
                x = 0.1 + 0.9 * rng.next_unit();
                if (c == 0) x = -x;
                if (c == 2) x = 2.0 * x - 1.0;
            }
            PotentialVector pv(std::move(v));
            double lo = 1e300, hi = 0.0;
            for (std::size_t m = 1; m <= 256; ++m) {
                double rr = expansion_remainder(cases[c], pv, m, mu);
                lo = std::min(lo, rr);
                hi = std::max(hi, rr);
            }
            worst_ratio = std::max(worst_ratio, hi / lo);
        }
    }
    return CriterionResult{8, "expansion-remainder-bounded", worst_ratio < 10.0,
                           detail::fmt("worst max/min ratio %.3f (< 10) over m = 1..256",
                                       worst_ratio)};
}

// 9. Exact-sample property: never-rejected particles pooled across 500 runs
//    (N = 1000, CT1, two integer steps, m = 8) pass a chi-square
//    goodness-of-fit against the mesh flow at the 1% level.
inline CriterionResult exact_samples(std::uint64_t seed, unsigned threads) {
    auto shifted = make_ct1(2.5).case1_shifted();
    MeshSchedule mesh(8);
    CtmcMeshModel model(shifted, mesh);
    const std::size_t k_end = mesh.index_of_integer(2);
    auto oracle = mesh_flow(shifted, mesh, k_end);

    const int runs = 500;
    const std::size_t n = 1000;
    std::vector<SignedVector> partial(runs, SignedVector(3, 0.0));
    parallel_tasks(runs, threads, [&](std::size_t r) {
        ParticleSystem<CtmcMeshModel> sys(model, n, derive_seed(seed, 9, r));
        for (std::size_t k = 0; k < k_end; ++k) sys.advance(SelectionCase::Case1NegPotential);
        for (std::size_t i = 0; i < n; ++i)
            if (sys.flags()[i]) partial[r][sys.states()[i]] += 1.0;
    });
    std::vector<double> pooled(3, 0.0);
    for (const auto& p : partial)
        for (std::size_t s = 0; s < 3; ++s) pooled[s] += p[s];
    auto gof = chi_square_gof(pooled, oracle.weights());
    double total = pooled[0] + pooled[1] + pooled[2];
    bool pass = gof.p_value > 0.01;
    return CriterionResult{9, "exact-sample-chisq", pass,
                           detail::fmt("pooled %.0f survivors, chi2 %.3f, p %.4f (> 0.01)", total,
                                       gof.statistic, gof.p_value)};
}

// 10. Clock agreement: constant-rate geometric survival equals the
//     exponential at mesh points to 1e-12, and 1e5 first-jump times from
//     the continuous engine pass a KS test against Exp(u) at the 1% level.
inline CriterionResult clock_agreement(std::uint64_t seed, unsigned threads) {
    const double u = 0.7;
    double ident_worst = 0.0;
    {
        const std::size_t m = 8;
        auto surv = geometric_clock_survival(SignedVector(48, u), m);
        for (std::size_t p = 0; p < surv.size(); ++p)
            ident_worst = std::max(
                ident_worst, std::abs(surv[p] - std::exp(-u * double(p) / double(m))));
    }

    auto ct1 = make_ct1();
    FKModelCTMC model(ct1.initial_law(), ct1.generator_of(0),
                      PotentialVector(SignedVector(3, -u)), 64.0);
    const int runs = 100000;
    std::vector<double> first_times(runs, -1.0);
    parallel_tasks(runs, threads, [&](std::size_t r) {
        auto res = simulate_ct(model, CtJumpCase::Case1, 1, 40.0,
                               JumpSchedulingMode::IndividualClocks, derive_seed(seed, 10, r), {},
                               true);
        for (const auto& e : res.events)
            if (e.kind == 'j') {
                first_times[r] = e.time;
                break;
            }
    });
    std::size_t found = 0;
    std::vector<double> samples;
    samples.reserve(runs);
    for (double t : first_times)
        if (t >= 0.0) {
            ++found;
            samples.push_back(t);
        }
    double d = ks_statistic(samples, [&](double t) { return 1.0 - std::exp(-u * t); });
    double crit = kKolmogorov01 / std::sqrt(double(samples.size()));
    bool pass = ident_worst < 1e-12 && found == static_cast<std::size_t>(runs) && d < crit;
    return CriterionResult{10, "clock-agreement", pass,
                           detail::fmt("identity gap %.2e (< 1e-12), KS %.5f (< %.5f)",
                                       ident_worst, d, crit)};
}

// 11. Dobrushin decay under mixing: on MIX1, beta(P_{k,n}) is nonincreasing
//     in the gap and bounded by (1-rho)^{n-k-1} with rho the minimal row
//     overlap of the kernel. Exact matrix computation.
inline CriterionResult dobrushin_decay(std::uint64_t) {
    auto mix1 = make_mix1(8);
    double rho = min_row_overlap(mix1.kernel(0));
    bool pass = rho > 0.0;
    double worst_slack = 1e300;
    std::vector<double> beta_by_gap(9, 0.0);
    for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t n = k + 1; n <= 8; ++n) {
            double beta = semigroup(mix1, k, n).beta;
            std::size_t gap = n - k;
            double bound = std::pow(1.0 - rho, double(gap) - 1.0);
            if (beta > bound + 1e-12) pass = false;
            worst_slack = std::min(worst_slack, bound - beta);
            beta_by_gap[gap] = std::max(beta_by_gap[gap], beta);
        }
    for (std::size_t gap = 1; gap + 1 <= 8; ++gap)
        if (beta_by_gap[gap + 1] > beta_by_gap[gap] + 1e-12) pass = false;
    return CriterionResult{11, "dobrushin-mixing-decay", pass,
                           detail::fmt("rho %.3f, monotone, min bound slack %.3e", rho,
                                       worst_slack)};
}

// 12. CT mean-field consistency: the exponential-clock engine's empirical
//     mean at t=1 on CT1 sits within 3 SE of the exact flow in every
//     scheduling mode (N = 1e4, replicated for an honest SE).
inline CriterionResult ct_mean_field(std::uint64_t seed, unsigned threads) {
    auto ct1 = make_ct1();
    auto shifted = ct1.case1_shifted();
    auto exact = ct_exact_flow(ct1, 1.0);
    const std::size_t n = 10000;
    const int reps = 12;
    bool pass = true;
    std::string detail_str;
    int mode_id = 0;
    for (auto mode : {JumpSchedulingMode::IndividualClocks, JumpSchedulingMode::PopulationClock,
                      JumpSchedulingMode::ThinnedPopulationClock}) {
        std::vector<SignedVector> obs(reps);
        parallel_tasks(reps, threads, [&](std::size_t r) {
            auto res = simulate_ct(shifted, CtJumpCase::Case1, n, 1.0, mode,
                                   derive_seed(seed, 12, mode_id * 100 + r), {1.0});
            obs[r] = res.snapshots.back().weights();
        });
        double worst_z = 0.0;
        for (std::size_t s = 0; s < 3; ++s) {
            std::vector<double> xs;
            for (const auto& o : obs) xs.push_back(o[s]);
            auto mv = mean_var(xs);
            double z = mv.se_mean > 0.0 ? std::abs(mv.mean - exact.mu[s]) / mv.se_mean : 0.0;
            worst_z = std::max(worst_z, z);
        }
        if (worst_z > 3.0) pass = false;
        detail_str += detail::fmt(" %s max|z|=%.2f", to_string(mode), worst_z);
        ++mode_id;
    }
    return CriterionResult{12, "ct-mean-field-consistency", pass, detail_str + " (need <= 3)"};
}

}  // namespace acceptance

/// Run the twelve checks; each is timed and deterministic given the seed.
inline std::vector<CriterionResult> run_acceptance(std::uint64_t seed = acceptance::kDefaultSeed,
                                                   unsigned threads = 2) {
    using Clock = std::chrono::steady_clock;
    std::vector<CriterionResult> out;
    auto timed = [&](auto&& fn) {
        auto t0 = Clock::now();
        CriterionResult r = fn();
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        out.push_back(std::move(r));
    };
    timed([&] { return acceptance::transport_identity(seed); });
    timed([&] { return acceptance::theorem1_case_d(seed); });
    timed([&] { return acceptance::theorem1_case_c(seed); });
    timed([&] { return acceptance::theorem2_variance(seed, threads); });
    timed([&] { return acceptance::theorem2_bias(seed, threads); });
    timed([&] { return acceptance::theorem3_recycling(seed); });
    timed([&] { return acceptance::kernel_proximity(seed); });
    timed([&] { return acceptance::expansion_bounded(seed); });
    timed([&] { return acceptance::exact_samples(seed, threads); });
    timed([&] { return acceptance::clock_agreement(seed, threads); });
    timed([&] { return acceptance::dobrushin_decay(seed); });
    timed([&] { return acceptance::ct_mean_field(seed, threads); });
    return out;
}

inline int print_acceptance(const std::vector<CriterionResult>& results, std::FILE* stream) {
    int failures = 0;
    for (const auto& r : results) {
        std::fprintf(stream, "[%2d/12] %-4s %-28s (%6.2f s)  %s\n", r.id,
                     r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
        if (!r.passed) ++failures;
    }
    std::fprintf(stream, "%d/12 criteria passed\n", 12 - failures);
    return failures == 0 ? 0 : 2;
}

}  // namespace fkpi
