#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "fkpi/matrix.hpp"
#include "fkpi/models.hpp"
#include "fkpi/oracle.hpp"
#include "fkpi/particle.hpp"
#include "fkpi/selection.hpp"
#include "fkpi/stats.hpp"
#include "test_support.hpp"

using namespace fkpi;

namespace {

FKModelDiscrete constant_potential_ts1(double g0, double g1, std::size_t horizon) {
    auto m = TransitionKernel::stochastic({0.7, 0.3, 0.4, 0.6}, 2);
    return FKModelDiscrete::homogeneous(ProbabilityVector::dirac(0, 2), m,
                                        PotentialVector({g0, g1}), horizon);
}

}  // namespace

TEST_CASE("init_population determinism and initial law") {
    auto ts1 = make_ts1();
    DiscreteMeshModel model(ts1, MeshSchedule(1));

    ParticleSystem<DiscreteMeshModel> a(model, 100, 42), b(model, 100, 42);
    CHECK(a.states() == b.states());

    // delta start puts every particle at state 0
    bool all_zero = true;
    for (auto s : a.states()) all_zero &= (s == 0);
    CHECK(all_zero);
    CHECK(a.survivor_count() == 100);

    // spread start: seeds matter, empirical frequency in binomial bands
    auto half = FKModelDiscrete::homogeneous(ProbabilityVector({0.5, 0.5}),
                                             TransitionKernel::identity(2),
                                             PotentialVector({1.0, 1.0}), 1);
    DiscreteMeshModel half_model(half, MeshSchedule(1));
    const std::size_t n = 10000;
    ParticleSystem<DiscreteMeshModel> pop(half_model, n, 7);
    ParticleSystem<DiscreteMeshModel> pop2(half_model, n, 8);
    CHECK(pop.states() != pop2.states());
    double freq = pop.empirical()[0];
    CHECK(std::abs(freq - 0.5) < 3.0 * std::sqrt(0.25 / n));

    CHECK_THROWS_AS(ParticleSystem<DiscreteMeshModel>(model, 0, 1), BadSize);
}

TEST_CASE("zero potential selection is a no-op") {
    auto flat = constant_potential_ts1(1.0, 1.0, 2);
    DiscreteMeshModel model(flat, MeshSchedule(4));
    ParticleSystem<DiscreteMeshModel> sys(model, 500, 11);
    auto before = sys.states();
    sys.selection_step(SelectionCase::Case1NegPotential);
    CHECK(sys.states() == before);
    CHECK(sys.survivor_count() == 500);
    sys.mutation_step();  // sub-integer cell: identity
    CHECK(sys.states() == before);
}

TEST_CASE("selection respects case sign preconditions") {
    // V = log G = (0, log 2): positive at state 1, so Case 1 must refuse
    // as soon as a particle sits there
    auto m = TransitionKernel::stochastic({0.7, 0.3, 0.4, 0.6}, 2);
    auto model = FKModelDiscrete::homogeneous(ProbabilityVector({0.5, 0.5}), m,
                                              PotentialVector({1.0, 2.0}), 2);
    DiscreteMeshModel mesh_model(model, MeshSchedule(1));
    ParticleSystem<DiscreteMeshModel> sys(mesh_model, 50, 3);
    CHECK_THROWS_AS(sys.selection_step(SelectionCase::Case1NegPotential), SignViolation);

    // and symmetrically for Case 2 on a negative potential
    auto neg = FKModelDiscrete::homogeneous(ProbabilityVector({0.5, 0.5}), m,
                                            PotentialVector({1.0, 0.5}), 2);
    DiscreteMeshModel neg_model(neg, MeshSchedule(1));
    ParticleSystem<DiscreteMeshModel> sys2(neg_model, 50, 3);
    CHECK_THROWS_AS(sys2.selection_step(SelectionCase::Case2PosPotential), SignViolation);
}

TEST_CASE("one-step marginal law equals the S*M kernel row (chi-square)") {
    const std::size_t n = 200000;
    const std::size_t m = 4;
    auto ct1 = make_ct1();
    auto shifted = ct1.case1_shifted();
    MeshSchedule mesh(m);

    struct CaseSetup {
        SelectionCase sel;
        const FKModelCTMC* model;
    };
    const FKModelCTMC* orig = &ct1;
    const FKModelCTMC* neg = &shifted;
    std::vector<CaseSetup> setups = {{SelectionCase::Case1NegPotential, neg},
                                     {SelectionCase::Case2PosPotential, orig},
                                     {SelectionCase::Case3PairwisePositive, orig},
                                     {SelectionCase::UniformRecycling, neg}};

    int setup_id = 0;
    for (const auto& setup : setups) {
        CtmcMeshModel engine_model(*setup.model, mesh);
        ParticleSystem<CtmcMeshModel> sys(engine_model, n, 1000 + setup_id);

        auto pre = sys.states();
        auto mu = sys.empirical();
        sys.advance(setup.sel);

        // expected law per starting state: row of S * M with the frozen mu
        const auto& v = setup.model->potential_of(0);
        auto s = build_selection_kernel(setup.sel, v, m, mu);
        auto transport = transition_from_generator(setup.model->generator_of(0), 1.0 / double(m));
        Matrix k = matmul(Matrix(3, s.kernel.data()), Matrix(3, transport.data()));

        std::map<std::uint32_t, std::vector<double>> counts;
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = counts.try_emplace(pre[i], std::vector<double>(3, 0.0)).first->second;
            c[sys.states()[i]] += 1.0;
        }
        for (const auto& [from, observed] : counts) {
            std::vector<double> expected(3);
            for (std::size_t j = 0; j < 3; ++j) expected[j] = k(from, j);
            auto gof = chi_square_gof(observed, expected);
            INFO("setup " << setup_id << " from state " << from);
            CHECK(gof.p_value > 1e-3);
        }
        ++setup_id;
    }
}

TEST_CASE("per-step rejection frequency matches the first-order clock rate") {
    // Case 1 with constant U: rejection probability 1 - e^{-u/m} ~ u/m
    const double u = 0.8;
    const std::size_t n = 100000;
    for (std::size_t m : {16u, 64u}) {
        auto model = constant_potential_ts1(std::exp(-u), std::exp(-u), 1);
        DiscreteMeshModel mesh_model(model, MeshSchedule(m));
        ParticleSystem<DiscreteMeshModel> sys(mesh_model, n, 5);
        sys.selection_step(SelectionCase::Case1NegPotential);
        double freq = 1.0 - double(sys.survivor_count()) / double(n);
        double p = 1.0 - std::exp(-u / double(m));
        CHECK(std::abs(freq - p) < 3.0 * std::sqrt(p * (1.0 - p) / double(n)) + 1e-12);
        CHECK(std::abs(p - u / double(m)) < 0.5 * u * u / double(m * m));
    }
}

TEST_CASE("mutation from a dirac start lands in multinomial bands") {
    auto ts1 = make_ts1();
    DiscreteMeshModel model(ts1, MeshSchedule(1));
    const std::size_t n = 100000;
    ParticleSystem<DiscreteMeshModel> sys(model, n, 17);
    // neutralize selection by stepping through it with case 3 on equal
    // potentials? simpler: run the flat model and check the kernel row
    auto flat = constant_potential_ts1(1.0, 1.0, 1);
    DiscreteMeshModel flat_model(flat, MeshSchedule(1));
    ParticleSystem<DiscreteMeshModel> pop(flat_model, n, 17);
    pop.advance(SelectionCase::Case1NegPotential);
    double f1 = pop.empirical()[1];
    CHECK(std::abs(f1 - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("euler mutation moment oracle") {
    const double theta = 1.2, sigma = 0.7;
    const std::size_t m = 8, n = 100000;
    OuEulerModel model(theta, sigma, 0.5, 0.0, MeshSchedule(m), 2.0);
    ParticleSystem<OuEulerModel> sys(model, n, 23);
    sys.advance(SelectionCase::Case1NegPotential);  // U = 0: pure mutation
    double dt = 1.0 / double(m);
    double mean = sys.empirical_mean([](const double& x) { return x; });
    double expect_mean = 0.5 - theta * 0.5 * dt;
    double sd = sigma * std::sqrt(dt);
    CHECK(std::abs(mean - expect_mean) < 3.0 * sd / std::sqrt(double(n)));
    double var = sys.empirical_mean([&](const double& x) {
        return (x - expect_mean) * (x - expect_mean);
    });
    CHECK(std::abs(var - sd * sd) < 3.0 * sd * sd * std::sqrt(2.0 / double(n)));
}

TEST_CASE("run is deterministic and flags are monotone") {
    auto ts1 = make_ts1(3);
    DiscreteMeshModel model(ts1, MeshSchedule(2));
    auto a = run_particles(model, SelectionCase::Case2PosPotential, 300, 99, {0, 2, 4, 6});
    auto b = run_particles(model, SelectionCase::Case2PosPotential, 300, 99, {0, 2, 4, 6});
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].empirical == b.records[i].empirical);
        CHECK(a.records[i].mass_estimate == b.records[i].mass_estimate);
        CHECK(a.records[i].survivors == b.records[i].survivors);
    }
    for (std::size_t i = 1; i < a.records.size(); ++i)
        CHECK(a.records[i].survivors <= a.records[i - 1].survivors);
    CHECK(a.records[0].survivors == 300);
}

TEST_CASE("potential-free run reduces to independent chain simulation") {
    auto flat = constant_potential_ts1(1.0, 1.0, 2);
    DiscreteMeshModel model(flat, MeshSchedule(1));
    const std::size_t n = 100000;
    auto est = run_particles(model, SelectionCase::Case3PairwisePositive, n, 31, {2});
    // law of X_2 from delta_0: two kernel applications
    SignedVector law = {1.0, 0.0};
    auto k = TransitionKernel::stochastic({0.7, 0.3, 0.4, 0.6}, 2);
    law = apply_kernel(law, k);
    law = apply_kernel(law, k);
    for (std::size_t s = 0; s < 2; ++s)
        CHECK(std::abs(est.records[0].empirical[s] - law[s]) <
              3.0 * std::sqrt(law[s] * (1 - law[s]) / n));
    CHECK(est.records[0].mass_estimate == 1.0);
    CHECK(est.records[0].survivors == n);
}

TEST_CASE("TS1 estimator and mass agree with the exact flow over replications") {
    auto ts1 = make_ts1(2);
    DiscreteMeshModel model(ts1, MeshSchedule(1));
    auto exact = flow_discrete(ts1, 2);

    const int reps = 200;
    const std::size_t n = 10000;
    std::vector<double> f_vals, masses;
    for (int r = 0; r < reps; ++r) {
        auto est = run_particles(model, SelectionCase::Case2PosPotential, n,
                                 derive_seed(2024, 0, r), {2});
        f_vals.push_back(est.records[0].empirical[1]);
        masses.push_back(est.records[0].mass_estimate);
    }
    auto fstat = mean_var(f_vals);
    CHECK(std::abs(fstat.mean - exact.eta[1]) < 3.0 * fstat.se_mean + 1e-12);
    auto mstat = mean_var(masses);
    CHECK(std::abs(mstat.mean - exact.gamma_mass) < 3.0 * mstat.se_mean);
}

TEST_CASE("exact subpopulation: no selection pressure keeps everyone") {
    auto flat = constant_potential_ts1(1.0, 1.0, 2);
    DiscreteMeshModel model(flat, MeshSchedule(2));
    ParticleSystem<DiscreteMeshModel> sys(model, 400, 1);
    auto [count0, emp0] = sys.exact_subpopulation();
    CHECK(count0 == 400);  // before any selection
    for (int i = 0; i < 4; ++i) sys.advance(SelectionCase::Case1NegPotential);
    auto [count, emp] = sys.exact_subpopulation();
    CHECK(count == 400);
    CHECK(emp.has_value());
}

TEST_CASE("exact subpopulation law matches the mesh flow (pooled chi-square)") {
    // Case-1 acceptance depends only on the particle's own path, so the
    // conditional law of never-rejected particles is exactly mu^(m) at any N.
    auto shifted = make_ct1(2.5).case1_shifted();
    MeshSchedule mesh(4);
    CtmcMeshModel model(shifted, mesh);
    const std::size_t k_end = mesh.index_of_integer(2);
    auto oracle = mesh_flow(shifted, mesh, k_end);

    std::vector<double> pooled(3, 0.0);
    for (int r = 0; r < 60; ++r) {
        ParticleSystem<CtmcMeshModel> sys(model, 400, derive_seed(555, 1, r));
        for (std::size_t k = 0; k < k_end; ++k) sys.advance(SelectionCase::Case1NegPotential);
        for (std::size_t i = 0; i < 400; ++i)
            if (sys.flags()[i]) pooled[sys.states()[i]] += 1.0;
    }
    auto gof = chi_square_gof(pooled, oracle.weights());
    CHECK(gof.p_value > 1e-3);
}

TEST_CASE("geometric clock survival") {
    SECTION("constant rate matches the exponential clock at mesh points") {
        const double u = 0.9;
        const std::size_t m = 8;
        auto surv = geometric_clock_survival(SignedVector(24, u), m);
        REQUIRE(surv.size() == 25);
        for (std::size_t p = 0; p < surv.size(); ++p)
            CHECK(std::abs(surv[p] - std::exp(-u * double(p) / double(m))) < 1e-12);
    }

    SECTION("zero rate never rings") {
        auto surv = geometric_clock_survival(SignedVector(10, 0.0), 4);
        for (double s : surv) CHECK(s == 1.0);
    }

    SECTION("negative rates are rejected") {
        CHECK_THROWS_AS(geometric_clock_survival(SignedVector{0.1, -0.2}, 4), SignViolation);
    }

    SECTION("gap to the continuous integral decays at first order") {
        // U(t) = 0.5 + 0.4 t^2 on [0,1]: integral = 0.5 + 0.4/3
        const double integral = 0.5 + 0.4 / 3.0;
        std::vector<double> ms, gaps;
        for (std::size_t m = 4; m <= 256; m *= 2) {
            SignedVector u(m);
            for (std::size_t k = 0; k < m; ++k) {
                double t = double(k) / double(m);
                u[k] = 0.5 + 0.4 * t * t;
            }
            double end = geometric_clock_survival(u, m).back();
            ms.push_back(double(m));
            gaps.push_back(std::abs(end - std::exp(-integral)));
        }
        auto fit = fit_slope(ms, gaps);
        CHECK(fit.slope > -1.15);
        CHECK(fit.slope < -0.85);
    }
}

TEST_CASE("case 2 acceptance probability stays valid at runtime") {
    auto ts1 = make_ts1(2);
    DiscreteMeshModel model(ts1, MeshSchedule(1));
    ParticleSystem<DiscreteMeshModel> sys(model, 200, 77);
    CHECK_NOTHROW(sys.advance(SelectionCase::Case2PosPotential));
    CHECK_NOTHROW(sys.advance(SelectionCase::Case2PosPotential));
}

TEST_CASE("step order is enforced") {
    auto ts1 = make_ts1(2);
    DiscreteMeshModel model(ts1, MeshSchedule(1));
    ParticleSystem<DiscreteMeshModel> sys(model, 10, 1);
    CHECK_THROWS_AS(sys.mutation_step(), ModelMismatch);
    sys.selection_step(SelectionCase::Case2PosPotential);
    CHECK_THROWS_AS(sys.selection_step(SelectionCase::Case2PosPotential), ModelMismatch);
}
