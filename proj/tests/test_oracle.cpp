#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fkpi/mesh.hpp"
#include "fkpi/models.hpp"
#include "fkpi/oracle.hpp"
#include "fkpi/rng.hpp"
#include "test_support.hpp"

using namespace fkpi;

namespace {

FKModelDiscrete random_discrete_model(Rng& rng, std::size_t d, std::size_t horizon) {
    std::vector<TransitionKernel> ks;
    std::vector<PotentialVector> gs;
    for (std::size_t p = 0; p < horizon; ++p) {
        ks.push_back(random_stochastic_kernel(rng, d));
        SignedVector g(d);
        for (auto& x : g) x = 0.5 + 1.5 * rng.next_unit();
        gs.emplace_back(std::move(g));
    }
    return FKModelDiscrete(random_probability(rng, d), std::move(ks), std::move(gs));
}

}  // namespace

TEST_CASE("flow_discrete on TS1 matches hand values") {
    auto ts1 = make_ts1();
    auto r1 = flow_discrete(ts1, 1);
    CHECK(r1.eta[0] == Catch::Approx(0.7).margin(1e-14));
    CHECK(r1.eta[1] == Catch::Approx(0.3).margin(1e-14));
    CHECK(r1.gamma_mass == Catch::Approx(1.0).margin(1e-14));

    // gamma_2(1) = eta_0(G) * eta_1(G) = 1 * (0.7 + 0.6) = 1.3
    auto r2 = flow_discrete(ts1, 2);
    CHECK(r2.gamma_mass == Catch::Approx(1.3).margin(1e-14));

    // mu0 = (0.5, 0.5): Psi_G gives (1/3, 2/3), then M gives (0.5, 0.5)
    auto m = TransitionKernel::stochastic({0.7, 0.3, 0.4, 0.6}, 2);
    FKModelDiscrete alt = FKModelDiscrete::homogeneous(ProbabilityVector({0.5, 0.5}), m,
                                                       PotentialVector({1.0, 2.0}), 2);
    auto ra = flow_discrete(alt, 1);
    CHECK(ra.eta[0] == Catch::Approx(0.5).margin(1e-14));
    CHECK(ra.eta[1] == Catch::Approx(0.5).margin(1e-14));

    CHECK_THROWS_AS(flow_discrete(ts1, ts1.horizon() + 1), HorizonExceeded);
}

TEST_CASE("flow_discrete with unit potential is the plain chain law") {
    Rng rng(101, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t d = 2 + trial % 4;
        auto k = random_stochastic_kernel(rng, d);
        auto mu0 = random_probability(rng, d);
        auto model = FKModelDiscrete::homogeneous(mu0, k, PotentialVector(SignedVector(d, 1.0)), 3);
        auto r = flow_discrete(model, 3);
        SignedVector expect = mu0.weights();
        for (int step = 0; step < 3; ++step) expect = apply_kernel(expect, k);
        CHECK(tv_distance(r.eta.weights(), expect) < 1e-13);
        CHECK(r.gamma_mass == Catch::Approx(1.0).margin(1e-13));
    }
}

TEST_CASE("mass positivity on random models") {
    Rng rng(55, 0);
    for (int trial = 0; trial < 50; ++trial) {
        auto model = random_discrete_model(rng, 2 + trial % 4, 4);
        CHECK(flow_discrete(model, 4).gamma_mass > 0.0);
    }
}

TEST_CASE("case D: mesh flow equals the integer-time flow exactly") {
    Rng rng(202, 0);
    std::vector<FKModelDiscrete> models = {make_ts1(3), make_mix1(3)};
    for (int trial = 0; trial < 10; ++trial)
        models.push_back(random_discrete_model(rng, 2 + trial % 4, 3));

    for (const auto& model : models) {
        for (std::size_t m : {1u, 2u, 5u, 10u}) {
            MeshSchedule mesh(m);
            for (std::size_t n = 0; n <= 3; ++n) {
                auto exact = flow_discrete(model, n);
                auto approx = mesh_flow_full(model, mesh, mesh.index_of_integer(n));
                CHECK(tv_distance(exact.eta, approx.mu) < 1e-12);
                CHECK(std::abs(approx.mass - exact.gamma_mass) <=
                      1e-12 * std::max(1.0, exact.gamma_mass));
            }
        }
    }
}

TEST_CASE("ctmc mesh flow with zero potential is the chain law") {
    auto ct1 = make_ct1();
    FKModelCTMC free(ct1.initial_law(), ct1.generator_of(0), PotentialVector(SignedVector(3, 0.0)),
                     2.0);
    MeshSchedule mesh(16);
    auto mu = mesh_flow(free, mesh, 16);  // t = 1
    Matrix l = ct1.generator_of(0);
    l *= 1.0;
    auto expect = row_times(free.initial_law().weights(), expm(l));
    // mesh transport is expm(L/m) composed m times: exact up to roundoff
    CHECK(tv_distance(mu.weights(), expect) < 1e-12);
}

TEST_CASE("ct_exact_flow special cases") {
    auto ct1 = make_ct1();

    SECTION("zero potential reduces to the chain law") {
        FKModelCTMC free(ct1.initial_law(), ct1.generator_of(0),
                         PotentialVector(SignedVector(3, 0.0)), 2.0);
        auto r = ct_exact_flow(free, 1.3);
        Matrix l = ct1.generator_of(0);
        l *= 1.3;
        auto expect = row_times(free.initial_law().weights(), expm(l));
        CHECK(tv_distance(r.mu.weights(), expect) < 1e-12);
        CHECK(r.mass == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("zero generator is pure exponential reweighting") {
        Matrix zero(3);
        FKModelCTMC still(ProbabilityVector({0.2, 0.3, 0.5}), zero,
                          PotentialVector({0.0, 0.3, 0.6}), 2.0);
        double t = 1.4;
        auto r = ct_exact_flow(still, t);
        SignedVector g = {std::exp(0.0 * t), std::exp(0.3 * t), std::exp(0.6 * t)};
        auto expect = boltzmann_gibbs(still.initial_law(), g);
        CHECK(tv_distance(r.mu, expect) < 1e-13);
    }

    SECTION("fine-mesh Euler product self-consistency") {
        // nu <- nu (I + H/m) over m*t steps, H = L + diag(V)
        const std::size_t m = 1u << 22;
        Matrix h = ct1.generator_of(0);
        const auto& v = ct1.potential_of(0);
        for (std::size_t i = 0; i < 3; ++i) h(i, i) += v[i];
        Matrix step = Matrix::identity(3);
        Matrix scaled = h;
        scaled *= 1.0 / static_cast<double>(m);
        step += scaled;
        SignedVector nu = ct1.initial_law().weights();
        for (std::size_t k = 0; k < m; ++k) nu = row_times(nu, step);
        double mass = nu[0] + nu[1] + nu[2];
        for (auto& x : nu) x /= mass;
        auto r = ct_exact_flow(ct1, 1.0);
        CHECK(tv_distance(r.mu.weights(), nu) < 1e-6);
        CHECK(std::abs(r.mass - mass) < 1e-6 * mass);
    }
}

TEST_CASE("piecewise schedules integrate segment by segment") {
    Matrix l1(2, {-1.0, 1.0, 0.5, -0.5});
    Matrix l2(2, {-0.2, 0.2, 0.8, -0.8});
    FKModelCTMC model(ProbabilityVector::dirac(0, 2), {0.0, 0.7},
                      {l1, l2}, {PotentialVector({0.1, -0.2}), PotentialVector({0.0, 0.3})}, 2.0);
    auto r = ct_exact_flow(model, 1.5);

    Matrix h1 = l1;
    h1(0, 0) += 0.1;
    h1(1, 1) += -0.2;
    h1 *= 0.7;
    Matrix h2 = l2;
    h2(1, 1) += 0.3;
    h2 *= 0.8;
    auto nu = row_times(row_times(SignedVector{1.0, 0.0}, expm(h1)), expm(h2));
    double mass = nu[0] + nu[1];
    CHECK(std::abs(r.mass - mass) < 1e-12 * mass);
    for (auto& x : nu) x /= mass;
    CHECK(tv_distance(r.mu.weights(), nu) < 1e-13);
}

TEST_CASE("semigroup bundle on TS1") {
    auto ts1 = make_ts1();
    auto b = semigroup(ts1, 0, 1);
    CHECK(b.q(0, 0) == Catch::Approx(0.7).margin(1e-15));
    CHECK(b.q(0, 1) == Catch::Approx(0.3).margin(1e-15));
    CHECK(b.q(1, 0) == Catch::Approx(0.8).margin(1e-15));
    CHECK(b.q(1, 1) == Catch::Approx(1.2).margin(1e-15));
    CHECK(b.g == Catch::Approx(2.0).margin(1e-14));
    CHECK(b.p(0, 0) == Catch::Approx(0.7).margin(1e-15));
    CHECK(b.p(1, 0) == Catch::Approx(0.4).margin(1e-15));
    CHECK(b.beta == Catch::Approx(0.3).margin(1e-14));

    auto empty = semigroup(ts1, 2, 2);
    CHECK(empty.g == 1.0);
    CHECK(empty.beta == 1.0);  // identity kernel on >= 2 states
    CHECK_THROWS_AS(semigroup(ts1, 3, 1), IndexOrder);
}

TEST_CASE("unit potentials give plain kernel products with g = 1") {
    Rng rng(77, 0);
    auto k = random_stochastic_kernel(rng, 3);
    auto model =
        FKModelDiscrete::homogeneous(ProbabilityVector::uniform(3), k,
                                     PotentialVector(SignedVector(3, 1.0)), 3);
    auto b = semigroup(model, 0, 3);
    CHECK(b.g == Catch::Approx(1.0).margin(1e-12));
    auto p3 = kernel_power(k, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(b.p(i, j) == Catch::Approx(p3(i, j)).margin(1e-12));
}

TEST_CASE("semigroup composition Q_{k,n} = Q_{k,j} Q_{j,n}") {
    Rng rng(303, 0);
    for (int trial = 0; trial < 10; ++trial) {
        auto model = random_discrete_model(rng, 2 + trial % 4, 4);
        for (std::size_t k = 0; k <= 4; ++k)
            for (std::size_t j = k; j <= 4; ++j)
                for (std::size_t n = j; n <= 4; ++n) {
                    auto full = semigroup(model, k, n).q;
                    auto split = matmul(semigroup(model, k, j).q, semigroup(model, j, n).q);
                    for (std::size_t e = 0; e < full.a.size(); ++e)
                        CHECK(std::abs(full.a[e] - split.a[e]) <=
                              1e-10 * std::max(1.0, std::abs(full.a[e])));
                }
    }
}

TEST_CASE("dobrushin of P equals the Dirac-pair sup of the nonlinear semigroup") {
    Rng rng(404, 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t d = 2 + trial % 4;
        auto model = random_discrete_model(rng, d, 3);
        for (std::size_t k = 0; k <= 2; ++k)
            for (std::size_t n = k; n <= 3; ++n) {
                auto b = semigroup(model, k, n);
                double dirac_sup = 0.0;
                for (std::size_t x = 0; x < d; ++x)
                    for (std::size_t y = 0; y < d; ++y) {
                        auto px = fk_semigroup_map(model, k, n, ProbabilityVector::dirac(x, d));
                        auto py = fk_semigroup_map(model, k, n, ProbabilityVector::dirac(y, d));
                        dirac_sup = std::max(dirac_sup, tv_distance(px, py));
                    }
                CHECK(std::abs(dirac_sup - b.beta) < 1e-12);
                // random pairs never exceed the Dirac sup
                for (int pair = 0; pair < 20; ++pair) {
                    auto mu = random_probability(rng, d);
                    auto nu = random_probability(rng, d);
                    double dist = tv_distance(fk_semigroup_map(model, k, n, mu),
                                              fk_semigroup_map(model, k, n, nu));
                    CHECK(dist <= b.beta + 1e-12);
                }
            }
    }
}

TEST_CASE("theorem2_constant") {
    auto ts1 = make_ts1();
    CHECK(theorem2_constant(ts1, 0) == 0.0);

    // n = 1: single term g_{0,1}^3 g_{0,1}^3 (||log G_0|| v 1)^2 beta(P_{0,1})
    //      = 2^3 * 2^3 * 1 * 0.3 = 19.2
    CHECK(theorem2_constant(ts1, 1) == Catch::Approx(19.2).margin(1e-12));

    // n = 2: reassemble from semigroup() outputs
    double expect = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        auto far = semigroup(ts1, k, 2);
        auto near = semigroup(ts1, k, k + 1);
        double log_norm = std::max(std::abs(std::log(1.0)), std::abs(std::log(2.0)));
        double f = std::max(log_norm, 1.0);
        expect += std::pow(far.g, 3) * std::pow(near.g, 3) * f * f * far.beta;
    }
    CHECK(theorem2_constant(ts1, 2) == Catch::Approx(expect).margin(1e-12));

    // rank-one kernel kills every beta
    auto flat = TransitionKernel::stochastic({0.5, 0.5, 0.5, 0.5}, 2);
    auto rank1 =
        FKModelDiscrete::homogeneous(ProbabilityVector::dirac(0, 2), flat,
                                     PotentialVector(SignedVector(2, 1.0)), 3);
    CHECK(theorem2_constant(rank1, 3) == 0.0);
}

TEST_CASE("uniform recycling flow") {
    SECTION("zero potential coincides with the mesh flow") {
        auto ct1 = make_ct1();
        FKModelCTMC free(ct1.initial_law(), ct1.generator_of(0),
                         PotentialVector(SignedVector(3, 0.0)), 2.0);
        MeshSchedule mesh(8);
        for (std::size_t k : {0u, 3u, 8u, 16u})
            CHECK(tv_distance(uniform_recycling_flow(free, mesh, k), mesh_flow(free, mesh, k)) <
                  1e-13);
    }

    SECTION("positive potential entries are rejected") {
        auto ct1 = make_ct1();
        CHECK_THROWS_AS(uniform_recycling_flow(ct1, MeshSchedule(4), 4), WrongPotentialSign);
    }

    SECTION("independent straight-loop recursion agrees on CT1 (m = 8, t = 1)") {
        auto shifted = make_ct1().case1_shifted();
        MeshSchedule mesh(8);
        auto lib = uniform_recycling_flow(shifted, mesh, 8);

        // test-side recursion: build the S~ matrix explicitly each step
        auto transport = transition_from_generator(shifted.generator_of(0), 1.0 / 8.0);
        SignedVector mu = shifted.initial_law().weights();
        const auto& v = shifted.potential_of(0);
        for (int step = 0; step < 8; ++step) {
            SignedVector s(9, 0.0);
            for (std::size_t x = 0; x < 3; ++x) {
                double keep = std::exp(v[x] / 8.0);  // V = -U
                for (std::size_t y = 0; y < 3; ++y) s[x * 3 + y] = (1.0 - keep) * mu[y];
                s[x * 3 + x] += keep;
            }
            mu = apply_kernel(mu, TransitionKernel::stochastic(std::move(s), 3));
            mu = apply_kernel(mu, transport);
            double mass = mu[0] + mu[1] + mu[2];
            for (auto& x : mu) x /= mass;
        }
        CHECK(tv_distance(lib.weights(), mu) < 1e-12);
    }

    SECTION("gap to the mesh flow shrinks with m") {
        auto shifted = make_ct1().case1_shifted();
        double prev = 1.0;
        for (std::size_t m : {4u, 16u, 64u}) {
            MeshSchedule mesh(m);
            double gap = tv_distance(uniform_recycling_flow(shifted, mesh, m),
                                     mesh_flow(shifted, mesh, m));
            CHECK(gap < prev);
            prev = gap;
        }
    }
}

TEST_CASE("carre du champ") {
    Matrix l(2, {-1.0, 1.0, 0.5, -0.5});
    CHECK(oscillation(carre_du_champ(l, SignedVector{3.0, 3.0})) == 0.0);
    CHECK(carre_du_champ(Matrix(3), SignedVector{1.0, 2.0, 3.0}) == SignedVector{0.0, 0.0, 0.0});

    auto g = carre_du_champ(l, SignedVector{0.0, 1.0});
    CHECK(g[0] == Catch::Approx(1.0).margin(1e-15));
    CHECK(g[1] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("mesh flow respects the horizon") {
    auto ts1 = make_ts1(2);
    MeshSchedule mesh(4);
    CHECK_THROWS_AS(mesh_flow(ts1, mesh, 9), HorizonExceeded);
    auto ct1 = make_ct1(1.0);
    CHECK_THROWS_AS(mesh_flow(ct1, mesh, 5), HorizonExceeded);
    CHECK_THROWS_AS(ct_exact_flow(ct1, 1.5), HorizonExceeded);
}
