#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fkpi/models.hpp"
#include "fkpi/stats.hpp"
#include "fkpi/sweep.hpp"

using namespace fkpi;

TEST_CASE("geometric and exponential engines: zero potential agrees within noise") {
    auto ct1 = make_ct1();
    FKModelCTMC free(ct1.initial_law(), ct1.generator_of(0), PotentialVector(SignedVector(3, 0.0)),
                     2.0);
    auto rows = geometric_vs_exponential_gap(free, 20000, {8}, 1.0, 8, 515, 2);
    for (const auto& r : rows) CHECK(r.gap < 3.0 * r.se + 1e-9);
}

TEST_CASE("fine mesh closes the engine gap") {
    auto shifted = make_ct1().case1_shifted();
    auto rows = geometric_vs_exponential_gap(shifted, 20000, {512}, 1.0, 8, 616, 2);
    // systematic component ~ c/512 is far below the Monte Carlo resolution
    for (const auto& r : rows) CHECK(r.gap < 3.5 * r.se + 1e-4);
}

TEST_CASE("engine gap shrinks at first order over the m grid") {
    auto shifted = make_ct1().case1_shifted();
    const std::size_t n = 100000;
    auto rows = geometric_vs_exponential_gap(shifted, n, {4, 8, 16, 32}, 1.0, 8, 20250810, 2);

    // per m keep the largest SE-dominating state gap; fit the survivors
    std::vector<double> xs, ys;
    for (std::size_t m : {4u, 8u, 16u, 32u}) {
        double best = 0.0;
        for (const auto& r : rows)
            if (r.m == m && r.gap > 3.0 * r.se) best = std::max(best, r.gap);
        if (best > 0.0) {
            xs.push_back(double(m));
            ys.push_back(best);
        }
    }
    REQUIRE(xs.size() >= 3);
    auto fit = fit_slope(xs, ys);
    CHECK(fit.slope > -1.3);
    CHECK(fit.slope < -0.7);
}
