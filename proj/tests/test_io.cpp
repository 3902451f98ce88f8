#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "fkpi/model_io.hpp"
#include "fkpi/oracle.hpp"

using namespace fkpi;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    std::string path = std::string("/tmp/fkpi_io_") + name;
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("model files round-trip against the built-in zoo") {
    auto ts1_file = load_model_file("models/ts1.json");
    auto ts1 = make_ts1(4);
    const auto& loaded = std::get<FKModelDiscrete>(ts1_file.model);
    for (std::size_t n = 0; n <= 4; ++n) {
        auto a = flow_discrete(loaded, n);
        auto b = flow_discrete(ts1, n);
        CHECK(tv_distance(a.eta, b.eta) < 1e-15);
        CHECK(a.gamma_mass == Catch::Approx(b.gamma_mass).margin(1e-15));
    }

    auto mix1_file = load_model_file("models/mix1.json");
    auto mix1 = make_mix1(8);
    const auto& mloaded = std::get<FKModelDiscrete>(mix1_file.model);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(mloaded.kernel(0)(i, j) == Catch::Approx(mix1.kernel(0)(i, j)).margin(1e-15));

    auto ct1_file = load_model_file("models/ct1.json");
    auto ct1 = make_ct1(4.0);
    const auto& cloaded = std::get<FKModelCTMC>(ct1_file.model);
    auto a = ct_exact_flow(cloaded, 1.0);
    auto b = ct_exact_flow(ct1, 1.0);
    CHECK(tv_distance(a.mu, b.mu) < 1e-14);
}

TEST_CASE("malformed kernels are reported with the row") {
    auto path = write_temp("bad_kernel.json", R"({
      "name": "bad", "type": "discrete", "state_count": 2,
      "initial_law": [1.0, 0.0],
      "kernels": [[0.5, 0.4, 0.4, 0.6]],
      "potentials": [[1.0, 1.0]]
    })");
    try {
        load_model_file(path);
        FAIL("expected NotStochastic");
    } catch (const NotStochastic& e) {
        std::string msg = e.what();
        CHECK(msg.find("kernels[0]") != std::string::npos);
        CHECK(msg.find("row 0") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("config parsing validates fields") {
    SECTION("missing seed") {
        auto j = nlohmann::json::parse(R"({"model":"TS1","N":[10],"m":[1]})");
        CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    }
    SECTION("empty m list") {
        auto j = nlohmann::json::parse(R"({"model":"TS1","N":[10],"m":[],"seed":1})");
        CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    }
    SECTION("zero replications") {
        auto j = nlohmann::json::parse(
            R"({"model":"TS1","N":[10],"m":[1],"seed":1,"replications":0})");
        CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    }
    SECTION("bad case name") {
        auto j = nlohmann::json::parse(
            R"({"model":"TS1","N":[10],"m":[1],"seed":1,"case":"case9"})");
        CHECK_THROWS_AS(parse_experiment_config(j), ConfigError);
    }
    SECTION("well-formed config") {
        auto j = nlohmann::json::parse(R"({
          "model": "CT1", "case": "case1", "N": [100, 1000], "m": [4, 8],
          "replications": 10, "horizon": 1.0, "seed": 42, "out": "x", "suite": "mesh_gap"
        })");
        auto c = parse_experiment_config(j);
        CHECK(c.n_list.size() == 2);
        CHECK(c.m_list.size() == 2);
        CHECK(c.seed == 42);
        CHECK(c.suite == "mesh_gap");
    }
}

TEST_CASE("json parse errors carry position diagnostics") {
    auto path = write_temp("syntax.json", "{ \"model\": \"TS1\", ");
    try {
        load_experiment_config(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("zoo resolution") {
    CHECK(std::holds_alternative<FKModelDiscrete>(resolve_model("TS1").model));
    CHECK(std::holds_alternative<FKModelCTMC>(resolve_model("CT1").model));
    CHECK(std::holds_alternative<FKModelDiscrete>(resolve_model("MIX1").model));
    CHECK_THROWS_AS(resolve_model("no/such/file.json"), ConfigError);
}

TEST_CASE("piecewise ctmc model files parse") {
    auto path = write_temp("piecewise.json", R"({
      "name": "PW", "type": "ctmc", "state_count": 2,
      "initial_law": [1.0, 0.0],
      "generators": [[-1.0, 1.0, 0.5, -0.5], [-0.2, 0.2, 0.8, -0.8]],
      "potentials": [[0.1, -0.2], [0.0, 0.3]],
      "breaks": [0.0, 0.7],
      "horizon": 2.0
    })");
    auto nm = load_model_file(path);
    const auto& model = std::get<FKModelCTMC>(nm.model);
    CHECK(model.segment_count() == 2);
    CHECK(model.segment_at(0.5) == 0);
    CHECK(model.segment_at(0.9) == 1);
    std::remove(path.c_str());
}
