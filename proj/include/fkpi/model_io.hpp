#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fkpi/models.hpp"
#include "fkpi/selection.hpp"

// Model files and experiment configs. One JSON document per model with the
// fields state_count, kernels/generators (row-major), potentials,
// initial_law and the schedule; see the README for the schema.

namespace fkpi {

using ModelVariant = std::variant<FKModelDiscrete, FKModelCTMC>;

struct NamedModel {
    std::string name;
    ModelVariant model;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key,
                                           const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
    return *it;
}

inline SignedVector as_vector(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
    SignedVector v;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

}  // namespace detail

inline NamedModel parse_model(const nlohmann::json& j) {
    using detail::as_vector;
    using detail::require_field;

    std::string name = j.value("name", "unnamed");
    const std::string where = "model '" + name + "'";
    std::string type = require_field(j, "type", where).get<std::string>();
    auto d = require_field(j, "state_count", where).get<std::size_t>();
    ProbabilityVector initial(as_vector(require_field(j, "initial_law", where), where));
    if (initial.size() != d) throw ConfigError(where + ": initial_law length != state_count");

    if (type == "discrete") {
        auto kernels_json = require_field(j, "kernels", where);
        auto potentials_json = require_field(j, "potentials", where);
        if (!kernels_json.is_array() || kernels_json.empty())
            throw ConfigError(where + ": kernels must be a nonempty array");
        std::vector<TransitionKernel> kernels;
        for (std::size_t i = 0; i < kernels_json.size(); ++i) {
            auto rows = as_vector(kernels_json[i], where + " kernels[" + std::to_string(i) + "]");
            try {
                kernels.push_back(TransitionKernel::stochastic(std::move(rows), d));
            } catch (const NotStochastic& e) {
                throw NotStochastic(where + " kernels[" + std::to_string(i) + "]: " + e.what());
            }
        }
        std::vector<PotentialVector> potentials;
        for (std::size_t i = 0; i < potentials_json.size(); ++i)
            potentials.emplace_back(
                as_vector(potentials_json[i], where + " potentials[" + std::to_string(i) + "]"));

        std::size_t steps = j.value("steps", kernels.size());
        if (kernels.size() == 1 && steps > 1) kernels.assign(steps, kernels[0]);
        if (potentials.size() == 1 && steps > 1) potentials.assign(steps, potentials[0]);
        return NamedModel{name, FKModelDiscrete(std::move(initial), std::move(kernels),
                                                std::move(potentials))};
    }
    if (type == "ctmc") {
        auto gens_json = require_field(j, "generators", where);
        auto pots_json = require_field(j, "potentials", where);
        double horizon = require_field(j, "horizon", where).get<double>();
        std::vector<double> breaks;
        if (j.contains("breaks"))
            for (const auto& b : j["breaks"]) breaks.push_back(b.get<double>());
        else
            breaks.push_back(0.0);
        std::vector<Matrix> gens;
        for (std::size_t i = 0; i < gens_json.size(); ++i)
            gens.emplace_back(d, as_vector(gens_json[i],
                                           where + " generators[" + std::to_string(i) + "]"));
        std::vector<PotentialVector> pots;
        for (std::size_t i = 0; i < pots_json.size(); ++i)
            pots.emplace_back(as_vector(pots_json[i],
                                        where + " potentials[" + std::to_string(i) + "]"));
        return NamedModel{name, FKModelCTMC(std::move(initial), std::move(breaks), std::move(gens),
                                            std::move(pots), horizon)};
    }
    throw ConfigError(where + ": unknown type '" + type + "' (discrete|ctmc)");
}

inline NamedModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("model file " + path + ": " + e.what());
    }
    return parse_model(j);
}

/// Resolve a zoo name (TS1, CT1, MIX1) or fall through to a file path.
inline NamedModel resolve_model(const std::string& ref, std::size_t discrete_horizon = 8,
                                double ct_horizon = 8.0) {
    if (ref == "TS1") return NamedModel{"TS1", make_ts1(discrete_horizon)};
    if (ref == "CT1") return NamedModel{"CT1", make_ct1(ct_horizon)};
    if (ref == "MIX1") return NamedModel{"MIX1", make_mix1(discrete_horizon)};
    return load_model_file(ref);
}

inline SelectionCase parse_case(const std::string& s) {
    if (s == "case1") return SelectionCase::Case1NegPotential;
    if (s == "case2") return SelectionCase::Case2PosPotential;
    if (s == "case3") return SelectionCase::Case3PairwisePositive;
    if (s == "uniform") return SelectionCase::UniformRecycling;
    throw ConfigError("unknown selection case '" + s + "' (case1|case2|case3|uniform)");
}

struct ExperimentConfig {
    std::string model_ref;
    std::string case_name = "case1";
    std::vector<std::size_t> n_list;
    std::vector<std::size_t> m_list;
    std::size_t replications = 1;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    bool seed_present = false;
    std::string out_dir = ".";
    std::string suite;
    unsigned threads = 1;
};

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using detail::require_field;
    ExperimentConfig c;
    c.model_ref = require_field(j, "model", "config").get<std::string>();
    c.case_name = j.value("case", std::string("case1"));
    parse_case(c.case_name);  // validate early
    for (const auto& n : require_field(j, "N", "config")) c.n_list.push_back(n.get<std::size_t>());
    for (const auto& m : require_field(j, "m", "config")) c.m_list.push_back(m.get<std::size_t>());
    if (c.n_list.empty()) throw ConfigError("config: N list must be nonempty");
    if (c.m_list.empty()) throw ConfigError("config: m list must be nonempty");
    for (auto m : c.m_list)
        if (m == 0) throw ConfigError("config: m entries must be >= 1");
    c.replications = j.value("replications", std::size_t{1});
    if (c.replications < 1) throw ConfigError("config: replications must be >= 1");
    c.horizon = j.value("horizon", 1.0);
    if (!j.contains("seed"))
        throw ConfigError("config: seed is required (runs are never wall-clock seeded)");
    c.seed = j["seed"].get<std::uint64_t>();
    c.seed_present = true;
    c.out_dir = j.value("out", std::string("."));
    c.suite = j.value("suite", std::string());
    c.threads = j.value("threads", 1u);
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

}  // namespace fkpi
