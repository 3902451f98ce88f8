// fkpi: config-driven front end for the Feynman-Kac particle integration
// library. Subcommands:
//   exact     deterministic oracle flows, semigroup constants, a(n) table
//   particle  one seeded particle run with recorded estimators
//   sweep     (N, m) replication sweeps with slope assertions
//   ctsim     continuous-time jump simulation with optional event log
//   verify    the full acceptance suite
// Exit codes: 0 all assertions passed, 1 config/model error, 2 assertion
// failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fkpi/acceptance.hpp"
#include "fkpi/ctjump.hpp"
#include "fkpi/model_io.hpp"
#include "fkpi/oracle.hpp"
#include "fkpi/particle.hpp"
#include "fkpi/stats.hpp"
#include "fkpi/sweep.hpp"

namespace {

using namespace fkpi;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitAssertionFailed = 2;

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/" + name);
    if (!out) throw ConfigError("cannot write " + dir + "/" + name);
    out << text;
}

std::string csv_escape_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// --- exact ------------------------------------------------------------

int cmd_exact(const std::string& model_ref, std::size_t m, double horizon,
              const std::string& out_dir) {
    auto named = resolve_model(model_ref, static_cast<std::size_t>(horizon), horizon);
    MeshSchedule mesh(m);
    std::string flows = "kind,time,state,value,mass\n";
    char line[256];

    if (std::holds_alternative<FKModelDiscrete>(named.model)) {
        const auto& model = std::get<FKModelDiscrete>(named.model);
        std::size_t n_max = model.horizon();
        for (std::size_t n = 0; n <= n_max; ++n) {
            auto r = flow_discrete(model, n);
            for (std::size_t s = 0; s < model.state_count(); ++s) {
                std::snprintf(line, sizeof line, "eta,%zu,%zu,%s,%s\n", n, s,
                              csv_escape_double(r.eta[s]).c_str(),
                              csv_escape_double(r.gamma_mass).c_str());
                flows += line;
            }
        }
        for (std::size_t k = 0; k <= n_max * mesh.m; ++k) {
            auto r = mesh_flow_full(model, mesh, k);
            for (std::size_t s = 0; s < model.state_count(); ++s) {
                std::snprintf(line, sizeof line, "mesh,%.17g,%zu,%s,%s\n", mesh.time_of(k), s,
                              csv_escape_double(r.mu[s]).c_str(),
                              csv_escape_double(r.mass).c_str());
                flows += line;
            }
        }
        // uniform recycling requires the Case-1 sign; shift if needed
        auto shifted = model.case1_shifted();
        for (std::size_t k = 0; k <= n_max * mesh.m; ++k) {
            auto mu = uniform_recycling_flow(shifted, mesh, k);
            for (std::size_t s = 0; s < model.state_count(); ++s) {
                std::snprintf(line, sizeof line, "recycling,%.17g,%zu,%s,\n", mesh.time_of(k), s,
                              csv_escape_double(mu[s]).c_str());
                flows += line;
            }
        }
        write_file(out_dir, "flows.csv", flows);

        std::string sg = "k,n,g,beta\n";
        std::string a_table = "n,a_structural\n";
        for (std::size_t n = 0; n <= n_max; ++n) {
            for (std::size_t k = 0; k <= n; ++k) {
                auto b = semigroup(model, k, n);
                std::snprintf(line, sizeof line, "%zu,%zu,%s,%s\n", k, n,
                              csv_escape_double(b.g).c_str(), csv_escape_double(b.beta).c_str());
                sg += line;
            }
            std::snprintf(line, sizeof line, "%zu,%s\n", n,
                          csv_escape_double(theorem2_constant(model, n)).c_str());
            a_table += line;
        }
        write_file(out_dir, "semigroup.csv", sg);
        write_file(out_dir, "theorem2.csv", a_table);
    } else {
        const auto& model = std::get<FKModelCTMC>(named.model);
        double t_max = std::min(horizon, model.horizon());
        std::size_t k_max = static_cast<std::size_t>(std::floor(t_max * double(mesh.m) + 1e-12));
        for (std::size_t k = 0; k <= k_max; ++k) {
            auto exact = ct_exact_flow(model, mesh.time_of(k));
            auto mf = mesh_flow_full(model, mesh, k);
            for (std::size_t s = 0; s < model.state_count(); ++s) {
                std::snprintf(line, sizeof line, "exact,%.17g,%zu,%s,%s\n", mesh.time_of(k), s,
                              csv_escape_double(exact.mu[s]).c_str(),
                              csv_escape_double(exact.mass).c_str());
                flows += line;
                std::snprintf(line, sizeof line, "mesh,%.17g,%zu,%s,%s\n", mesh.time_of(k), s,
                              csv_escape_double(mf.mu[s]).c_str(),
                              csv_escape_double(mf.mass).c_str());
                flows += line;
            }
        }
        auto shifted = model.case1_shifted();
        for (std::size_t k = 0; k <= k_max; ++k) {
            auto mu = uniform_recycling_flow(shifted, mesh, k);
            for (std::size_t s = 0; s < model.state_count(); ++s) {
                std::snprintf(line, sizeof line, "recycling,%.17g,%zu,%s,\n", mesh.time_of(k), s,
                              csv_escape_double(mu[s]).c_str());
                flows += line;
            }
        }
        write_file(out_dir, "flows.csv", flows);
    }
    std::printf("wrote oracle tables for %s to %s\n", named.name.c_str(), out_dir.c_str());
    return kExitOk;
}

// --- particle ---------------------------------------------------------

int cmd_particle(const std::string& model_ref, const std::string& case_name, std::size_t n,
                 std::size_t m, double horizon, std::uint64_t seed, const std::string& out_dir,
                 bool trace) {
    auto sel = parse_case(case_name);
    MeshSchedule mesh(m);

    if (model_ref == "OU1") {
        // diffusion demo: report estimator moments, no exact column
        OuEulerModel model(1.0, 0.8, 0.5, 0.4, mesh, horizon);
        std::vector<std::size_t> record;
        for (std::size_t k = 0; k <= model.max_index(); k += mesh.m) record.push_back(k);
        std::vector<std::function<double(const double&)>> fs = {
            [](const double& x) { return x; }, [](const double& x) { return x * x; }};
        auto est = run_particles(model, sel, n, seed, record, fs);
        std::string csv = "step,time,mean_x,mean_x2,mass,survivors\n";
        char line[256];
        for (const auto& rec : est.records) {
            std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%zu\n", rec.mesh_index,
                          mesh.time_of(rec.mesh_index), rec.f_values[0], rec.f_values[1],
                          rec.mass_estimate, rec.survivors);
            csv += line;
        }
        write_file(out_dir, "run.csv", csv);
        std::printf("OU1 run written to %s/run.csv\n", out_dir.c_str());
        return kExitOk;
    }

    auto named = resolve_model(model_ref, static_cast<std::size_t>(horizon), horizon);
    auto run_finite = [&](const auto& fk_model, auto engine) {
        std::vector<std::size_t> record;
        for (std::size_t k = 0; k <= engine.max_index(); ++k)
            if (k % mesh.m == 0) record.push_back(k);
        auto est = run_particles(engine, sel, n, seed, record);
        std::string csv = "step,time,state,empirical,mass,survivors\n";
        char line[256];
        std::string trace_text;
        for (const auto& rec : est.records) {
            for (std::size_t s = 0; s < rec.empirical.size(); ++s) {
                std::snprintf(line, sizeof line, "%zu,%.17g,%zu,%.17g,%.17g,%zu\n", rec.mesh_index,
                              mesh.time_of(rec.mesh_index), s, rec.empirical[s],
                              rec.mass_estimate, rec.survivors);
                csv += line;
            }
            if (trace) {
                trace_text += std::to_string(rec.mesh_index);
                for (std::size_t s = 0; s < rec.empirical.size(); ++s) {
                    trace_text += ' ';
                    trace_text += csv_escape_double(rec.empirical[s]);
                }
                trace_text += '\n';
            }
        }
        write_file(out_dir, "run.csv", csv);
        if (trace) write_file(out_dir, "trace.txt", trace_text);
        (void)fk_model;
    };

    if (std::holds_alternative<FKModelDiscrete>(named.model)) {
        const auto& fk = std::get<FKModelDiscrete>(named.model);
        const auto& model = sel == SelectionCase::Case1NegPotential ||
                                    sel == SelectionCase::UniformRecycling
                                ? fk.case1_shifted()
                                : fk;
        run_finite(model, DiscreteMeshModel(model, mesh));
    } else {
        const auto& fk = std::get<FKModelCTMC>(named.model);
        const auto& model = sel == SelectionCase::Case1NegPotential ||
                                    sel == SelectionCase::UniformRecycling
                                ? fk.case1_shifted()
                                : fk;
        run_finite(model, CtmcMeshModel(model, mesh));
    }
    std::printf("particle run written to %s/run.csv\n", out_dir.c_str());
    return kExitOk;
}

// --- sweep suites ------------------------------------------------------

struct SuiteOutcome {
    std::vector<SweepRow> rows;
    std::string summary;
    bool passed = true;
};

void append_fit_line(SuiteOutcome& so, const std::string& label, const SlopeFit& fit,
                     double target, double tol, double r2_min = -1.0) {
    bool ok = std::abs(fit.slope - target) <= tol && fit.r_squared >= r2_min;
    char line[256];
    std::snprintf(line, sizeof line, "%s: slope %.4f (target %.2f +- %.2f), r^2 %.5f -> %s\n",
                  label.c_str(), fit.slope, target, tol, fit.r_squared, ok ? "pass" : "FAIL");
    so.summary += line;
    so.passed = so.passed && ok;
}

SuiteOutcome suite_variance_vs_n(const ExperimentConfig& cfg) {
    auto named = resolve_model(cfg.model_ref, static_cast<std::size_t>(cfg.horizon) + 1,
                               cfg.horizon + 1.0);
    if (!std::holds_alternative<FKModelDiscrete>(named.model))
        throw ConfigError("variance_vs_n expects a discrete model");
    const auto& model = std::get<FKModelDiscrete>(named.model);
    SuiteOutcome so;
    so.rows = bias_variance_sweep(model, parse_case(cfg.case_name), cfg.n_list, cfg.m_list,
                                  cfg.replications, cfg.horizon, ReferenceFlow::ExactFlow,
                                  cfg.seed, cfg.threads);
    std::vector<double> xs, ys;
    for (const auto& row : so.rows) {
        if (row.f_id != "ind1" || row.m != cfg.m_list.front()) continue;
        xs.push_back(static_cast<double>(row.n_particles));
        ys.push_back(row.var);
    }
    append_fit_line(so, "var(mu^N(f)) vs N", fit_slope(xs, ys), -1.0, 0.2);
    return so;
}

SuiteOutcome suite_bias_vs_m(const ExperimentConfig& cfg) {
    auto named = resolve_model(cfg.model_ref, static_cast<std::size_t>(cfg.horizon) + 1,
                               cfg.horizon + 1.0);
    if (!std::holds_alternative<FKModelCTMC>(named.model))
        throw ConfigError("bias_vs_m expects a ctmc model");
    auto model = std::get<FKModelCTMC>(named.model).case1_shifted();
    SuiteOutcome so;
    std::vector<double> xs, ys;
    for (std::size_t m : cfg.m_list) {
        auto rows = bias_variance_sweep(model, SelectionCase::Case1NegPotential, {m * m}, {m},
                                        cfg.replications, cfg.horizon, ReferenceFlow::ExactFlow,
                                        derive_seed(cfg.seed, m), cfg.threads);
        for (auto& row : rows) {
            if (row.f_id == "mass" && std::abs(row.bias) > 3.0 * row.se) {
                xs.push_back(static_cast<double>(m));
                ys.push_back(std::abs(row.bias));
            }
            so.rows.push_back(std::move(row));
        }
    }
    if (xs.size() < 3) {
        so.summary += "bias_vs_m: fewer than 3 points exceed 3SE -> FAIL\n";
        so.passed = false;
        return so;
    }
    append_fit_line(so, "|bias(gamma^N)| vs m", fit_slope(xs, ys), -1.0, 0.2);
    return so;
}

SuiteOutcome suite_mesh_gap(const ExperimentConfig& cfg) {
    auto named = resolve_model(cfg.model_ref, 2, cfg.horizon + 1.0);
    if (!std::holds_alternative<FKModelCTMC>(named.model))
        throw ConfigError("mesh_gap expects a ctmc model");
    const auto& model = std::get<FKModelCTMC>(named.model);
    SuiteOutcome so;
    auto pts = deterministic_mesh_gap(model, cfg.m_list, cfg.horizon);
    std::vector<double> xs, ys;
    char line[128];
    for (auto [x, y] : pts) {
        xs.push_back(x);
        ys.push_back(y);
        std::snprintf(line, sizeof line, "m=%g tv=%.6e\n", x, y);
        so.summary += line;
    }
    append_fit_line(so, "TV(mesh, exact) vs m", fit_slope(xs, ys), -1.0, 0.15, 0.98);
    return so;
}

SuiteOutcome suite_recycling_gap(const ExperimentConfig& cfg) {
    auto named = resolve_model(cfg.model_ref, 2, cfg.horizon + 1.0);
    if (!std::holds_alternative<FKModelCTMC>(named.model))
        throw ConfigError("recycling_gap expects a ctmc model");
    auto model = std::get<FKModelCTMC>(named.model).case1_shifted();
    SuiteOutcome so;
    auto pts = recycling_gap(model, cfg.m_list, cfg.horizon);
    std::vector<double> xs, ys;
    for (auto [x, y] : pts) {
        xs.push_back(x);
        ys.push_back(y);
    }
    append_fit_line(so, "TV(recycling, mesh) vs m", fit_slope(xs, ys), -1.0, 0.15);
    return so;
}

SuiteOutcome suite_geo_vs_exp(const ExperimentConfig& cfg) {
    auto named = resolve_model(cfg.model_ref, 2, cfg.horizon + 1.0);
    if (!std::holds_alternative<FKModelCTMC>(named.model))
        throw ConfigError("geo_vs_exp expects a ctmc model");
    auto model = std::get<FKModelCTMC>(named.model).case1_shifted();
    SuiteOutcome so;
    auto gaps = geometric_vs_exponential_gap(model, cfg.n_list.front(), cfg.m_list, cfg.horizon,
                                             cfg.replications, cfg.seed, cfg.threads);
    char line[160];
    // per m, use the state with the largest significant gap
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const auto& g = gaps[i];
        std::snprintf(line, sizeof line, "m=%zu state=%zu gap=%.5e se=%.2e\n", g.m, g.state,
                      g.gap, g.se);
        so.summary += line;
    }
    for (std::size_t m : cfg.m_list) {
        double best = 0.0;
        bool significant = false;
        for (const auto& g : gaps)
            if (g.m == m && g.gap > 3.0 * g.se && g.gap > best) {
                best = g.gap;
                significant = true;
            }
        if (significant) {
            xs.push_back(static_cast<double>(m));
            ys.push_back(best);
        }
    }
    if (xs.size() < 3) {
        so.summary += "geo_vs_exp: fewer than 3 SE-dominating points -> FAIL\n";
        so.passed = false;
        return so;
    }
    append_fit_line(so, "|mean_geo - mean_exp| vs m", fit_slope(xs, ys), -1.0, 0.3);
    return so;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    SuiteOutcome so;
    if (cfg.suite == "variance_vs_n") so = suite_variance_vs_n(cfg);
    else if (cfg.suite == "bias_vs_m") so = suite_bias_vs_m(cfg);
    else if (cfg.suite == "mesh_gap") so = suite_mesh_gap(cfg);
    else if (cfg.suite == "recycling_gap") so = suite_recycling_gap(cfg);
    else if (cfg.suite == "geo_vs_exp") so = suite_geo_vs_exp(cfg);
    else
        throw ConfigError("unknown suite '" + cfg.suite +
                          "' (variance_vs_n|bias_vs_m|mesh_gap|recycling_gap|geo_vs_exp)");
    if (!so.rows.empty()) write_file(cfg.out_dir, "sweep.csv", format_sweep_csv(so.rows));
    write_file(cfg.out_dir, "summary.txt", so.summary);
    std::fputs(so.summary.c_str(), stdout);
    return so.passed ? kExitOk : kExitAssertionFailed;
}

// --- ctsim --------------------------------------------------------------

int cmd_ctsim(const std::string& model_ref, const std::string& case_name, std::size_t n,
              double horizon, const std::string& mode_name, std::uint64_t seed,
              const std::string& out_dir, bool events) {
    auto named = resolve_model(model_ref, 2, horizon + 1.0);
    if (!std::holds_alternative<FKModelCTMC>(named.model))
        throw ConfigError("ctsim expects a ctmc model");
    CtJumpCase jcase;
    if (case_name == "case1") jcase = CtJumpCase::Case1;
    else if (case_name == "case2") jcase = CtJumpCase::Case2;
    else if (case_name == "case3") jcase = CtJumpCase::Case3;
    else if (case_name == "plusminus") jcase = CtJumpCase::PlusMinus;
    else throw ConfigError("ctsim case must be case1|case2|case3|plusminus");

    JumpSchedulingMode mode;
    if (mode_name == "individual") mode = JumpSchedulingMode::IndividualClocks;
    else if (mode_name == "population") mode = JumpSchedulingMode::PopulationClock;
    else if (mode_name == "thinned") mode = JumpSchedulingMode::ThinnedPopulationClock;
    else throw ConfigError("ctsim mode must be individual|population|thinned");

    auto model = std::get<FKModelCTMC>(named.model);
    if (jcase == CtJumpCase::Case1) model = model.case1_shifted();

    std::vector<double> record;
    for (double t = 0.0; t <= horizon + 1e-12; t += 0.25) record.push_back(t);
    auto res = simulate_ct(model, jcase, n, horizon, mode, seed, record, events);

    std::string csv = "time,state,empirical\n";
    char line[128];
    for (std::size_t i = 0; i < res.snapshots.size(); ++i)
        for (std::size_t s = 0; s < model.state_count(); ++s) {
            std::snprintf(line, sizeof line, "%.17g,%zu,%.17g\n", res.record_times[i], s,
                          res.snapshots[i][s]);
            csv += line;
        }
    write_file(out_dir, "snapshots.csv", csv);
    if (events) {
        std::string ev = "time,particle,kind,from,to\n";
        for (const auto& e : res.events) {
            std::snprintf(line, sizeof line, "%.17g,%lld,%c,%d,%d\n", e.time,
                          static_cast<long long>(e.particle), e.kind, e.from, e.to);
            ev += line;
        }
        write_file(out_dir, "events.csv", ev);
    }
    std::printf("ctsim: %zu motion, %zu jump events; wrote %s/snapshots.csv\n",
                res.motion_events, res.jump_events, out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feynman-Kac particle integration toolkit"};
    app.require_subcommand(1);

    std::string model_ref = "TS1", case_name = "case2", out_dir = "out", mode_name = "population";
    std::string config_path;
    std::size_t n = 1000, m = 1;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    bool seed_set = false, trace = false, events = false;
    unsigned threads = 2;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; },
               "master seed (required; runs are never wall-clock seeded)")
            ->required();
    };

    auto* exact = app.add_subcommand("exact", "deterministic oracle flows and constants");
    exact->add_option("--model", model_ref, "zoo name (TS1|CT1|MIX1) or model file");
    exact->add_option("--m", m, "mesh steps per unit time");
    exact->add_option("--horizon", horizon, "time horizon");
    exact->add_option("--out", out_dir, "output directory");

    auto* particle = app.add_subcommand("particle", "one seeded particle run");
    particle->add_option("--model", model_ref, "zoo name, OU1, or model file");
    particle->add_option("--case", case_name, "case1|case2|case3|uniform");
    particle->add_option("--N", n, "particle count");
    particle->add_option("--m", m, "mesh steps per unit time");
    particle->add_option("--horizon", horizon, "time horizon");
    particle->add_option("--out", out_dir, "output directory");
    particle->add_flag("--trace", trace, "dump newline-delimited empirical traces");
    add_seed(particle);

    auto* sweep = app.add_subcommand("sweep", "replication sweep with slope assertions");
    sweep->add_option("--config", config_path, "experiment config JSON")->required();
    sweep->add_option("--seed", seed, "override the config seed");
    sweep->add_option("--out", out_dir, "override the config output directory");
    sweep->add_option("--threads", threads, "override the config thread count");
    std::string suite_override;
    sweep->add_option("--suite", suite_override, "override the config suite");

    auto* ctsim = app.add_subcommand("ctsim", "continuous-time jump simulation");
    ctsim->add_option("--model", model_ref, "zoo name or ctmc model file");
    ctsim->add_option("--case", case_name, "case1|case2|case3|plusminus");
    ctsim->add_option("--N", n, "particle count");
    ctsim->add_option("--horizon", horizon, "time horizon");
    ctsim->add_option("--mode", mode_name, "individual|population|thinned");
    ctsim->add_option("--out", out_dir, "output directory");
    ctsim->add_flag("--events", events, "export the event log");
    add_seed(ctsim);

    auto* verify = app.add_subcommand("verify", "run the full acceptance suite");
    verify->add_option("--seed", seed, "master seed for the suite");
    verify->add_option("--threads", threads, "worker threads");
    verify->add_option("--out", out_dir, "also write the report to <out>/acceptance.txt");
    bool verify_out = false;
    verify->callback([&] { verify_out = verify->count("--out") > 0; });

    CLI11_PARSE(app, argc, argv);

    try {
        if (exact->parsed()) return cmd_exact(model_ref, m, horizon, out_dir);
        if (particle->parsed())
            return cmd_particle(model_ref, case_name, n, m, horizon, seed, out_dir, trace);
        if (sweep->parsed()) {
            auto cfg = load_experiment_config(config_path);
            if (sweep->count("--seed")) cfg.seed = seed;
            if (sweep->count("--out")) cfg.out_dir = out_dir;
            if (sweep->count("--threads")) cfg.threads = threads;
            if (!suite_override.empty()) cfg.suite = suite_override;
            if (cfg.suite.empty()) throw ConfigError("config: suite is required for sweep");
            return cmd_sweep(cfg);
        }
        if (ctsim->parsed())
            return cmd_ctsim(model_ref, case_name, n, horizon, mode_name, seed, out_dir, events);
        if (verify->parsed()) {
            std::uint64_t s = verify->count("--seed") ? seed : acceptance::kDefaultSeed;
            auto results = run_acceptance(s, threads);
            int code = print_acceptance(results, stdout);
            if (verify_out) {
                std::string text;
                char line[512];
                for (const auto& r : results) {
                    std::snprintf(line, sizeof line, "[%2d/12] %s %s (%.2f s) %s\n", r.id,
                                  r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                                  r.detail.c_str());
                    text += line;
                }
                write_file(out_dir, "acceptance.txt", text);
            }
            return code;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const Error& e) {
        std::fprintf(stderr, "model error: %s\n", e.what());
        return kExitConfigError;
    }
    return kExitConfigError;
}
