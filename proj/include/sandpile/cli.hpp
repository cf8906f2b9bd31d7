#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sandpile/chains.hpp"
#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/io.hpp"
#include "sandpile/oracle.hpp"
#include "sandpile/sampler.hpp"
#include "sandpile/stats.hpp"
#include "sandpile/verification.hpp"

namespace sandpile {

// complete:N | path:N | cycle:N | star:N | grid:WxH | file:PATH
inline GraphTopology parse_graph_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw BadParameter("graph spec needs the form family:arg, got \"" + spec + "\"");
    const std::string family = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    const auto as_int = [&](const std::string& s) {
        try {
            return std::stoi(s);
        } catch (const std::exception&) {
            throw BadParameter("bad number \"" + s + "\" in graph spec \"" + spec + "\"");
        }
    };
    if (family == "complete") return complete_graph(as_int(arg));
    if (family == "path") return path_graph(as_int(arg));
    if (family == "cycle") return cycle_graph(as_int(arg));
    if (family == "star") return star_graph(as_int(arg));
    if (family == "grid") {
        const auto x = arg.find('x');
        if (x == std::string::npos) throw BadParameter("grid spec needs WxH");
        return grid_graph(as_int(arg.substr(0, x)), as_int(arg.substr(x + 1)));
    }
    if (family == "file") return load_graph(arg);
    throw BadParameter("unknown graph family \"" + family + "\"");
}

namespace cli_detail {

inline size_t state_cap_from_env() {
    if (const char* cap = std::getenv("SANDPILE_STATE_CAP")) {
        try {
            const long long v = std::stoll(cap);
            if (v < 1) throw BadParameter("SANDPILE_STATE_CAP must be positive");
            return static_cast<size_t>(v);
        } catch (const std::exception&) {
            throw BadParameter("cannot parse SANDPILE_STATE_CAP");
        }
    }
    return kDefaultStateCap;
}

inline void write_output(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw BadParameter("cannot open output file " + path);
    fn(out);
}

// {n, edges} straight from a JSON file, without connectivity validation;
// the collapse helper accepts graphs that only become valid afterwards.
inline std::pair<int, EdgeList> load_raw_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BadParameter("cannot open graph file " + path);
    json j;
    in >> j;
    EdgeList edges;
    for (const auto& e : j.at("edges"))
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return {j.at("n").get<int>(), edges};
}

} // namespace cli_detail

// Exit codes: 0 success, 1 verification failure, 2 usage or validation
// error. args excludes the program name.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"stochastic sandpile laboratory: exact sampling, driven chains, exact "
                 "small-instance oracles, and statistical checks"};
    app.require_subcommand(1);

    // ---- validate ----------------------------------------------------
    std::string validate_graph;
    std::string validate_out;
    std::vector<int> collapse_ids;
    auto* validate = app.add_subcommand("validate", "parse and validate a graph spec");
    validate->add_option("--graph", validate_graph, "graph spec")->required();
    validate->add_option("--collapse", collapse_ids,
                         "vertex ids to merge into the sink (file: specs are read raw)")
        ->delimiter(',');
    validate->add_option("--out", validate_out, "output file (default stdout)");

    // ---- sample ------------------------------------------------------
    std::string sample_graph;
    int sample_threshold = 2;
    uint64_t sample_seed = 0;
    int64_t sample_reps = 1;
    int sample_workers = 1;
    std::string sample_out;
    auto* sample = app.add_subcommand("sample", "exact stationary samples (histogram or config)");
    sample->add_option("--graph", sample_graph, "graph spec")->required();
    sample->add_option("--threshold", sample_threshold, "instability threshold k")
        ->check(CLI::Range(2, 64));
    sample->add_option("--seed", sample_seed, "master seed")->required();
    sample->add_option("--reps", sample_reps, "number of replicas")->check(CLI::PositiveNumber);
    sample->add_option("--workers", sample_workers, "worker threads")->check(CLI::PositiveNumber);
    sample->add_option("--out", sample_out, "output file (default stdout)");

    // ---- drive -------------------------------------------------------
    int64_t drive_complete = 0;
    std::string drive_graph;
    int drive_threshold = 2;
    int64_t drive_steps = 0;
    int64_t drive_burnin = 0;
    int64_t drive_init = 0;
    int64_t drive_record = 1;
    uint64_t drive_seed = 0;
    bool drive_force_general = false;
    bool drive_add_on_v = false;
    std::string drive_out;
    auto* drv = app.add_subcommand("drive", "driven-dissipative chain trace");
    auto* drive_complete_opt =
        drv->add_option("--complete", drive_complete, "complete graph size N")
            ->check(CLI::Range(int64_t{2}, int64_t{100'000'000}));
    drv->add_option("--graph", drive_graph, "graph spec (general path)")
        ->excludes(drive_complete_opt);
    drv->add_option("--threshold", drive_threshold, "instability threshold k")
        ->check(CLI::Range(2, 64));
    drv->add_option("--steps", drive_steps, "total steps")->required()
        ->check(CLI::PositiveNumber);
    drv->add_option("--burnin", drive_burnin, "steps discarded before recording")
        ->check(CLI::NonNegativeNumber);
    drv->add_option("--init", drive_init, "initial particle count")
        ->check(CLI::NonNegativeNumber);
    drv->add_option("--record-every", drive_record, "record every n-th step")
        ->check(CLI::PositiveNumber);
    drv->add_option("--seed", drive_seed, "master seed")->required();
    drv->add_flag("--general", drive_force_general,
                  "force the general-graph dynamics instead of the microscopic chain");
    drv->add_flag("--add-on-v-only", drive_add_on_v,
                  "add particles on V only (general path; same stationary law)");
    drv->add_option("--out", drive_out, "output file (default stdout)");

    // ---- micro -------------------------------------------------------
    int64_t micro_n = 0;
    int64_t micro_x0 = 0;
    int64_t micro_y0 = 0;
    int64_t micro_reps = 1;
    uint64_t micro_seed = 0;
    std::string micro_out;
    auto* micro = app.add_subcommand("micro", "microscopic chain runs to absorption");
    micro->add_option("--n", micro_n, "system size N")->required()
        ->check(CLI::PositiveNumber);
    micro->add_option("--x0", micro_x0, "initial total particles")->required();
    micro->add_option("--y0", micro_y0, "initial active particles")->required();
    micro->add_option("--reps", micro_reps, "number of runs")->check(CLI::PositiveNumber);
    micro->add_option("--seed", micro_seed, "master seed")->required();
    micro->add_option("--out", micro_out, "output file (default stdout)");

    // ---- oracle ------------------------------------------------------
    std::string oracle_target;
    std::string oracle_graph;
    int oracle_threshold = 2;
    int64_t oracle_n = 0;
    int64_t oracle_x0 = 0;
    int64_t oracle_y0 = 0;
    std::string oracle_out;
    auto* oracle = app.add_subcommand("oracle", "exact small-instance computations");
    oracle->add_option("target", oracle_target, "what to compute")
        ->required()
        ->check(CLI::IsMember({"stationary", "sampler-dist", "micro-absorption", "qmatrix"}));
    oracle->add_option("--graph", oracle_graph, "graph spec");
    oracle->add_option("--threshold", oracle_threshold, "instability threshold k")
        ->check(CLI::Range(2, 64));
    oracle->add_option("--n", oracle_n, "system size N (micro-absorption)");
    oracle->add_option("--x0", oracle_x0, "initial total particles (micro-absorption)");
    oracle->add_option("--y0", oracle_y0, "initial active particles (micro-absorption)");
    oracle->add_option("--out", oracle_out, "output file (default stdout)");

    // ---- verify ------------------------------------------------------
    std::string verify_test;
    std::string verify_suite = "small";
    std::optional<uint64_t> verify_seed;
    int verify_workers = 2;
    int64_t verify_trials = 0;
    int64_t verify_samples = 0;
    int64_t verify_cases = 0;
    int64_t verify_n = 0;
    int64_t verify_steps = 0;
    int64_t verify_burnin = -1;
    int64_t verify_k = -1;
    int64_t verify_j = -1;
    int64_t verify_horizon = 0;
    int verify_threshold = 0;
    double verify_gamma = 0.7;
    double verify_delta = 0.1;
    auto* verify = app.add_subcommand("verify", "statistical and exact verification checks");
    verify->add_option("test", verify_test, "check name")
        ->required()
        ->check(CLI::IsMember({"exact-sampling", "generic-k-sampling", "abelian", "micro-macro",
                               "density", "drift", "long-jumps", "tau0-tail", "geometric",
                               "generic-k-density", "oracle-mc", "mass-exit", "all"}));
    verify->add_option("--suite", verify_suite, "graph suite (small)")
        ->check(CLI::IsMember({"small"}));
    uint64_t verify_seed_value = 0;
    auto* verify_seed_opt = verify->add_option("--seed", verify_seed_value, "master seed");
    verify->add_option("--workers", verify_workers, "worker threads")
        ->check(CLI::PositiveNumber);
    verify->add_option("--trials", verify_trials, "trial count override");
    verify->add_option("--samples", verify_samples, "sample count override (oracle-mc)");
    verify->add_option("--cases", verify_cases, "case count override (abelian)");
    verify->add_option("--n", verify_n, "system size override");
    verify->add_option("--steps", verify_steps, "drive steps override");
    verify->add_option("--burnin", verify_burnin, "drive burn-in override");
    verify->add_option("--k", verify_k, "initial particle count override (tau0-tail)");
    verify->add_option("--j", verify_j, "initial active count override (tau0-tail)");
    verify->add_option("--horizon", verify_horizon, "survival horizon override (tau0-tail)");
    verify->add_option("--threshold", verify_threshold, "threshold override (generic-k-density)");
    verify->add_option("--gamma", verify_gamma, "density parameter (mass-exit)");
    verify->add_option("--delta", verify_delta, "exit fraction parameter (mass-exit)");
    std::string verify_out;
    verify->add_option("--out", verify_out, "output file (default stdout)");

    std::vector<std::string> argv_like = args;
    argv_like.insert(argv_like.begin(), "sandpile");
    std::vector<const char*> argv;
    argv.reserve(argv_like.size());
    for (const auto& a : argv_like) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (verify_seed_opt->count() > 0) verify_seed = verify_seed_value;

    try {
        const size_t state_cap = cli_detail::state_cap_from_env();

        if (validate->parsed()) {
            if (!collapse_ids.empty()) {
                std::pair<int, EdgeList> raw;
                if (validate_graph.rfind("file:", 0) == 0) {
                    raw = cli_detail::load_raw_graph(validate_graph.substr(5));
                } else {
                    const json j = graph_to_json(parse_graph_spec(validate_graph));
                    raw.first = j.at("n").get<int>();
                    for (const auto& e : j.at("edges"))
                        raw.second.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
                }
                const std::set<int> boundary(collapse_ids.begin(), collapse_ids.end());
                for (int v : boundary)
                    if (v < 0 || v >= raw.first)
                        throw BadParameter("collapse id " + std::to_string(v) +
                                           " is not a non-sink vertex");
                std::vector<int> remap(raw.first + 1);
                int next_id = 0;
                for (int v = 0; v < raw.first; ++v)
                    remap[v] = boundary.count(v) ? -1 : next_id++;
                const int new_n = next_id;
                for (int v = 0; v <= raw.first; ++v)
                    if (v == raw.first || remap[v] < 0) remap[v] = new_n;
                EdgeList collapsed;
                for (const auto& [u, v] : raw.second) {
                    const int cu = remap.at(u);
                    const int cv = remap.at(v);
                    if (cu == new_n && cv == new_n) continue;
                    collapsed.push_back({cu, cv});
                }
                const GraphTopology graph = build_graph(new_n, collapsed);
                cli_detail::write_output(validate_out, [&](std::ostream& out) {
                    out << graph_to_json(graph).dump(2) << "\n";
                });
                return 0;
            }
            const GraphTopology graph = parse_graph_spec(validate_graph);
            json degrees = json::array();
            for (int x = 0; x < graph.vertex_count(); ++x) degrees.push_back(graph.degree(x));
            const json summary = {{"graph", validate_graph},
                                  {"n", graph.vertex_count()},
                                  {"sink", graph.sink()},
                                  {"degrees", degrees},
                                  {"valid", true}};
            cli_detail::write_output(validate_out,
                                     [&](std::ostream& out) { out << summary.dump(2) << "\n"; });
            return 0;
        }

        if (sample->parsed()) {
            const GraphTopology graph = parse_graph_spec(sample_graph);
            const json meta = {{"command", "sample"},
                               {"graph", sample_graph},
                               {"threshold", sample_threshold},
                               {"seed", sample_seed},
                               {"reps", sample_reps},
                               {"workers", sample_workers},
                               {"replica_seeds", "derive_seed(seed, replica_index)"}};
            if (sample_reps == 1) {
                const Config cfg = exact_sample(graph, sample_threshold, derive_seed(sample_seed, 0));
                const json out = {{"meta", meta}, {"config", config_to_json(cfg)}};
                cli_detail::write_output(sample_out,
                                         [&](std::ostream& os) { os << out.dump(2) << "\n"; });
                return 0;
            }
            const auto hist = sample_density(graph, sample_threshold, sample_seed, sample_reps,
                                             sample_workers);
            cli_detail::write_output(sample_out, [&](std::ostream& os) {
                CsvWriter csv(os);
                csv.metadata(meta);
                csv.row({"total_particles", "probability"});
                for (size_t i = 0; i < hist.support.size(); ++i)
                    csv.row({std::to_string(hist.support[i]), format_double(hist.mass[i])});
            });
            return 0;
        }

        if (drv->parsed()) {
            if (drive_complete == 0 && drive_graph.empty())
                throw BadParameter("drive needs --complete N or --graph SPEC");
            const bool micro_path =
                !drive_force_general && drive_threshold == 2 && drive_complete != 0;
            MacroTrace trace;
            std::string resolved_graph;
            if (micro_path) {
                resolved_graph = "complete:" + std::to_string(drive_complete);
                trace = drive(drive_complete, drive_init, drive_steps, drive_burnin,
                              drive_record, drive_seed);
            } else {
                if (drive_complete > 50'000)
                    throw BadParameter("the general path materializes the O(N^2) adjacency; "
                                       "N is capped at 50000 (the microscopic path has no cap)");
                resolved_graph = drive_graph.empty()
                                     ? "complete:" + std::to_string(drive_complete)
                                     : drive_graph;
                const GraphTopology graph = parse_graph_spec(resolved_graph);
                trace = drive_general(graph, drive_threshold, drive_init, drive_steps,
                                      drive_burnin, drive_record, drive_seed, drive_add_on_v);
            }
            const json meta = {{"command", "drive"},
                               {"graph", resolved_graph},
                               {"threshold", drive_threshold},
                               {"path", micro_path ? "microscopic" : "general"},
                               {"steps", drive_steps},
                               {"burnin", drive_burnin},
                               {"init", drive_init},
                               {"record_every", drive_record},
                               {"add_on_v_only", drive_add_on_v},
                               {"seed", drive_seed}};
            cli_detail::write_output(drive_out, [&](std::ostream& os) {
                CsvWriter csv(os);
                csv.metadata(meta);
                csv.row({"step", "xi", "sink_exits"});
                for (size_t i = 0; i < trace.step.size(); ++i)
                    csv.row({std::to_string(trace.step[i]), std::to_string(trace.xi[i]),
                             std::to_string(trace.sink_exits_per_step[i])});
            });
            return 0;
        }

        if (micro->parsed()) {
            check_micro_state({micro_x0, micro_y0, micro_n});
            const json meta = {{"command", "micro"},     {"n", micro_n},
                               {"x0", micro_x0},         {"y0", micro_y0},
                               {"reps", micro_reps},     {"seed", micro_seed},
                               {"run_seeds", "derive_seed(seed, rep)"}};
            cli_detail::write_output(micro_out, [&](std::ostream& os) {
                CsvWriter csv(os);
                csv.metadata(meta);
                csv.row({"rep", "tau0", "x_final", "sink_exits", "peak_y"});
                for (int64_t rep = 0; rep < micro_reps; ++rep) {
                    SplitMix64 rng(derive_seed(micro_seed, static_cast<uint64_t>(rep)));
                    const MicroRun run = micro_run_to_absorption({micro_x0, micro_y0, micro_n}, rng);
                    csv.row({std::to_string(rep), std::to_string(run.tau0),
                             std::to_string(run.final.x), std::to_string(run.sink_exits),
                             std::to_string(run.peak_y)});
                }
            });
            return 0;
        }

        if (oracle->parsed()) {
            json meta = {{"command", "oracle"}, {"target", oracle_target},
                         {"state_cap", state_cap}};
            json body;
            if (oracle_target == "micro-absorption") {
                if (oracle_n == 0)
                    throw BadParameter("micro-absorption needs --n, --x0, --y0");
                meta["n"] = oracle_n;
                meta["x0"] = oracle_x0;
                meta["y0"] = oracle_y0;
                body = distribution_to_json(
                    micro_absorption_distribution(oracle_n, oracle_x0, oracle_y0, state_cap));
            } else {
                if (oracle_graph.empty()) throw BadParameter("this oracle target needs --graph");
                const GraphTopology graph = parse_graph_spec(oracle_graph);
                meta["graph"] = oracle_graph;
                meta["threshold"] = oracle_threshold;
                if (oracle_target == "stationary") {
                    body = distribution_to_json(
                        stationary_distribution(transition_matrix(graph, oracle_threshold, state_cap)),
                        oracle_threshold);
                } else if (oracle_target == "sampler-dist") {
                    body = distribution_to_json(
                        sampler_distribution(graph, oracle_threshold, state_cap), oracle_threshold);
                } else { // qmatrix
                    const TransitionMatrix tm = transition_matrix(graph, oracle_threshold, state_cap);
                    json states = json::array();
                    for (const auto& key : tm.states) {
                        const Config cfg = key_to_config(key, oracle_threshold);
                        states.push_back(json{{"eta", cfg.eta}, {"h", cfg.h_residue}});
                    }
                    json rows = json::array();
                    for (int i = 0; i < tm.size(); ++i) {
                        json row = json::array();
                        for (int j = 0; j < tm.size(); ++j) row.push_back(tm.at(i, j));
                        rows.push_back(row);
                    }
                    body = json{{"states", states}, {"q", rows}};
                }
            }
            const json out = {{"meta", meta}, {"result", body}};
            cli_detail::write_output(oracle_out,
                                     [&](std::ostream& os) { os << out.dump(2) << "\n"; });
            return 0;
        }

        if (verify->parsed()) {
            const std::set<std::string> deterministic = {"exact-sampling", "generic-k-sampling",
                                                         "micro-macro"};
            if (!deterministic.count(verify_test) && !verify_seed.has_value())
                throw BadParameter("verify " + verify_test + " is randomized and needs --seed");
            const uint64_t seed = verify_seed.value_or(0);
            const auto or_default = [](int64_t value, int64_t fallback) {
                return value > 0 ? value : fallback;
            };

            std::vector<CheckResult> results;
            const auto want = [&](const std::string& name) {
                return verify_test == "all" || verify_test == name;
            };
            if (want("exact-sampling")) results.push_back(check_exact_sampling(2, 3));
            if (want("generic-k-sampling")) results.push_back(check_exact_sampling(3, 2));
            if (want("abelian"))
                results.push_back(check_abelian(or_default(verify_cases, 1000),
                                                derive_seed(seed, 3)));
            if (want("micro-macro")) results.push_back(check_micro_macro(5));
            if (want("density"))
                results.push_back(check_density(or_default(verify_n, 1000),
                                                or_default(verify_steps, 120'000),
                                                verify_burnin >= 0 ? verify_burnin : 20'000,
                                                derive_seed(seed, 5)));
            if (want("drift"))
                results.push_back(check_drift(or_default(verify_n, 2000),
                                              or_default(verify_trials, 10'000),
                                              derive_seed(seed, 6), verify_workers));
            if (want("long-jumps"))
                results.push_back(check_long_jumps(or_default(verify_n, 1000),
                                                   or_default(verify_trials, 100'000),
                                                   derive_seed(seed, 7), verify_workers));
            if (want("tau0-tail"))
                results.push_back(check_tau0_tail(
                    or_default(verify_n, 1000), verify_k > 0 ? verify_k : 300,
                    verify_j > 0 ? verify_j : 1, or_default(verify_horizon, 100),
                    or_default(verify_trials, 100'000), derive_seed(seed, 8), verify_workers));
            if (want("geometric"))
                results.push_back(check_geometric(or_default(verify_n, 2000),
                                                  or_default(verify_trials, 100'000),
                                                  derive_seed(seed, 9), verify_workers));
            if (want("generic-k-density"))
                results.push_back(check_generic_density(
                    or_default(verify_n, 1000), verify_threshold > 0 ? verify_threshold : 3,
                    or_default(verify_steps, 120'000),
                    verify_burnin >= 0 ? verify_burnin : 20'000, derive_seed(seed, 10)));
            if (want("oracle-mc"))
                results.push_back(check_oracle_monte_carlo(or_default(verify_samples, 1'000'000),
                                                           derive_seed(seed, 11), verify_workers));
            if (verify_test == "mass-exit")
                results.push_back(check_mass_exit(or_default(verify_n, 2000), verify_gamma,
                                                  verify_delta, or_default(verify_trials, 10'000),
                                                  derive_seed(seed, 12), verify_workers));
            if (results.empty()) throw BadParameter("no check selected");

            bool failed = false;
            json report = json::array();
            for (const auto& result : results) {
                json entry = result.to_json();
                if (verify_seed.has_value()) entry["parameters"]["master_seed"] = seed;
                entry["parameters"]["workers"] = verify_workers;
                report.push_back(entry);
                if (!result.pass && !result.exploratory) failed = true;
            }
            cli_detail::write_output(verify_out, [&](std::ostream& os) {
                os << (results.size() == 1 ? report[0].dump(2) : report.dump(2)) << "\n";
            });
            return failed ? 1 : 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace sandpile
