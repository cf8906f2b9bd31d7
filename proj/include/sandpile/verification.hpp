#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sandpile/chains.hpp"
#include "sandpile/distribution.hpp"
#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/io.hpp"
#include "sandpile/oracle.hpp"
#include "sandpile/parallel.hpp"
#include "sandpile/rng.hpp"
#include "sandpile/sampler.hpp"
#include "sandpile/stats.hpp"

namespace sandpile {

struct SuiteGraph {
    std::string name;
    GraphTopology graph;
};

// All path/cycle/complete/star topologies with up to max_vertices non-sink
// vertices (complete:N has N-1 of them). star:n below 3 vertices repeats
// path:n and is skipped.
inline std::vector<SuiteGraph> sampling_suite(int max_vertices) {
    std::vector<SuiteGraph> suite;
    for (int n = 1; n <= max_vertices; ++n) {
        suite.push_back({"path:" + std::to_string(n), path_graph(n)});
        suite.push_back({"cycle:" + std::to_string(n), cycle_graph(n)});
        suite.push_back({"complete:" + std::to_string(n + 1), complete_graph(n + 1)});
        if (n >= 3) suite.push_back({"star:" + std::to_string(n), star_graph(n)});
    }
    return suite;
}

struct CheckResult {
    std::string name;
    json parameters;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    bool exploratory = false;
    uint64_t seed = 0;
    std::string detail;

    json to_json() const {
        return json{{"test", name},         {"parameters", parameters},
                    {"statistic", statistic}, {"threshold", threshold},
                    {"pass", pass},         {"exploratory", exploratory},
                    {"seed", seed},         {"detail", detail}};
    }
};

// Criterion: exact sampling reproduces the stationary law. For each suite
// graph, the exact output law of the sampler must equal the stationary
// distribution of the driven chain. Fully deterministic (oracle only).
inline CheckResult check_exact_sampling(int threshold, int max_vertices) {
    CheckResult result;
    result.name = threshold == 2 ? "exact-sampling" : "generic-k-sampling";
    result.parameters = {{"threshold", threshold}, {"max_vertices", max_vertices}};
    result.threshold = 1e-10;
    double worst = 0.0;
    std::ostringstream detail;
    for (const auto& [name, graph] : sampling_suite(max_vertices)) {
        const auto sampled = sampler_distribution(graph, threshold);
        const auto stationary = stationary_distribution(transition_matrix(graph, threshold));
        const double tv = tv_distance(sampled, stationary);
        worst = std::max(worst, tv);
        detail << name << " tv=" << tv << "; ";
    }
    result.statistic = worst;
    result.pass = worst < result.threshold;

    if (threshold == 2) {
        // hand-verifiable anchor: on the one-vertex complete graph the
        // stationary law is (1/4, 3/4)
        const auto pi = stationary_distribution(transition_matrix(complete_graph(2), 2));
        const bool anchor = pi.support.size() == 2 && std::abs(pi.mass[0] - 0.25) < 1e-12 &&
                            std::abs(pi.mass[1] - 0.75) < 1e-12;
        detail << "anchor pi(G_2)=(1/4,3/4): " << (anchor ? "ok" : "FAILED");
        result.pass = result.pass && anchor;
    }
    result.detail = detail.str();
    return result;
}

// Criterion: Abelian property. Randomized graphs, configurations, and
// instruction streams; all schedules must give identical outcomes.
inline CheckResult check_abelian(int64_t cases, uint64_t seed) {
    CheckResult result;
    result.name = "abelian";
    result.parameters = {{"cases", cases}, {"max_vertices", 6}, {"max_particles", 8}};
    result.seed = seed;
    result.threshold = 0.5; // zero mismatches or exceptions allowed
    int64_t failures = 0;
    SplitMix64 rng(seed);
    for (int64_t round = 0; round < cases; ++round) {
        try {
            const int n = 1 + static_cast<int>(rng.next_below(6));
            EdgeList edges;
            for (int v = 0; v < n; ++v) {
                const int hi = v + 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - v)));
                edges.push_back({v, hi});
            }
            const auto extra = rng.next_below(static_cast<uint64_t>(n) + 2);
            for (uint64_t e = 0; e < extra; ++e)
                edges.push_back({static_cast<int>(rng.next_below(static_cast<uint64_t>(n))),
                                 static_cast<int>(rng.next_below(static_cast<uint64_t>(n) + 1))});
            const GraphTopology graph = build_graph(n, edges);

            const int threshold = 2 + static_cast<int>(rng.next_below(3));
            Config cfg = make_config(graph, threshold);
            const auto particles = rng.next_below(9);
            for (uint64_t p = 0; p < particles; ++p)
                ++cfg.eta[rng.next_below(static_cast<uint64_t>(n))];
            for (int x = 0; x < n; ++x)
                cfg.h_residue[x] = static_cast<int>(rng.next_below(static_cast<uint64_t>(threshold)));

            const InstructionStream stream(graph, rng.next());
            const auto a = stabilize(graph, cfg, stream, OrderPolicy::lowest_index());
            const auto b = stabilize(graph, cfg, stream, OrderPolicy::fifo_queue());
            const auto c = stabilize(graph, cfg, stream, OrderPolicy::uniform_random(rng.next()));
            const bool same = a.final.eta == b.final.eta && a.final.eta == c.final.eta &&
                              a.final.h_residue == b.final.h_residue &&
                              a.final.h_residue == c.final.h_residue &&
                              a.odometer == b.odometer && a.odometer == c.odometer &&
                              a.sink_exits == b.sink_exits && a.sink_exits == c.sink_exits;
            if (!same) ++failures;
        } catch (const std::exception&) {
            ++failures;
        }
    }
    result.statistic = static_cast<double>(failures);
    result.pass = failures == 0;
    result.detail = std::to_string(cases) + " cases, " + std::to_string(failures) + " failures";
    return result;
}

// Criterion: micro/macro identity. The exact one-step law of the
// general-graph chain on the complete graph equals the absorption law of
// the microscopic chain from (k+1, 1), and also its one-jump expansion
// through (k+1, 2). Deterministic.
inline CheckResult check_micro_macro(int max_n) {
    CheckResult result;
    result.name = "micro-macro";
    result.parameters = {{"n_values", json::array()}};
    for (int n = 2; n <= max_n; ++n) result.parameters["n_values"].push_back(n);
    result.threshold = 1e-10;
    double worst = 0.0;
    std::ostringstream detail;
    for (int n = 2; n <= max_n; ++n) {
        const GraphTopology graph = complete_graph(n);
        for (int k = 0; k <= n - 1; ++k) {
            Config from = make_config(graph, 2);
            for (int x = 0; x < k; ++x) from.eta[x] = 1;
            const auto macro = macro_step_count_distribution(graph, from);
            const auto micro = micro_absorption_distribution(n, k + 1, 1);
            worst = std::max(worst, tv_distance(macro, micro));

            if (k >= 1) {
                // one-jump expansion: sink, empty site, or collision into
                // a two-active-particle stabilization
                std::map<int64_t, double> accum;
                accum[k] += 1.0 / n;
                accum[k + 1] += static_cast<double>(n - 1 - k) / n;
                const auto collided = micro_absorption_distribution(n, k + 1, 2);
                for (size_t i = 0; i < collided.support.size(); ++i)
                    accum[collided.support[i]] += static_cast<double>(k) / n * collided.mass[i];
                const auto expanded = finalize_distribution(std::move(accum));
                worst = std::max(worst, tv_distance(macro, expanded));
            }
        }
        detail << "N=" << n << " ok; ";
    }
    result.statistic = worst;
    result.pass = worst < result.threshold;
    result.detail = detail.str();
    return result;
}

// Criterion: stationary density concentrates at 1/2 at desk scale, from
// both extreme starts.
inline CheckResult check_density(int64_t n, int64_t steps, int64_t burnin, uint64_t seed) {
    CheckResult result;
    result.name = "density";
    result.parameters = {{"n", n},        {"steps", steps},       {"burnin", burnin},
                         {"eps", 0.1},    {"mean_band", {0.47, 0.53}},
                         {"escape_threshold", 1e-3}};
    result.seed = seed;
    result.threshold = 1e-3;
    const ConcentrationReport report = concentration_check(n, steps, burnin, 0.1, seed);
    const double worst_escape =
        std::max(report.from_empty.escape_fraction, report.from_full.escape_fraction);
    const bool means_ok = report.from_empty.mean_density >= 0.47 &&
                          report.from_empty.mean_density <= 0.53 &&
                          report.from_full.mean_density >= 0.47 &&
                          report.from_full.mean_density <= 0.53;
    result.statistic = worst_escape;
    result.pass = worst_escape < 1e-3 && means_ok;
    std::ostringstream detail;
    detail << "mean density from empty " << report.from_empty.mean_density << ", from full "
           << report.from_full.mean_density << ", worst escape fraction " << worst_escape;
    if (n <= 4000) {
        const double exact =
            mean_of(complete_graph_count_stationary(n)) / static_cast<double>(n);
        result.parameters["exact_mean_density"] = exact;
        detail << " [exact stationary mean density at this N is " << exact
               << "; the finite-size offset off 1/2 decays like ~N^(-1/3)]";
    }
    result.detail = detail.str();
    return result;
}

// Criterion: one-step drift is positive below density 1/2 and negative
// above, with 99% confidence intervals excluding zero, and matches the
// closed form (N-1)/N at density zero.
inline CheckResult check_drift(int64_t n, int64_t trials, uint64_t seed, int workers) {
    CheckResult result;
    result.name = "drift";
    result.parameters = {{"n", n},
                         {"trials", trials},
                         {"positive_grid", {0.1, 0.2, 0.3, 0.4}},
                         {"negative_grid", {0.6, 0.7, 0.8, 0.9}}};
    result.seed = seed;
    result.threshold = 0.0;
    const std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9};
    const auto points = drift_profile(n, grid, trials, seed, workers);

    double min_margin = 1e300;
    std::ostringstream detail;
    for (const auto& point : points) {
        double margin = 0.0;
        if (point.density == 0.0) {
            // closed form (N-1)/N, allowed 3 standard errors
            const double se = point.ci99_half_width / kZ99;
            const double expected = static_cast<double>(n - 1) / static_cast<double>(n);
            margin = 3.0 * se - std::abs(point.mean_delta - expected);
        } else if (point.density < 0.5) {
            margin = point.mean_delta - point.ci99_half_width;
        } else {
            margin = -point.mean_delta - point.ci99_half_width;
        }
        min_margin = std::min(min_margin, margin);
        detail << "rho=" << point.density << " mean=" << point.mean_delta << "+-"
               << point.ci99_half_width << "; ";
    }
    result.statistic = min_margin;
    result.pass = min_margin > 0.0;
    result.detail = detail.str();
    return result;
}

// Criterion: long backward jumps from density 0.4 below 0.2N never show
// up at desk scale.
inline CheckResult check_long_jumps(int64_t n, int64_t trials, uint64_t seed, int workers) {
    CheckResult result;
    result.name = "long-jumps";
    result.parameters = {{"n", n}, {"gamma", 0.4}, {"beta", 0.2}, {"trials", trials}};
    result.seed = seed;
    result.threshold = 0.5;
    const EventProbe probe = long_jump_probability(n, 0.4, 0.2, trials, seed, workers);
    result.statistic = static_cast<double>(probe.events);
    result.pass = probe.events == 0;
    result.detail = std::to_string(probe.events) + " events in " + std::to_string(trials) +
                    " trials from k=" + std::to_string(probe.k);
    return result;
}

// Criterion: stabilization time has an exponentially decaying tail. The
// log-survival slope is fitted past n = 4j/(1-2k/N); no rate constant is
// asserted.
inline CheckResult check_tau0_tail(int64_t n, int64_t k, int64_t j, int64_t horizon,
                                   int64_t trials, uint64_t seed, int workers) {
    CheckResult result;
    result.name = "tau0-tail";
    result.parameters = {{"n", n}, {"k", k}, {"j", j}, {"horizon", horizon}, {"trials", trials}};
    result.seed = seed;
    result.threshold = 0.0;
    const SurvivalCurve curve = tau0_tail(n, k, j, horizon, trials, seed, workers);
    const double gamma = static_cast<double>(k) / static_cast<double>(n);
    const auto fit_begin =
        static_cast<int64_t>(std::floor(4.0 * static_cast<double>(j) / (1.0 - 2.0 * gamma))) + 1;
    double slope = 0.0;
    const bool fitted = log_survival_slope(curve, fit_begin, horizon, 30, slope);
    int64_t fit_end = fit_begin;
    while (fit_end + 1 <= horizon &&
           curve.survivors[static_cast<size_t>(fit_end + 1)] >= 30)
        ++fit_end;
    const bool decreasing =
        fitted && curve.survival(fit_end) < curve.survival(fit_begin);
    result.statistic = slope;
    result.pass = fitted && slope < 0.0 && decreasing;
    std::ostringstream detail;
    detail << "log-survival slope " << slope << " over n in [" << fit_begin << ", " << fit_end
           << "], survival " << curve.survival(fit_begin) << " -> " << curve.survival(fit_end);
    result.detail = detail.str();
    return result;
}

// Criterion: 2 - delta(xi) from density 0.3 is stochastically dominated by
// Geometric(2/3), checked on the empirical CDF with a 4-standard-error
// allowance.
inline CheckResult check_geometric(int64_t n, int64_t trials, uint64_t seed, int workers) {
    CheckResult result;
    result.name = "geometric";
    const auto k = static_cast<int64_t>(0.3 * static_cast<double>(n));
    result.parameters = {{"n", n}, {"k", k}, {"trials", trials}, {"geometric_p", 2.0 / 3.0}};
    result.seed = seed;
    result.threshold = 0.0;
    const DominationReport report =
        geometric_domination_check(n, k, trials, 2.0 / 3.0, seed, workers);
    result.statistic = report.worst_margin;
    result.pass = report.dominated;
    std::ostringstream detail;
    detail << "worst CDF margin " << report.worst_margin << " (largest 2-delta observed "
           << report.counts.rbegin()->first << ")";
    result.detail = detail.str();
    return result;
}

// Criterion (exploratory): threshold-3 stationary density against the
// conjectured (k-1)/2 = 1. A miss is reported but does not fail the suite.
inline CheckResult check_generic_density(int64_t n, int threshold, int64_t steps,
                                         int64_t burnin, uint64_t seed) {
    CheckResult result;
    result.name = "generic-k-density";
    result.parameters = {{"n", n}, {"threshold", threshold}, {"steps", steps},
                         {"burnin", burnin}, {"band", 0.05}};
    result.seed = seed;
    result.exploratory = true;
    result.threshold = 0.05;
    const GenericDensityReport report = generic_density_check(n, threshold, steps, burnin, seed);
    result.statistic = std::abs(report.mean_density - report.conjectured_density);
    result.pass = result.statistic <= 0.05;
    std::ostringstream detail;
    detail << "mean density " << report.mean_density << " vs conjectured "
           << report.conjectured_density;
    result.detail = detail.str();
    return result;
}

namespace detail {

template <typename State>
void compare_pointwise(const std::map<State, int64_t>& counts, const Distribution<State>& oracle,
                       int64_t samples, double& max_z, int64_t& extraneous) {
    for (size_t i = 0; i < oracle.support.size(); ++i) {
        const double p = oracle.mass[i];
        int64_t c = 0;
        const auto it = counts.find(oracle.support[i]);
        if (it != counts.end()) c = it->second;
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
        const double diff = std::abs(static_cast<double>(c) / static_cast<double>(samples) - p);
        if (se == 0.0) {
            if (diff != 0.0) max_z = std::max(max_z, 1e300);
        } else {
            max_z = std::max(max_z, diff / se);
        }
    }
    for (const auto& [state, c] : counts)
        if (oracle.mass_of(state) == 0.0 && c > 0) ++extraneous;
}

} // namespace detail

// Criterion: every exact law used above agrees with a large Monte Carlo
// sample pointwise within 4 standard errors: sampler laws on both suites,
// microscopic absorption laws, and general-graph one-step laws.
inline CheckResult check_oracle_monte_carlo(int64_t samples, uint64_t seed, int workers) {
    CheckResult result;
    result.name = "oracle-mc";
    result.parameters = {{"samples", samples}};
    result.seed = seed;
    result.threshold = 4.0;
    double max_z = 0.0;
    int64_t extraneous = 0;
    uint64_t batch = 0;
    std::ostringstream detail;

    // sampler output laws, thresholds 2 and 3
    for (const auto& suite_spec : std::vector<std::pair<int, int>>{{2, 3}, {3, 2}}) {
        const int threshold = suite_spec.first;
        for (const auto& suite_graph : sampling_suite(suite_spec.second)) {
            const GraphTopology& graph = suite_graph.graph;
            const auto oracle = sampler_distribution(graph, threshold);
            const uint64_t batch_seed = derive_seed(seed, batch++);
            std::vector<std::map<ConfigKey, int64_t>> partial(static_cast<size_t>(workers));
            parallel_blocks(samples, workers, [&](int worker, int64_t begin, int64_t end) {
                auto& local = partial[static_cast<size_t>(worker)];
                for (int64_t s = begin; s < end; ++s) {
                    const Config sample = exact_sample(
                        graph, threshold, derive_seed(batch_seed, static_cast<uint64_t>(s)));
                    ++local[config_key(sample)];
                }
            });
            std::map<ConfigKey, int64_t> counts;
            for (const auto& block : partial)
                for (const auto& [key, c] : block) counts[key] += c;
            detail::compare_pointwise(counts, oracle, samples, max_z, extraneous);
        }
    }
    detail << "sampler laws ok to z=" << max_z << "; ";

    // microscopic absorption laws and macroscopic one-step laws
    for (int n = 2; n <= 5; ++n) {
        const GraphTopology graph = complete_graph(n);
        for (int k = 0; k <= n - 1; ++k) {
            const auto micro_oracle = micro_absorption_distribution(n, k + 1, 1);
            uint64_t batch_seed = derive_seed(seed, batch++);
            std::vector<std::map<int64_t, int64_t>> micro_partial(static_cast<size_t>(workers));
            parallel_blocks(samples, workers, [&](int worker, int64_t begin, int64_t end) {
                auto& local = micro_partial[static_cast<size_t>(worker)];
                for (int64_t s = begin; s < end; ++s) {
                    SplitMix64 rng(derive_seed(batch_seed, static_cast<uint64_t>(s)));
                    local[micro_run_to_absorption({k + 1, 1, n}, rng).final.x] += 1;
                }
            });
            std::map<int64_t, int64_t> micro_counts;
            for (const auto& block : micro_partial)
                for (const auto& [v, c] : block) micro_counts[v] += c;
            detail::compare_pointwise(micro_counts, micro_oracle, samples, max_z, extraneous);

            Config from = make_config(graph, 2);
            for (int x = 0; x < k; ++x) from.eta[x] = 1;
            const auto macro_oracle = macro_step_count_distribution(graph, from);
            batch_seed = derive_seed(seed, batch++);
            std::vector<std::map<int64_t, int64_t>> macro_partial(static_cast<size_t>(workers));
            parallel_blocks(samples, workers, [&](int worker, int64_t begin, int64_t end) {
                auto& local = macro_partial[static_cast<size_t>(worker)];
                for (int64_t s = begin; s < end; ++s) {
                    SplitMix64 rng(derive_seed(batch_seed, static_cast<uint64_t>(s)));
                    const auto step = macro_step_general(graph, from, rng);
                    local[total_particles(step.config)] += 1;
                }
            });
            std::map<int64_t, int64_t> macro_counts;
            for (const auto& block : macro_partial)
                for (const auto& [v, c] : block) macro_counts[v] += c;
            detail::compare_pointwise(macro_counts, macro_oracle, samples, max_z, extraneous);
        }
    }
    detail << "micro/macro laws ok to z=" << max_z << "; extraneous states " << extraneous;

    result.statistic = max_z;
    result.pass = max_z <= 4.0 && extraneous == 0;
    result.detail = detail.str();
    return result;
}

// Pooled stability probe for the one-step mass-exit probability: positive
// and seed-stable. Not an acceptance criterion on its own; exposed through
// the verify surface.
inline CheckResult check_mass_exit(int64_t n, double gamma, double delta, int64_t trials,
                                   uint64_t seed, int workers) {
    CheckResult result;
    result.name = "mass-exit";
    result.parameters = {{"n", n}, {"gamma", gamma}, {"delta", delta}, {"trials", trials},
                         {"seeds", 5}};
    result.seed = seed;
    result.threshold = 0.0;
    std::vector<EventProbe> probes;
    double pooled = 0.0;
    for (int s = 0; s < 5; ++s) {
        probes.push_back(mass_exit_probability(n, gamma, delta, trials,
                                               derive_seed(seed, static_cast<uint64_t>(s)),
                                               workers));
        pooled += probes.back().probability;
    }
    pooled /= 5.0;
    bool stable = true;
    double min_probability = 1.0;
    for (const auto& probe : probes) {
        min_probability = std::min(min_probability, probe.probability);
        if (std::abs(probe.probability - pooled) > 2.0 * probe.standard_error) stable = false;
    }
    result.statistic = min_probability;
    result.pass = min_probability > 0.0 && stable;
    std::ostringstream detail;
    detail << "pooled probability " << pooled << ", min over seeds " << min_probability
           << (stable ? ", seed-stable" : ", UNSTABLE across seeds");
    result.detail = detail.str();
    return result;
}

} // namespace sandpile
