#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

// State of the microscopic chain on the complete graph with self-loops and
// N = n slots per jump: x is the total particle count, y the active count.
// Admissible states satisfy 0 <= y <= x and x - y <= n - 1 (there are only
// n - 1 non-sink sites to hold sleeping particles).
struct MicroState {
    int64_t x = 0;
    int64_t y = 0;
    int64_t n = 1;
};

inline bool micro_state_valid(const MicroState& s) {
    return s.n >= 1 && s.y >= 0 && s.y <= s.x && s.x - s.y <= s.n - 1;
}

inline void check_micro_state(const MicroState& s) {
    if (!micro_state_valid(s))
        throw InvalidState("microscopic state (x=" + std::to_string(s.x) + ", y=" +
                           std::to_string(s.y) + ", n=" + std::to_string(s.n) +
                           ") outside the state space");
}

// One jump of an active particle: to the sink with probability 1/N, onto a
// sleeping particle with probability (x-y)/N, asleep onto a site without
// sleepers otherwise. States with y = 0 are absorbing.
inline MicroState micro_step(const MicroState& s, SplitMix64& rng) {
    check_micro_state(s);
    if (s.y == 0) return s;
    const auto z = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(s.n)));
    if (z == 0) return {s.x - 1, s.y - 1, s.n};
    if (z <= s.x - s.y) return {s.x, s.y + 1, s.n};
    return {s.x, s.y - 1, s.n};
}

struct MicroRun {
    MicroState final;
    int64_t tau0 = 0;       // first time y = 0
    int64_t sink_exits = 0; // particles absorbed at the sink (= x0 - final.x)
    int64_t peak_y = 0;     // max active count over the run, start included
};

inline MicroRun micro_run_to_absorption(const MicroState& start, SplitMix64& rng,
                                        uint64_t step_cap = kDefaultStepCap) {
    check_micro_state(start);
    MicroRun run;
    run.peak_y = start.y;
    int64_t x = start.x;
    int64_t y = start.y;
    const auto n = static_cast<uint64_t>(start.n);
    uint64_t steps = 0;
    while (y > 0) {
        if (++steps > step_cap)
            throw StepCapExceeded("microscopic chain ran past " + std::to_string(step_cap) +
                                  " steps without absorbing");
        const auto z = static_cast<int64_t>(rng.next_below(n));
        if (z == 0) {
            --x;
            --y;
            ++run.sink_exits;
        } else if (z <= x - y) {
            ++y;
            if (y > run.peak_y) run.peak_y = y;
        } else {
            --y;
        }
    }
    run.final = {x, 0, start.n};
    run.tau0 = static_cast<int64_t>(steps);
    return run;
}

// One step of the macroscopic chain on the complete graph, simulated
// through the microscopic chain started at (xi + 1, 1): the added particle
// behaves as one active particle coming from the configuration itself
// (this is why the chain adds on V united with the sink). O(tau0) time,
// O(1) space, never materializes the graph.
inline int64_t macro_step_complete(int64_t xi, int64_t n, SplitMix64& rng,
                                   uint64_t step_cap = kDefaultStepCap) {
    if (n < 1 || xi < 0 || xi > n - 1)
        throw BadParameter("particle count " + std::to_string(xi) +
                           " outside {0,...,N-1} for N=" + std::to_string(n));
    return micro_run_to_absorption({xi + 1, 1, n}, rng, step_cap).final.x;
}

// Recorded trajectory of the macroscopic chain. sink_exits_per_step holds
// 1 - delta(xi) for each recorded step: the number of particles that left
// the system during that step, counting an addition at the sink itself as
// an immediate exit.
struct MacroTrace {
    int64_t n = 0;
    int64_t initial_xi = 0;
    uint64_t seed = 0;
    int64_t burnin = 0;
    int64_t record_every = 1;
    std::vector<int64_t> step;
    std::vector<int64_t> xi;
    std::vector<int64_t> sink_exits_per_step;
};

// Drives the complete-graph chain from xi0 = initial for `steps` steps,
// recording every record_every-th step after the burn-in.
inline MacroTrace drive(int64_t n, int64_t initial, int64_t steps, int64_t burnin,
                        int64_t record_every, uint64_t seed,
                        uint64_t step_cap = kDefaultStepCap) {
    if (record_every < 1) throw BadParameter("record_every must be >= 1");
    if (steps < 0 || burnin < 0) throw BadParameter("steps and burnin must be >= 0");
    MacroTrace trace;
    trace.n = n;
    trace.initial_xi = initial;
    trace.seed = seed;
    trace.burnin = burnin;
    trace.record_every = record_every;
    SplitMix64 rng(seed);
    int64_t xi = initial;
    for (int64_t t = 1; t <= steps; ++t) {
        const int64_t next = macro_step_complete(xi, n, rng, step_cap);
        const int64_t exits = 1 + xi - next;
        xi = next;
        if (t > burnin && (t - burnin) % record_every == 0) {
            trace.step.push_back(t);
            trace.xi.push_back(xi);
            trace.sink_exits_per_step.push_back(exits);
        }
    }
    return trace;
}

struct MacroStepResult {
    Config config;
    StabilizationReport report;
    int added_vertex = -1; // graph.sink() when the lazy branch was taken
};

// One step of the driven-dissipative chain on an arbitrary graph: add a
// particle at a vertex uniform on V united with the sink (a sink draw is a
// lazy step), then stabilize with a fresh instruction stream. Works for
// any threshold; stabilizing from zero residues always returns to zero
// residues, so a fresh stream per step is exact.
inline MacroStepResult macro_step_general(const GraphTopology& graph, const Config& cfg,
                                          SplitMix64& rng, bool add_on_v_only = false,
                                          OrderPolicy policy = OrderPolicy::lowest_index(),
                                          uint64_t step_cap = kDefaultStepCap) {
    validate_config(graph, cfg);
    if (!is_stable(cfg))
        throw BadParameter("macroscopic step requires a stable configuration");
    const int n = graph.vertex_count();
    const auto slots = static_cast<uint64_t>(add_on_v_only ? n : n + 1);
    const int vertex = static_cast<int>(rng.next_below(slots));

    MacroStepResult result;
    result.added_vertex = vertex;
    if (vertex == graph.sink()) {
        result.config = cfg;
        result.report.final = cfg;
        result.report.odometer.assign(n, 0);
        return result;
    }

    Config next = cfg;
    ++next.eta[vertex];
    InstructionStream stream(graph, rng.next());
    result.report = stabilize(graph, std::move(next), stream, policy, step_cap);
    result.config = result.report.final;
    return result;
}

// Drives the general-graph chain, recording total particle counts. The
// sink_exits_per_step column counts stabilization exits only (an addition
// at the sink contributes zero).
inline MacroTrace drive_general(const GraphTopology& graph, int threshold, int64_t initial,
                                int64_t steps, int64_t burnin, int64_t record_every,
                                uint64_t seed, bool add_on_v_only = false,
                                uint64_t step_cap = kDefaultStepCap) {
    if (record_every < 1) throw BadParameter("record_every must be >= 1");
    if (steps < 0 || burnin < 0) throw BadParameter("steps and burnin must be >= 0");
    const int n = graph.vertex_count();
    if (initial < 0 || initial > static_cast<int64_t>(n) * (threshold - 1))
        throw BadParameter("initial count not representable as a stable configuration");

    // Spread `initial` particles as a stable configuration.
    Config cfg = make_config(graph, threshold);
    int64_t remaining = initial;
    for (int x = 0; x < n && remaining > 0; ++x) {
        const auto put = std::min<int64_t>(threshold - 1, remaining);
        cfg.eta[x] = static_cast<int>(put);
        remaining -= put;
    }

    MacroTrace trace;
    trace.n = n + 1;
    trace.initial_xi = initial;
    trace.seed = seed;
    trace.burnin = burnin;
    trace.record_every = record_every;
    SplitMix64 rng(seed);
    for (int64_t t = 1; t <= steps; ++t) {
        MacroStepResult step = macro_step_general(graph, cfg, rng, add_on_v_only,
                                                  OrderPolicy::lowest_index(), step_cap);
        cfg = std::move(step.config);
        if (t > burnin && (t - burnin) % record_every == 0) {
            trace.step.push_back(t);
            trace.xi.push_back(total_particles(cfg));
            trace.sink_exits_per_step.push_back(step.report.sink_exits);
        }
    }
    return trace;
}

} // namespace sandpile
