#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

// Particle configuration with per-site odometer residues. threshold is the
// instability threshold k (k = 2 is the base model): a site topples k
// particles per full cycle, one half-toppling at a time, and h_residue
// tracks how far through a cycle each site is.
struct Config {
    int threshold = 2;
    std::vector<int> eta;       // particle count per non-sink vertex
    std::vector<int> h_residue; // odometer mod threshold, in [0, k)

    int size() const { return static_cast<int>(eta.size()); }
};

inline Config make_config(const GraphTopology& graph, int threshold) {
    if (threshold < 2) throw BadParameter("threshold must be >= 2");
    Config cfg;
    cfg.threshold = threshold;
    cfg.eta.assign(graph.vertex_count(), 0);
    cfg.h_residue.assign(graph.vertex_count(), 0);
    return cfg;
}

inline void validate_config(const GraphTopology& graph, const Config& cfg) {
    if (cfg.threshold < 2) throw BadParameter("threshold must be >= 2");
    if (cfg.size() != graph.vertex_count() ||
        cfg.h_residue.size() != cfg.eta.size())
        throw BadParameter("configuration size does not match graph");
    for (int x = 0; x < cfg.size(); ++x) {
        if (cfg.eta[x] < 0) throw BadParameter("negative particle count");
        if (cfg.h_residue[x] < 0 || cfg.h_residue[x] >= cfg.threshold)
            throw BadParameter("odometer residue out of [0, k)");
    }
}

inline int64_t total_particles(const Config& cfg) {
    int64_t total = 0;
    for (int count : cfg.eta) total += count;
    return total;
}

// A site is unstable iff it holds a particle and either has a full load
// (eta >= k) or is mid-cycle (residue != 0). For k = 2 this is exactly
// "eta >= 2, or eta = 1 with odd odometer". An empty mid-cycle site is
// stable for now; it resumes its cycle when a particle arrives.
inline bool is_unstable(const Config& cfg, int x) {
    if (x < 0 || x >= cfg.size())
        throw BadIndex("site index " + std::to_string(x) + " out of range");
    const int eta = cfg.eta[x];
    return eta >= 1 && (eta >= cfg.threshold || cfg.h_residue[x] != 0);
}

inline bool is_stable(const Config& cfg) {
    for (int x = 0; x < cfg.size(); ++x)
        if (is_unstable(cfg, x)) return false;
    return true;
}

// Fixed array of jump instructions I^{x,j}, realized lazily: the slot for
// (x, j) is an exactly-uniform pure function of (seed, x, j), so querying
// the same pair always returns the same choice and a second stream built
// from the same seed replays the identical array. Entries at distinct
// (x, j) are decorrelated by the SplitMix64 finalizer. Nothing is
// pre-materialized or cached; recomputation is cheaper than a lookup.
class InstructionStream {
  public:
    InstructionStream(const GraphTopology& graph, uint64_t seed)
        : graph_(&graph), seed_(seed) {}

    uint64_t seed() const { return seed_; }
    const GraphTopology& graph() const { return *graph_; }

    // Adjacency slot chosen at site x's use_index-th half-toppling.
    int slot(int x, uint64_t use_index) const {
        uint64_t h = mix64(seed_ + kGolden * (static_cast<uint64_t>(x) + 1));
        h = mix64(h + kGolden * (use_index + 1));
        SplitMix64 prf(h);
        return static_cast<int>(prf.next_below(static_cast<uint64_t>(graph_->degree(x))));
    }

    // Neighbor (possibly x itself or the sink) the instruction points at.
    int destination(int x, uint64_t use_index) const {
        return graph_->neighbors(x)[slot(x, use_index)];
    }

  private:
    const GraphTopology* graph_;
    uint64_t seed_;
};

// One legal half-toppling at x: the particle jumps to the neighbor named
// by the instruction at (x, h_counter[x]), dies if that is the sink, and
// x's odometer advances. Returns the destination vertex. Throws
// IllegalToppling if x is stable.
inline int half_topple(const GraphTopology& graph, Config& cfg, int x,
                       const InstructionStream& stream,
                       std::vector<uint64_t>& h_counter) {
    graph.check_vertex(x);
    if (!is_unstable(cfg, x))
        throw IllegalToppling("site " + std::to_string(x) + " is stable");
    const int dest = stream.destination(x, h_counter[x]);
    ++h_counter[x];
    cfg.h_residue[x] = (cfg.h_residue[x] + 1) % cfg.threshold;
    --cfg.eta[x];
    if (dest != graph.sink()) ++cfg.eta[dest]; // self-loop: net no-op on eta
    return dest;
}

enum class OrderKind { LowestIndex, FifoQueue, UniformRandom };

// Which unstable site to half-topple next. By the Abelian property the
// stabilization outcome does not depend on this choice (for a fixed
// instruction stream), which the test suite exercises heavily; the policy
// only affects scheduling.
struct OrderPolicy {
    OrderKind kind = OrderKind::LowestIndex;
    uint64_t seed = 0; // only used by UniformRandom

    static OrderPolicy lowest_index() { return {OrderKind::LowestIndex, 0}; }
    static OrderPolicy fifo_queue() { return {OrderKind::FifoQueue, 0}; }
    static OrderPolicy uniform_random(uint64_t seed) {
        return {OrderKind::UniformRandom, seed};
    }
};

struct StabilizationReport {
    Config final;
    std::vector<int64_t> odometer; // half-topplings per site (m)
    int64_t sink_exits = 0;
    int64_t steps = 0;
};

inline constexpr uint64_t kDefaultStepCap = 1'000'000'000;

// Repeatedly half-topples an unstable site chosen by the policy until the
// configuration is stable. Instruction indices continue from the initial
// residues, so replays with the same stream and any policy consume the
// same instruction array.
inline StabilizationReport stabilize(const GraphTopology& graph, Config cfg,
                                     const InstructionStream& stream,
                                     OrderPolicy policy = OrderPolicy::lowest_index(),
                                     uint64_t step_cap = kDefaultStepCap) {
    validate_config(graph, cfg);
    const int n = cfg.size();

    StabilizationReport report;
    report.odometer.assign(n, 0);

    std::vector<uint64_t> h_counter(n);
    for (int x = 0; x < n; ++x) h_counter[x] = static_cast<uint64_t>(cfg.h_residue[x]);

    uint64_t steps = 0;
    auto topple = [&](int x) {
        const int dest = half_topple(graph, cfg, x, stream, h_counter);
        ++report.odometer[x];
        if (dest == graph.sink()) ++report.sink_exits;
        if (++steps > step_cap)
            throw StepCapExceeded("stabilization exceeded " + std::to_string(step_cap) +
                                  " half-topplings");
        return dest;
    };

    switch (policy.kind) {
    case OrderKind::LowestIndex: {
        // Lazy min-heap: every unstable site is in the heap at least once;
        // stale entries are skipped at pop time.
        std::priority_queue<int, std::vector<int>, std::greater<int>> heap;
        for (int x = 0; x < n; ++x)
            if (is_unstable(cfg, x)) heap.push(x);
        while (!heap.empty()) {
            const int x = heap.top();
            heap.pop();
            if (!is_unstable(cfg, x)) continue;
            const int dest = topple(x);
            if (is_unstable(cfg, x)) heap.push(x);
            if (dest != graph.sink() && dest != x && is_unstable(cfg, dest))
                heap.push(dest);
        }
        break;
    }
    case OrderKind::FifoQueue: {
        // Queue holds exactly the unstable sites: receiving a particle
        // never stabilizes a site, so entries cannot go stale.
        std::deque<int> queue;
        std::vector<char> in_queue(n, 0);
        for (int x = 0; x < n; ++x)
            if (is_unstable(cfg, x)) {
                queue.push_back(x);
                in_queue[x] = 1;
            }
        while (!queue.empty()) {
            const int x = queue.front();
            queue.pop_front();
            in_queue[x] = 0;
            const int dest = topple(x);
            if (dest != graph.sink() && !in_queue[dest] && is_unstable(cfg, dest)) {
                queue.push_back(dest);
                in_queue[dest] = 1;
            }
            if (!in_queue[x] && is_unstable(cfg, x)) {
                queue.push_back(x);
                in_queue[x] = 1;
            }
        }
        break;
    }
    case OrderKind::UniformRandom: {
        SplitMix64 pick(policy.seed);
        std::vector<int> members;
        std::vector<int> pos(n, -1);
        auto add = [&](int x) {
            if (pos[x] < 0) {
                pos[x] = static_cast<int>(members.size());
                members.push_back(x);
            }
        };
        auto drop = [&](int x) {
            const int p = pos[x];
            if (p < 0) return;
            members[p] = members.back();
            pos[members[p]] = p;
            members.pop_back();
            pos[x] = -1;
        };
        for (int x = 0; x < n; ++x)
            if (is_unstable(cfg, x)) add(x);
        while (!members.empty()) {
            const int x = members[pick.next_below(members.size())];
            const int dest = topple(x);
            if (!is_unstable(cfg, x)) drop(x);
            if (dest != graph.sink() && is_unstable(cfg, dest)) add(dest);
        }
        break;
    }
    }

    report.steps = static_cast<int64_t>(steps);
    report.final = std::move(cfg);
    return report;
}

struct SiteOccupancy {
    int active = 0;
    int sleeping = 0;
};

// Reparametrizes a k = 2 configuration as active/sleeping particle counts
// per site: a site is unstable exactly when it holds an active particle.
// Rejects eta = 0 with odd residue, which legal dynamics cannot produce.
inline std::vector<SiteOccupancy> config_to_sleeping_active(const Config& cfg) {
    if (cfg.threshold != 2)
        throw UnsupportedThreshold("sleeping/active view is defined for threshold 2");
    std::vector<SiteOccupancy> view(cfg.eta.size());
    for (int x = 0; x < cfg.size(); ++x) {
        const int eta = cfg.eta[x];
        const int parity = cfg.h_residue[x];
        if (eta == 0) {
            if (parity != 0)
                throw UnreachablePair("empty site " + std::to_string(x) +
                                      " with odd odometer is unreachable");
            view[x] = {0, 0};
        } else if (eta % 2 == parity) {
            view[x] = {eta, 0};
        } else {
            view[x] = {eta - 1, 1};
        }
    }
    return view;
}

} // namespace sandpile
