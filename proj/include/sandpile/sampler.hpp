#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "sandpile/distribution.hpp"
#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/parallel.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

// Draws one configuration exactly distributed as the stationary law of the
// driven-dissipative chain: start from eta = k-1 everywhere with
// independent uniform residues on {0,...,k-1} (for k = 2, fair coin
// parities), then stabilize against a fresh instruction stream. Legal
// half-topplings may run in any order, so the order policy is free.
inline Config exact_sample(const GraphTopology& graph, int threshold, uint64_t seed,
                           OrderPolicy policy = OrderPolicy::lowest_index(),
                           uint64_t step_cap = kDefaultStepCap) {
    if (threshold < 2) throw BadParameter("threshold must be >= 2");
    Config cfg = make_config(graph, threshold);
    cfg.eta.assign(cfg.eta.size(), threshold - 1);
    SplitMix64 residues(derive_seed(seed, 0));
    for (int x = 0; x < cfg.size(); ++x)
        cfg.h_residue[x] = static_cast<int>(residues.next_below(static_cast<uint64_t>(threshold)));
    InstructionStream stream(graph, derive_seed(seed, 1));
    return stabilize(graph, std::move(cfg), stream, policy, step_cap).final;
}

// Empirical law of the total particle count over independent exact
// samples. Replica seeds are derived from the master seed by replica
// index, so the result is identical for any worker count.
inline Distribution<int64_t> sample_density(const GraphTopology& graph, int threshold,
                                            uint64_t seed, int64_t reps, int workers = 1,
                                            uint64_t step_cap = kDefaultStepCap) {
    if (reps < 1) throw BadParameter("need at least one replica");
    std::vector<std::map<int64_t, int64_t>> partial(static_cast<size_t>(workers));
    parallel_blocks(reps, workers, [&](int worker, int64_t begin, int64_t end) {
        auto& counts = partial[static_cast<size_t>(worker)];
        for (int64_t rep = begin; rep < end; ++rep) {
            const Config sample =
                exact_sample(graph, threshold, derive_seed(seed, static_cast<uint64_t>(rep)),
                             OrderPolicy::lowest_index(), step_cap);
            ++counts[total_particles(sample)];
        }
    });
    std::map<int64_t, int64_t> counts;
    for (const auto& block : partial)
        for (const auto& [value, c] : block) counts[value] += c;
    return distribution_from_counts(counts);
}

} // namespace sandpile
