#pragma once

#include <cstdint>
#include <vector>

#include "sandpile/dynamics.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/rng.hpp"

namespace sandpile::testing {

// Random connected multigraph with 1..max_n non-sink vertices: a spanning
// link from every vertex to some higher index keeps the sink reachable,
// then extra edges add multi-edges and self-loops.
inline GraphTopology random_connected_graph(SplitMix64& rng, int max_n) {
    const int n = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(max_n)));
    EdgeList edges;
    for (int v = 0; v < n; ++v) {
        const int hi = v + 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - v)));
        edges.push_back({v, hi});
    }
    const auto extra = rng.next_below(static_cast<uint64_t>(n) + 2);
    for (uint64_t e = 0; e < extra; ++e) {
        const auto u = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
        const auto v = static_cast<int>(rng.next_below(static_cast<uint64_t>(n) + 1));
        edges.push_back({u, v});
    }
    return build_graph(n, edges);
}

inline Config random_config(SplitMix64& rng, const GraphTopology& graph, int threshold,
                            int max_particles) {
    Config cfg = make_config(graph, threshold);
    const auto total = rng.next_below(static_cast<uint64_t>(max_particles) + 1);
    for (uint64_t p = 0; p < total; ++p)
        ++cfg.eta[rng.next_below(static_cast<uint64_t>(graph.vertex_count()))];
    for (int x = 0; x < graph.vertex_count(); ++x)
        cfg.h_residue[x] = static_cast<int>(rng.next_below(static_cast<uint64_t>(threshold)));
    return cfg;
}

} // namespace sandpile::testing
