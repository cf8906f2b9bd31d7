#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sandpile/errors.hpp"

namespace sandpile {

// Finite connected multigraph with one distinguished sink vertex. Non-sink
// vertices are 0..n-1, the sink is index n. Adjacency is stored per
// non-sink vertex as a multiset of neighbor indices: self-loops contribute
// one entry, parallel edges one entry each, and edges into the sink appear
// only on the non-sink side (the sink has no outgoing adjacency). The
// degree d_x is the adjacency length, i.e. the number of instruction slots
// a half-toppling at x chooses among uniformly.
//
// Immutable after construction; safe to share across threads.
class GraphTopology {
  public:
    GraphTopology(int n_vertices, std::vector<std::vector<int>> adjacency)
        : n_vertices_(n_vertices), adjacency_(std::move(adjacency)) {}

    int vertex_count() const { return n_vertices_; }
    int sink() const { return n_vertices_; }

    int degree(int x) const { return static_cast<int>(adjacency_[x].size()); }

    std::span<const int> neighbors(int x) const { return adjacency_[x]; }

    bool is_sink(int v) const { return v == n_vertices_; }

    void check_vertex(int x) const {
        if (x < 0 || x >= n_vertices_)
            throw BadIndex("vertex index " + std::to_string(x) + " out of range (n=" +
                           std::to_string(n_vertices_) + ")");
    }

  private:
    int n_vertices_;
    std::vector<std::vector<int>> adjacency_;
};

using EdgeList = std::vector<std::pair<int, int>>;

// Builds and validates a topology from an undirected edge list. Vertex
// indices run 0..n, with n the sink. Throws EmptyVertexSet, BadIndex, or
// DisconnectedGraph (some vertex has no path to the sink).
inline GraphTopology build_graph(int n_vertices, const EdgeList& edges) {
    if (n_vertices < 1)
        throw EmptyVertexSet("graph needs at least one non-sink vertex");
    const int sink = n_vertices;
    std::vector<std::vector<int>> adjacency(n_vertices);
    for (const auto& [u, v] : edges) {
        if (u < 0 || u > sink || v < 0 || v > sink)
            throw BadIndex("edge (" + std::to_string(u) + "," + std::to_string(v) +
                           ") out of range (sink=" + std::to_string(sink) + ")");
        if (u == sink && v == sink)
            continue; // a loop at the sink carries no instruction slot
        if (u == v) {
            adjacency[u].push_back(u); // self-loop: one slot
        } else {
            if (u != sink) adjacency[u].push_back(v);
            if (v != sink) adjacency[v].push_back(u);
        }
    }

    // Every vertex must reach the sink; BFS from the sink over the
    // undirected edge set.
    std::vector<char> seen(n_vertices, 0);
    std::vector<int> frontier;
    for (int x = 0; x < n_vertices; ++x)
        for (int y : adjacency[x])
            if (y == sink && !seen[x]) {
                seen[x] = 1;
                frontier.push_back(x);
            }
    while (!frontier.empty()) {
        const int x = frontier.back();
        frontier.pop_back();
        for (int y : adjacency[x])
            if (y != sink && !seen[y]) {
                seen[y] = 1;
                frontier.push_back(y);
            }
    }
    for (int x = 0; x < n_vertices; ++x)
        if (!seen[x])
            throw DisconnectedGraph("vertex " + std::to_string(x) + " cannot reach the sink");

    return GraphTopology(n_vertices, std::move(adjacency));
}

// Complete graph with self-loops on N-1 non-sink vertices plus a sink:
// every vertex has one slot per non-sink vertex (itself included, via its
// self-loop) and one slot to the sink, so d_x = N everywhere.
inline GraphTopology complete_graph(int n_total) {
    if (n_total < 2)
        throw BadParameter("complete graph needs N >= 2 (one non-sink vertex)");
    const int n = n_total - 1;
    std::vector<std::vector<int>> adjacency(n);
    for (int x = 0; x < n; ++x) {
        adjacency[x].reserve(n_total);
        for (int y = 0; y < n; ++y) adjacency[x].push_back(y);
        adjacency[x].push_back(n); // sink
    }
    return GraphTopology(n, std::move(adjacency));
}

// Path 0-1-...-(n-1)-sink.
inline GraphTopology path_graph(int n_vertices) {
    if (n_vertices < 1) throw BadParameter("path needs at least one vertex");
    EdgeList edges;
    for (int x = 0; x + 1 <= n_vertices; ++x) edges.push_back({x, x + 1});
    return build_graph(n_vertices, edges);
}

// Cycle through 0,...,n-1 and the sink. For n = 1 this degenerates to a
// double edge between vertex 0 and the sink.
inline GraphTopology cycle_graph(int n_vertices) {
    if (n_vertices < 1) throw BadParameter("cycle needs at least one vertex");
    EdgeList edges;
    for (int x = 0; x + 1 <= n_vertices; ++x) edges.push_back({x, x + 1});
    edges.push_back({0, n_vertices});
    return build_graph(n_vertices, edges);
}

// Star with center 0, leaves 1..n-1, and the sink attached to the center.
inline GraphTopology star_graph(int n_vertices) {
    if (n_vertices < 1) throw BadParameter("star needs at least one vertex");
    EdgeList edges;
    for (int leaf = 1; leaf < n_vertices; ++leaf) edges.push_back({0, leaf});
    edges.push_back({0, n_vertices});
    return build_graph(n_vertices, edges);
}

// w x h grid; every boundary cell gets one extra edge to the sink per
// missing neighbor, matching the usual "finite window of Z^2" setup.
inline GraphTopology grid_graph(int width, int height) {
    if (width < 1 || height < 1) throw BadParameter("grid needs positive extent");
    const int n = width * height;
    const int sink = n;
    auto id = [width](int i, int j) { return j * width + i; };
    EdgeList edges;
    for (int j = 0; j < height; ++j)
        for (int i = 0; i < width; ++i) {
            const int v = id(i, j);
            edges.push_back({v, i + 1 < width ? id(i + 1, j) : sink});
            edges.push_back({v, j + 1 < height ? id(i, j + 1) : sink});
            if (i == 0) edges.push_back({v, sink});
            if (j == 0) edges.push_back({v, sink});
        }
    return build_graph(n, edges);
}

} // namespace sandpile
