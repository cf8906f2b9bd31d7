#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "sandpile/graph.hpp"

using namespace sandpile;

TEST_CASE("single vertex with self-loop and sink edge") {
    const GraphTopology g = build_graph(1, {{0, 0}, {0, 1}});
    REQUIRE(g.vertex_count() == 1);
    REQUIRE(g.sink() == 1);
    REQUIRE(g.degree(0) == 2);
    std::vector<int> nb(g.neighbors(0).begin(), g.neighbors(0).end());
    std::sort(nb.begin(), nb.end());
    REQUIRE(nb == std::vector<int>{0, 1});
}

TEST_CASE("path of three vertices ends at the sink") {
    const GraphTopology g = build_graph(3, {{0, 1}, {1, 2}, {2, 3}});
    REQUIRE(g.degree(0) == 1);
    REQUIRE(g.degree(1) == 2);
    REQUIRE(g.degree(2) == 2);
    const GraphTopology p = path_graph(3);
    for (int x = 0; x < 3; ++x) REQUIRE(p.degree(x) == g.degree(x));
}

TEST_CASE("vertex without a sink path is rejected") {
    REQUIRE_THROWS_AS(build_graph(2, {{0, 1}}), DisconnectedGraph);
    REQUIRE_THROWS_AS(build_graph(3, {{0, 3}, {1, 2}}), DisconnectedGraph);
}

TEST_CASE("bad inputs") {
    REQUIRE_THROWS_AS(build_graph(0, {{0, 0}}), EmptyVertexSet);
    REQUIRE_THROWS_AS(build_graph(2, {{0, 3}}), BadIndex);
    REQUIRE_THROWS_AS(build_graph(2, {{-1, 0}}), BadIndex);
    REQUIRE_THROWS_AS(complete_graph(1), BadParameter);
}

TEST_CASE("complete graph degrees") {
    const GraphTopology g2 = complete_graph(2);
    REQUIRE(g2.vertex_count() == 1);
    REQUIRE(g2.degree(0) == 2);
    std::vector<int> nb(g2.neighbors(0).begin(), g2.neighbors(0).end());
    REQUIRE(nb == std::vector<int>{0, 1});

    for (int n_total : {2, 3, 4, 7}) {
        const GraphTopology g = complete_graph(n_total);
        REQUIRE(g.vertex_count() == n_total - 1);
        int degree_sum = 0;
        for (int x = 0; x < g.vertex_count(); ++x) {
            REQUIRE(g.degree(x) == n_total);
            degree_sum += g.degree(x);
        }
        REQUIRE(degree_sum == n_total * (n_total - 1));
    }
}

TEST_CASE("graph families") {
    const GraphTopology cycle = cycle_graph(3);
    for (int x = 0; x < 3; ++x) REQUIRE(cycle.degree(x) == 2);

    const GraphTopology degenerate = cycle_graph(1); // double edge to the sink
    REQUIRE(degenerate.degree(0) == 2);

    const GraphTopology star = star_graph(3);
    REQUIRE(star.degree(0) == 3);
    REQUIRE(star.degree(1) == 1);
    REQUIRE(star.degree(2) == 1);

    const GraphTopology grid = grid_graph(3, 2);
    for (int x = 0; x < grid.vertex_count(); ++x) REQUIRE(grid.degree(x) == 4);
}
