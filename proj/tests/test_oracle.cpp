#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <map>

#include "sandpile/distribution.hpp"
#include "sandpile/oracle.hpp"
#include "sandpile/verification.hpp"

using namespace sandpile;

namespace {

// mass of the stable configuration with the given eta (residues zero)
double eta_mass(const Distribution<ConfigKey>& dist, std::vector<int> eta) {
    ConfigKey key = eta;
    key.insert(key.end(), eta.size(), 0);
    return dist.mass_of(key);
}

void require_normalized(const Distribution<ConfigKey>& dist) {
    double total = 0.0;
    for (double p : dist.mass) {
        REQUIRE(p >= 0.0);
        total += p;
    }
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
}

} // namespace

TEST_CASE("stabilization law on the one-vertex complete graph") {
    const GraphTopology g2 = complete_graph(2);

    SECTION("already stable: point mass") {
        Config cfg = make_config(g2, 2);
        cfg.eta[0] = 1;
        const auto law = stabilization_distribution(g2, cfg);
        REQUIRE(law.support.size() == 1);
        REQUIRE(eta_mass(law, {1}) == 1.0);
    }

    SECTION("from (eta=1, residue=1): two equiprobable branches") {
        Config cfg = make_config(g2, 2);
        cfg.eta[0] = 1;
        cfg.h_residue[0] = 1;
        const auto law = stabilization_distribution(g2, cfg);
        REQUIRE(std::abs(eta_mass(law, {0}) - 0.5) < 1e-12);
        REQUIRE(std::abs(eta_mass(law, {1}) - 0.5) < 1e-12);
        require_normalized(law);
    }

    SECTION("from (eta=2, residue=0): 4-state linear system") {
        Config cfg = make_config(g2, 2);
        cfg.eta[0] = 2;
        const auto law = stabilization_distribution(g2, cfg);
        REQUIRE(std::abs(eta_mass(law, {0}) - 1.0 / 3.0) < 1e-12);
        REQUIRE(std::abs(eta_mass(law, {1}) - 2.0 / 3.0) < 1e-12);
        require_normalized(law);
    }
}

TEST_CASE("schedule independence of the exact law (FIFO vs lowest-index)") {
    for (const int threshold : {2, 3}) {
        for (const auto& [name, graph] : sampling_suite(threshold == 2 ? 3 : 2)) {
            // a busy initial configuration: full load plus one extra particle,
            // nonzero residues on even sites
            Config cfg = make_config(graph, threshold);
            for (int x = 0; x < graph.vertex_count(); ++x) {
                cfg.eta[x] = threshold - 1;
                if (x % 2 == 0) cfg.h_residue[x] = threshold - 1;
            }
            ++cfg.eta[0];
            const auto lowest = stabilization_distribution(graph, cfg, OrderKind::LowestIndex);
            const auto fifo = stabilization_distribution(graph, cfg, OrderKind::FifoQueue);
            INFO(name << " threshold " << threshold);
            REQUIRE(tv_distance(lowest, fifo) < 1e-12);
        }
    }
}

TEST_CASE("transition matrix of the one-vertex complete graph") {
    const GraphTopology g2 = complete_graph(2);
    const TransitionMatrix tm = transition_matrix(g2, 2);
    REQUIRE(tm.size() == 2);
    REQUIRE(std::abs(tm.at(0, 0) - 0.5) < 1e-12);
    REQUIRE(std::abs(tm.at(0, 1) - 0.5) < 1e-12);
    REQUIRE(std::abs(tm.at(1, 0) - 1.0 / 6.0) < 1e-12);
    REQUIRE(std::abs(tm.at(1, 1) - 5.0 / 6.0) < 1e-12);
}

TEST_CASE("transition matrices are row-stochastic across the suite") {
    for (const auto& [name, graph] : sampling_suite(3)) {
        const TransitionMatrix tm = transition_matrix(graph, 2);
        for (int i = 0; i < tm.size(); ++i) {
            double row = 0.0;
            for (int j = 0; j < tm.size(); ++j) {
                REQUIRE(tm.at(i, j) >= 0.0);
                row += tm.at(i, j);
            }
            INFO(name << " row " << i);
            REQUIRE(std::abs(row - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("stationary distributions") {
    SECTION("one-vertex complete graph: (1/4, 3/4)") {
        const auto pi = stationary_distribution(transition_matrix(complete_graph(2), 2));
        REQUIRE(std::abs(eta_mass(pi, {0}) - 0.25) < 1e-12);
        REQUIRE(std::abs(eta_mass(pi, {1}) - 0.75) < 1e-12);
    }

    SECTION("single absorbing-free lazy state") {
        TransitionMatrix tm;
        tm.states = {ConfigKey{0, 0}};
        tm.q = {1.0};
        const auto pi = stationary_distribution(tm);
        REQUIRE(pi.mass.size() == 1);
        REQUIRE(pi.mass[0] == 1.0);
    }

    SECTION("two-state chain closed form (b, a)/(a+b)") {
        const double a = 0.5;
        const double b = 1.0 / 6.0;
        TransitionMatrix tm;
        tm.states = {ConfigKey{0, 0}, ConfigKey{1, 0}};
        tm.q = {1 - a, a, b, 1 - b};
        const auto pi = stationary_distribution(tm);
        REQUIRE(std::abs(pi.mass[0] - 0.25) < 1e-12);
        REQUIRE(std::abs(pi.mass[1] - 0.75) < 1e-12);
    }

    SECTION("reducible chains are rejected") {
        TransitionMatrix tm;
        tm.states = {ConfigKey{0, 0}, ConfigKey{1, 0}};
        tm.q = {1.0, 0.0, 0.0, 1.0};
        REQUIRE_THROWS_AS(stationary_distribution(tm), NotIrreducible);
    }
}

TEST_CASE("sampler output law") {
    SECTION("one-vertex complete graph, threshold 2: (1/4, 3/4)") {
        const auto nu = sampler_distribution(complete_graph(2), 2);
        REQUIRE(std::abs(eta_mass(nu, {0}) - 0.25) < 1e-12);
        REQUIRE(std::abs(eta_mass(nu, {1}) - 0.75) < 1e-12);
    }

    SECTION("one-vertex complete graph, threshold 3: (1/12, 1/3, 7/12)") {
        // hand enumeration over the three equiprobable initial residues
        const auto nu = sampler_distribution(complete_graph(2), 3);
        REQUIRE(std::abs(eta_mass(nu, {0}) - 1.0 / 12.0) < 1e-12);
        REQUIRE(std::abs(eta_mass(nu, {1}) - 1.0 / 3.0) < 1e-12);
        REQUIRE(std::abs(eta_mass(nu, {2}) - 7.0 / 12.0) < 1e-12);
        // matches the stationary law of the threshold-3 driven chain
        const auto pi = stationary_distribution(transition_matrix(complete_graph(2), 3));
        REQUIRE(tv_distance(nu, pi) < 1e-12);
    }

    SECTION("support is stable with eta at most k-1") {
        const auto nu = sampler_distribution(path_graph(3), 2);
        require_normalized(nu);
        for (const auto& key : nu.support)
            for (size_t x = 0; x < key.size() / 2; ++x) {
                REQUIRE(key[x] >= 0);
                REQUIRE(key[x] <= 1);
                REQUIRE(key[key.size() / 2 + x] == 0);
            }
    }
}

TEST_CASE("microscopic absorption law") {
    SECTION("absorbing start is a point mass") {
        const auto law = micro_absorption_distribution(6, 4, 0);
        REQUIRE(law.support.size() == 1);
        REQUIRE(law.mass_of(4) == 1.0);
    }

    SECTION("N=2 frozen values") {
        const auto one = micro_absorption_distribution(2, 1, 1);
        REQUIRE(std::abs(one.mass_of(0) - 0.5) < 1e-12);
        REQUIRE(std::abs(one.mass_of(1) - 0.5) < 1e-12);

        const auto two = micro_absorption_distribution(2, 2, 2);
        REQUIRE(std::abs(two.mass_of(0) - 1.0 / 3.0) < 1e-12);
        REQUIRE(std::abs(two.mass_of(1) - 2.0 / 3.0) < 1e-12);
    }

    SECTION("two active particles on G_2 equal the eta=2 stabilization") {
        Config cfg = make_config(complete_graph(2), 2);
        cfg.eta[0] = 2;
        const auto stab_counts =
            project_to_counts(stabilization_distribution(complete_graph(2), cfg));
        const auto micro = micro_absorption_distribution(2, 2, 2);
        REQUIRE(tv_distance(stab_counts, micro) < 1e-12);
    }

    SECTION("invalid states and caps are rejected") {
        REQUIRE_THROWS_AS(micro_absorption_distribution(4, 2, 3), InvalidState);
        REQUIRE_THROWS_AS(micro_absorption_distribution(50, 40, 1, 10), StateCapExceeded);
    }
}

TEST_CASE("micro-macro identity at N=3 (unit-scale)") {
    const GraphTopology graph = complete_graph(3);
    for (int k = 0; k <= 2; ++k) {
        Config from = make_config(graph, 2);
        for (int x = 0; x < k; ++x) from.eta[x] = 1;
        const auto macro = macro_step_count_distribution(graph, from);
        const auto micro = micro_absorption_distribution(3, k + 1, 1);
        INFO("k=" << k);
        REQUIRE(tv_distance(macro, micro) < 1e-12);
    }
}

TEST_CASE("transition matrix restricted to counts matches the micro law") {
    // complete graph: rows from any configuration with k particles project
    // to the absorption law of the microscopic chain from (k+1, 1)
    const GraphTopology graph = complete_graph(3);
    const TransitionMatrix tm = transition_matrix(graph, 2);
    for (int k = 0; k <= 2; ++k) {
        int row = -1;
        for (int i = 0; i < tm.size(); ++i) {
            int count = 0;
            for (size_t x = 0; x < tm.states[i].size() / 2; ++x) count += tm.states[i][x];
            if (count == k) {
                row = i;
                break;
            }
        }
        REQUIRE(row >= 0);
        std::map<int64_t, double> counts_accum;
        for (int j = 0; j < tm.size(); ++j) {
            int count = 0;
            for (size_t x = 0; x < tm.states[j].size() / 2; ++x) count += tm.states[j][x];
            counts_accum[count] += tm.at(row, j);
        }
        const auto projected = finalize_distribution(std::move(counts_accum));
        const auto micro = micro_absorption_distribution(3, k + 1, 1);
        INFO("k=" << k);
        REQUIRE(tv_distance(projected, micro) < 1e-12);
    }
}

TEST_CASE("count-chain stationary law equals the configuration-space route") {
    // two independent exact routes: the 2^|V|-state configuration oracle
    // (general-graph stabilization machinery) versus the O(N^2) count
    // chain assembled from microscopic absorption laws
    for (const int n : {3, 4, 5}) {
        const auto via_configs =
            project_to_counts(stationary_distribution(transition_matrix(complete_graph(n), 2)));
        const auto via_counts = complete_graph_count_stationary(n);
        INFO("N=" << n);
        REQUIRE(tv_distance(via_configs, via_counts) < 1e-12);
    }
}

TEST_CASE("exact stationary mean density at N=1000 is 0.537131", "[slow]") {
    // the finite-size anchor behind the density criterion's analysis
    const auto pi = complete_graph_count_stationary(1000);
    REQUIRE(std::abs(mean_of(pi) / 1000.0 - 0.537131) < 1e-6);
}

TEST_CASE("oracle state caps") {
    const GraphTopology g = complete_graph(4);
    Config cfg = make_config(g, 2);
    cfg.eta = {2, 1, 1};
    REQUIRE_THROWS_AS(stabilization_distribution(g, cfg, OrderKind::LowestIndex, 5),
                      StateCapExceeded);
}

TEST_CASE("distribution plumbing") {
    REQUIRE_THROWS_AS(finalize_distribution(std::map<int64_t, double>{{0, 0.3}, {1, 0.3}}),
                      NumericalFailure);
    Distribution<int64_t> p;
    p.support = {0, 1};
    p.mass = {0.5, 0.5};
    Distribution<int64_t> q;
    q.support = {0, 1};
    q.mass = {0.25, 0.75};
    REQUIRE(tv_distance(p, p) == 0.0);
    REQUIRE(std::abs(tv_distance(p, q) - 0.25) < 1e-15);
    Distribution<int64_t> r;
    r.support = {2};
    r.mass = {1.0};
    REQUIRE(tv_distance(p, r) == 1.0);
}
