#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <map>
#include <vector>

#include "sandpile/rng.hpp"

using namespace sandpile;

TEST_CASE("splitmix stream is deterministic per seed") {
    SplitMix64 a(42);
    SplitMix64 b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
    SplitMix64 c(43);
    bool differs = false;
    SplitMix64 a2(42);
    for (int i = 0; i < 100; ++i) differs |= (a2.next() != c.next());
    REQUIRE(differs);
}

TEST_CASE("bounded draws are in range and roughly uniform") {
    SplitMix64 rng(7);
    const uint64_t n = 7;
    std::vector<int64_t> counts(n, 0);
    const int64_t draws = 70'000;
    for (int64_t i = 0; i < draws; ++i) {
        const uint64_t v = rng.next_below(n);
        REQUIRE(v < n);
        ++counts[v];
    }
    const double expected = static_cast<double>(draws) / static_cast<double>(n);
    const double se = std::sqrt(expected * (1.0 - 1.0 / static_cast<double>(n)));
    for (int64_t c : counts)
        REQUIRE(std::abs(static_cast<double>(c) - expected) < 5.0 * se);
}

TEST_CASE("next_below(1) is always zero") {
    SplitMix64 rng(11);
    for (int i = 0; i < 32; ++i) REQUIRE(rng.next_below(1) == 0);
}

TEST_CASE("derived seeds differ across stream ids") {
    std::map<uint64_t, int> seen;
    for (uint64_t id = 0; id < 1000; ++id) ++seen[derive_seed(123456789, id)];
    REQUIRE(seen.size() == 1000);
    REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
}
