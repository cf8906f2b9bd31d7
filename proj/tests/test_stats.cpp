#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "sandpile/oracle.hpp"
#include "sandpile/stats.hpp"

using namespace sandpile;

TEST_CASE("drift profile at density zero matches (N-1)/N") {
    const int64_t n = 500;
    const auto points = drift_profile(n, {0.0}, 4000, 11, 2);
    REQUIRE(points.size() == 1);
    const double expected = static_cast<double>(n - 1) / static_cast<double>(n);
    const double se = points[0].ci99_half_width / kZ99;
    REQUIRE(std::abs(points[0].mean_delta - expected) <= 3.0 * se);
}

TEST_CASE("drift profile is reproducible and worker-count independent") {
    const auto a = drift_profile(300, {0.2, 0.7}, 2000, 5, 1);
    const auto b = drift_profile(300, {0.2, 0.7}, 2000, 5, 2);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].sum_delta == b[i].sum_delta);
        REQUIRE(a[i].sum_delta_sq == b[i].sum_delta_sq);
        REQUIRE(a[i].mean_delta == b[i].mean_delta);
        REQUIRE(a[i].ci99_half_width == b[i].ci99_half_width);
    }
    REQUIRE(a[0].mean_delta > 0.0);
    REQUIRE(a[1].mean_delta < 0.0);
    REQUIRE_THROWS_AS(drift_profile(300, {1.0}, 100, 1), BadParameter);
}

TEST_CASE("mass exit probability: validation and monotonicity in delta") {
    REQUIRE_THROWS_AS(mass_exit_probability(500, 0.7, 0.25, 100, 1), BadParameter);
    REQUIRE_THROWS_AS(mass_exit_probability(500, 0.4, 0.1, 100, 1), BadParameter);
    REQUIRE_THROWS_AS(mass_exit_probability(500, 1.1, 0.1, 100, 1), BadParameter);

    // same seed => same trials => the larger-delta event is nested exactly
    const auto small_delta = mass_exit_probability(500, 0.7, 0.10, 4000, 21, 2);
    const auto large_delta = mass_exit_probability(500, 0.7, 0.15, 4000, 21, 2);
    REQUIRE(large_delta.events <= small_delta.events);
    REQUIRE(small_delta.probability > 0.0);
    REQUIRE(small_delta.events >= 0);
    REQUIRE(small_delta.probability <= 1.0);
}

TEST_CASE("long jump probability: validation and scarcity") {
    REQUIRE_THROWS_AS(long_jump_probability(500, 0.4, 0.5, 100, 1), BadParameter);
    REQUIRE_THROWS_AS(long_jump_probability(500, 0.6, 0.2, 100, 1), BadParameter);

    const auto small_n = long_jump_probability(100, 0.4, 0.2, 20'000, 31, 2);
    const auto large_n = long_jump_probability(500, 0.4, 0.2, 20'000, 31, 2);
    // exponentially rare in N: the trend is non-increasing within noise
    REQUIRE(large_n.probability <=
            small_n.probability + 4.0 * (small_n.standard_error + large_n.standard_error));
    REQUIRE(large_n.probability <= 1e-3);
}

TEST_CASE("tau0 tail: degenerate and ordered starts") {
    const SurvivalCurve none = tau0_tail(200, 50, 0, 20, 500, 3);
    for (int64_t t = 0; t <= none.horizon; ++t) REQUIRE(none.survivors[t] == 0);

    const SurvivalCurve one = tau0_tail(1000, 300, 1, 60, 20'000, 17, 2);
    const SurvivalCurve ten = tau0_tail(1000, 300, 10, 60, 20'000, 18, 2);
    for (int64_t t = 0; t <= 60; ++t) {
        // more initial active particles survive longer (statistically)
        const double se = 4.0 * std::sqrt(ten.survival(t) * (1 - ten.survival(t)) / 20'000.0 +
                                          one.survival(t) * (1 - one.survival(t)) / 20'000.0);
        REQUIRE(ten.survival(t) >= one.survival(t) - se);
    }
    // survival functions are non-increasing by construction
    for (int64_t t = 1; t <= 60; ++t) REQUIRE(one.survivors[t] <= one.survivors[t - 1]);

    double slope = 0.0;
    REQUIRE(log_survival_slope(one, 11, 60, 30, slope));
    REQUIRE(slope < 0.0);
}

TEST_CASE("concentration check at small scale") {
    REQUIRE_THROWS_AS(concentration_check(100, 1000, 100, 0.7, 1), BadParameter);
    REQUIRE_THROWS_AS(concentration_check(100, 100, 100, 0.1, 1), BadParameter);

    const ConcentrationReport full_band = concentration_check(100, 2000, 500, 0.5, 2);
    REQUIRE(full_band.from_empty.escapes == 0);
    REQUIRE(full_band.from_full.escapes == 0);

    const ConcentrationReport report = concentration_check(200, 6000, 2000, 0.15, 2);
    REQUIRE(report.from_empty.mean_density > 0.35);
    REQUIRE(report.from_empty.mean_density < 0.65);
    REQUIRE(report.from_full.mean_density > 0.35);
    REQUIRE(report.from_full.mean_density < 0.65);
    REQUIRE(report.from_empty.recorded == 4000);
}

TEST_CASE("driven chain matches the exact stationary mean at N=100") {
    const double exact = mean_of(complete_graph_count_stationary(100)) / 100.0;
    REQUIRE(std::abs(exact - 0.585652) < 1e-6);
    const ConcentrationReport report = concentration_check(100, 220'000, 20'000, 0.49, 77);
    REQUIRE(std::abs(report.from_empty.mean_density - exact) < 0.01);
    REQUIRE(std::abs(report.from_full.mean_density - exact) < 0.01);
}

TEST_CASE("geometric domination at reduced scale") {
    const DominationReport report = geometric_domination_check(500, 150, 20'000, 2.0 / 3.0, 23, 2);
    REQUIRE(report.dominated);
    REQUIRE(report.worst_margin >= 0.0);
    int64_t total = 0;
    for (const auto& [value, count] : report.counts) {
        REQUIRE(value >= 1);
        total += count;
    }
    REQUIRE(total == report.trials);
}

TEST_CASE("generic threshold density probe runs end to end") {
    const GenericDensityReport report = generic_density_check(150, 3, 4000, 1500, 29);
    REQUIRE(report.conjectured_density == 1.0);
    REQUIRE(report.mean_density > 0.6);
    REQUIRE(report.mean_density < 1.3);
}
