#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sandpile/chains.hpp"
#include "sandpile/distribution.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/parallel.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

// Two-sided 99% normal quantile; confidence intervals below use the
// normal approximation and report raw integer sums so an exact
// re-analysis stays possible.
inline constexpr double kZ99 = 2.5758293035489004;

struct DriftPoint {
    double density = 0.0;
    int64_t k = 0;
    int64_t trials = 0;
    int64_t sum_delta = 0;    // sum of xi_1 - k over trials
    int64_t sum_delta_sq = 0; // sum of squares
    double mean_delta = 0.0;
    double ci99_half_width = 0.0;
};

// Mean one-step increment of the complete-graph chain at each density in
// the grid, with a 99% confidence half-width. Trial seeds derive from the
// point index and trial index, so reports are bitwise identical for any
// worker count.
inline std::vector<DriftPoint> drift_profile(int64_t n, const std::vector<double>& grid,
                                             int64_t trials, uint64_t seed, int workers = 1,
                                             uint64_t step_cap = kDefaultStepCap) {
    if (trials < 2) throw BadParameter("drift estimation needs at least two trials");
    std::vector<DriftPoint> points;
    points.reserve(grid.size());
    for (size_t g = 0; g < grid.size(); ++g) {
        const double density = grid[g];
        if (density < 0.0 || density >= 1.0)
            throw BadParameter("density " + std::to_string(density) + " outside [0, 1)");
        const auto k = static_cast<int64_t>(std::floor(density * static_cast<double>(n)));
        const uint64_t point_seed = derive_seed(seed, static_cast<uint64_t>(g));

        std::vector<int64_t> sums(static_cast<size_t>(workers), 0);
        std::vector<int64_t> sq_sums(static_cast<size_t>(workers), 0);
        parallel_blocks(trials, workers, [&](int worker, int64_t begin, int64_t end) {
            int64_t sum = 0;
            int64_t sq = 0;
            for (int64_t t = begin; t < end; ++t) {
                SplitMix64 rng(derive_seed(point_seed, static_cast<uint64_t>(t)));
                const int64_t delta = macro_step_complete(k, n, rng, step_cap) - k;
                sum += delta;
                sq += delta * delta;
            }
            sums[static_cast<size_t>(worker)] += sum;
            sq_sums[static_cast<size_t>(worker)] += sq;
        });

        DriftPoint point;
        point.density = density;
        point.k = k;
        point.trials = trials;
        for (int64_t s : sums) point.sum_delta += s;
        for (int64_t s : sq_sums) point.sum_delta_sq += s;
        const auto mean = static_cast<double>(point.sum_delta) / static_cast<double>(trials);
        const double variance =
            (static_cast<double>(point.sum_delta_sq) -
             static_cast<double>(trials) * mean * mean) /
            static_cast<double>(trials - 1);
        point.mean_delta = mean;
        point.ci99_half_width = kZ99 * std::sqrt(std::max(variance, 0.0) /
                                                 static_cast<double>(trials));
        points.push_back(point);
    }
    return points;
}

struct EventProbe {
    int64_t n = 0;
    int64_t k = 0;
    int64_t trials = 0;
    int64_t events = 0;
    double probability = 0.0;
    double standard_error = 0.0;
};

namespace detail {

template <typename EventFn>
EventProbe count_events(int64_t n, int64_t k, int64_t trials, uint64_t seed, int workers,
                        uint64_t step_cap, EventFn&& event) {
    std::vector<int64_t> hits(static_cast<size_t>(workers), 0);
    parallel_blocks(trials, workers, [&](int worker, int64_t begin, int64_t end) {
        int64_t local = 0;
        for (int64_t t = begin; t < end; ++t) {
            SplitMix64 rng(derive_seed(seed, static_cast<uint64_t>(t)));
            if (event(macro_step_complete(k, n, rng, step_cap))) ++local;
        }
        hits[static_cast<size_t>(worker)] += local;
    });
    EventProbe probe;
    probe.n = n;
    probe.k = k;
    probe.trials = trials;
    for (int64_t h : hits) probe.events += h;
    probe.probability = static_cast<double>(probe.events) / static_cast<double>(trials);
    probe.standard_error =
        std::sqrt(probe.probability * (1.0 - probe.probability) / static_cast<double>(trials));
    return probe;
}

} // namespace detail

// Probability that one step from k = ceil(gamma N) sheds at least delta N
// particles. Requires 1/2 < gamma < 1 and 0 < delta < gamma - 1/2.
inline EventProbe mass_exit_probability(int64_t n, double gamma, double delta, int64_t trials,
                                        uint64_t seed, int workers = 1,
                                        uint64_t step_cap = kDefaultStepCap) {
    if (!(gamma > 0.5 && gamma < 1.0))
        throw BadParameter("gamma must lie in (1/2, 1)");
    if (!(delta > 0.0 && delta < gamma - 0.5))
        throw BadParameter("delta must lie in (0, gamma - 1/2)");
    if (trials < 1) throw BadParameter("need at least one trial");
    const auto k = static_cast<int64_t>(std::ceil(gamma * static_cast<double>(n)));
    // Nudge the threshold so ties in delta*N resolve toward the intended
    // integer cut.
    const double cut = static_cast<double>(k) - delta * static_cast<double>(n) + 1e-9;
    return detail::count_events(n, k, trials, seed, workers, step_cap,
                                [cut](int64_t xi) { return static_cast<double>(xi) <= cut; });
}

// Probability that one step from k = ceil(gamma N) lands below beta N.
// Requires 0 < beta < gamma < 1/2.
inline EventProbe long_jump_probability(int64_t n, double gamma, double beta, int64_t trials,
                                        uint64_t seed, int workers = 1,
                                        uint64_t step_cap = kDefaultStepCap) {
    if (!(gamma > 0.0 && gamma < 0.5))
        throw BadParameter("gamma must lie in (0, 1/2)");
    if (!(beta > 0.0 && beta < gamma))
        throw BadParameter("beta must lie in (0, gamma)");
    if (trials < 1) throw BadParameter("need at least one trial");
    const auto k = static_cast<int64_t>(std::ceil(gamma * static_cast<double>(n)));
    const double cut = beta * static_cast<double>(n) - 1e-9;
    return detail::count_events(n, k, trials, seed, workers, step_cap,
                                [cut](int64_t xi) { return static_cast<double>(xi) < cut; });
}

struct SurvivalCurve {
    int64_t n = 0;
    int64_t k = 0;
    int64_t j = 0;
    int64_t horizon = 0;
    int64_t trials = 0;
    std::vector<int64_t> survivors; // survivors[t] = #trials with tau0 > t, t = 0..horizon

    double survival(int64_t t) const {
        return static_cast<double>(survivors[static_cast<size_t>(t)]) /
               static_cast<double>(trials);
    }
};

// Empirical survival function of the absorption time tau0 of the
// microscopic chain started from (k, j).
inline SurvivalCurve tau0_tail(int64_t n, int64_t k, int64_t j, int64_t horizon,
                               int64_t trials, uint64_t seed, int workers = 1) {
    check_micro_state({k, j, n});
    if (horizon < 0) throw BadParameter("horizon must be >= 0");
    if (trials < 1) throw BadParameter("need at least one trial");

    // Histogram of min(tau0, horizon + 1), then suffix sums.
    std::vector<std::vector<int64_t>> partial(
        static_cast<size_t>(workers), std::vector<int64_t>(static_cast<size_t>(horizon) + 2, 0));
    parallel_blocks(trials, workers, [&](int worker, int64_t begin, int64_t end) {
        auto& hist = partial[static_cast<size_t>(worker)];
        for (int64_t t = begin; t < end; ++t) {
            SplitMix64 rng(derive_seed(seed, static_cast<uint64_t>(t)));
            int64_t x = k;
            int64_t y = j;
            int64_t steps = 0;
            while (y > 0 && steps <= horizon) {
                const auto z = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n)));
                if (z == 0) {
                    --x;
                    --y;
                } else if (z <= x - y) {
                    ++y;
                } else {
                    --y;
                }
                ++steps;
            }
            ++hist[static_cast<size_t>(y > 0 ? horizon + 1 : steps)];
        }
    });

    SurvivalCurve curve;
    curve.n = n;
    curve.k = k;
    curve.j = j;
    curve.horizon = horizon;
    curve.trials = trials;
    std::vector<int64_t> hist(static_cast<size_t>(horizon) + 2, 0);
    for (const auto& block : partial)
        for (size_t i = 0; i < hist.size(); ++i) hist[i] += block[i];
    curve.survivors.assign(static_cast<size_t>(horizon) + 1, 0);
    int64_t tail = 0;
    for (int64_t t = horizon; t >= 0; --t) {
        // tau0 > t iff tau0 >= t + 1; the last bin holds every tau0 > horizon
        tail += hist[static_cast<size_t>(t) + 1];
        curve.survivors[static_cast<size_t>(t)] = tail;
    }
    return curve;
}

// Least-squares slope of log-survival over the points in [t_begin, t_end]
// with at least min_count survivors. Returns false if fewer than two
// usable points exist.
inline bool log_survival_slope(const SurvivalCurve& curve, int64_t t_begin, int64_t t_end,
                               int64_t min_count, double& slope_out) {
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    int64_t used = 0;
    for (int64_t t = t_begin; t <= t_end && t <= curve.horizon; ++t) {
        const int64_t count = curve.survivors[static_cast<size_t>(t)];
        if (count < min_count) break;
        const auto x = static_cast<double>(t);
        const double y = std::log(curve.survival(t));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used < 2) return false;
    const auto m = static_cast<double>(used);
    slope_out = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return true;
}

struct ConcentrationStart {
    int64_t k0 = 0;
    int64_t recorded = 0;
    int64_t escapes = 0;
    double escape_fraction = 0.0;
    double mean_density = 0.0;
};

struct ConcentrationReport {
    int64_t n = 0;
    int64_t steps = 0;
    int64_t burnin = 0;
    double eps = 0.0;
    ConcentrationStart from_empty; // k0 = 0
    ConcentrationStart from_full;  // k0 = N-1
};

// Drives the complete-graph chain from both extreme starts and reports the
// fraction of recorded states outside [(1/2-eps)N, (1/2+eps)N] along with
// the empirical mean density.
inline ConcentrationReport concentration_check(int64_t n, int64_t steps, int64_t burnin,
                                               double eps, uint64_t seed,
                                               uint64_t step_cap = kDefaultStepCap) {
    if (!(eps > 0.0 && eps <= 0.5)) throw BadParameter("eps must lie in (0, 1/2]");
    if (steps <= burnin) throw BadParameter("steps must exceed burnin");
    ConcentrationReport report;
    report.n = n;
    report.steps = steps;
    report.burnin = burnin;
    report.eps = eps;

    const double lo = (0.5 - eps) * static_cast<double>(n) - 1e-9;
    const double hi = (0.5 + eps) * static_cast<double>(n) + 1e-9;
    const int64_t starts[2] = {0, n - 1};
    ConcentrationStart* outs[2] = {&report.from_empty, &report.from_full};
    for (int s = 0; s < 2; ++s) {
        const MacroTrace trace = drive(n, starts[s], steps, burnin, 1,
                                       derive_seed(seed, static_cast<uint64_t>(s)), step_cap);
        ConcentrationStart& out = *outs[s];
        out.k0 = starts[s];
        out.recorded = static_cast<int64_t>(trace.xi.size());
        int64_t sum = 0;
        for (int64_t xi : trace.xi) {
            sum += xi;
            const auto v = static_cast<double>(xi);
            if (v < lo || v > hi) ++out.escapes;
        }
        out.escape_fraction =
            static_cast<double>(out.escapes) / static_cast<double>(out.recorded);
        out.mean_density = static_cast<double>(sum) /
                           (static_cast<double>(out.recorded) * static_cast<double>(n));
    }
    return report;
}

struct DominationReport {
    int64_t n = 0;
    int64_t k = 0;
    int64_t trials = 0;
    double geometric_p = 0.0;
    std::map<int64_t, int64_t> counts; // histogram of 2 - delta(xi)
    bool dominated = true;
    double worst_margin = 0.0; // min over l of F_emp(l) - (F_geo(l) - 4 se)
};

// Checks that the empirical CDF of 2 - delta(xi_0) from k particles sits
// above the Geometric(p) CDF (support {1, 2, ...}) pointwise, with a
// 4-standard-error allowance.
inline DominationReport geometric_domination_check(int64_t n, int64_t k, int64_t trials,
                                                   double geometric_p, uint64_t seed,
                                                   int workers = 1,
                                                   uint64_t step_cap = kDefaultStepCap) {
    if (!(geometric_p > 0.0 && geometric_p < 1.0))
        throw BadParameter("geometric parameter must lie in (0, 1)");
    if (trials < 1) throw BadParameter("need at least one trial");
    std::vector<std::map<int64_t, int64_t>> partial(static_cast<size_t>(workers));
    parallel_blocks(trials, workers, [&](int worker, int64_t begin, int64_t end) {
        auto& counts = partial[static_cast<size_t>(worker)];
        for (int64_t t = begin; t < end; ++t) {
            SplitMix64 rng(derive_seed(seed, static_cast<uint64_t>(t)));
            const int64_t delta = macro_step_complete(k, n, rng, step_cap) - k;
            ++counts[2 - delta];
        }
    });

    DominationReport report;
    report.n = n;
    report.k = k;
    report.trials = trials;
    report.geometric_p = geometric_p;
    for (const auto& block : partial)
        for (const auto& [value, c] : block) report.counts[value] += c;

    const int64_t max_value = report.counts.rbegin()->first;
    int64_t cumulative = 0;
    auto it = report.counts.begin();
    report.worst_margin = 1.0;
    for (int64_t level = 1; level <= max_value; ++level) {
        while (it != report.counts.end() && it->first <= level) {
            cumulative += it->second;
            ++it;
        }
        const double f_emp = static_cast<double>(cumulative) / static_cast<double>(trials);
        const double f_geo = 1.0 - std::pow(1.0 - geometric_p, static_cast<double>(level));
        const double se = std::sqrt(f_emp * (1.0 - f_emp) / static_cast<double>(trials));
        const double margin = f_emp - (f_geo - 4.0 * se);
        if (margin < report.worst_margin) report.worst_margin = margin;
        if (margin < 0.0) report.dominated = false;
    }
    return report;
}

struct GenericDensityReport {
    int64_t n = 0;
    int threshold = 2;
    int64_t steps = 0;
    int64_t burnin = 0;
    double mean_density = 0.0;
    double conjectured_density = 0.0;
};

// Mean stationary density of the threshold-k chain on the complete graph,
// driven through the general-graph dynamics, reported against the
// conjectured value (k-1)/2. Exploratory: the limit is expected, not
// proved.
inline GenericDensityReport generic_density_check(int64_t n, int threshold, int64_t steps,
                                                  int64_t burnin, uint64_t seed,
                                                  uint64_t step_cap = kDefaultStepCap) {
    if (steps <= burnin) throw BadParameter("steps must exceed burnin");
    const GraphTopology graph = complete_graph(static_cast<int>(n));
    const MacroTrace trace =
        drive_general(graph, threshold, 0, steps, burnin, 1, seed, false, step_cap);
    GenericDensityReport report;
    report.n = n;
    report.threshold = threshold;
    report.steps = steps;
    report.burnin = burnin;
    report.conjectured_density = (threshold - 1) / 2.0;
    int64_t sum = 0;
    for (int64_t xi : trace.xi) sum += xi;
    report.mean_density = static_cast<double>(sum) /
                          (static_cast<double>(trace.xi.size()) * static_cast<double>(n));
    return report;
}

} // namespace sandpile
