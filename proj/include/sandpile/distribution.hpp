#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"

namespace sandpile {

// Finite probability distribution over an ordered support. States are
// either ConfigKey vectors (stable configurations) or plain integers
// (particle counts, absorption values).
template <typename State>
struct Distribution {
    std::vector<State> support; // strictly increasing
    std::vector<double> mass;

    double mass_of(const State& s) const {
        const auto it = std::lower_bound(support.begin(), support.end(), s);
        if (it == support.end() || *it != s) return 0.0;
        return mass[static_cast<size_t>(it - support.begin())];
    }
};

// Sorts, merges duplicates, clamps round-off negatives, drops zero-mass
// states, verifies the total mass and rescales it to exactly one.
template <typename State>
Distribution<State> finalize_distribution(std::map<State, double> accum) {
    Distribution<State> dist;
    dist.support.reserve(accum.size());
    dist.mass.reserve(accum.size());
    double total = 0.0;
    for (auto& [state, p] : accum) {
        if (p < -1e-12)
            throw NumericalFailure("distribution mass " + std::to_string(p) +
                                   " is negative beyond round-off");
        if (p <= 0.0) continue;
        dist.support.push_back(state);
        dist.mass.push_back(p);
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-11)
        throw NumericalFailure("distribution mass totals " + std::to_string(total));
    for (double& p : dist.mass) p /= total;
    return dist;
}

// Empirical counterpart: normalizes raw counts.
template <typename State>
Distribution<State> distribution_from_counts(const std::map<State, int64_t>& counts) {
    Distribution<State> dist;
    int64_t total = 0;
    for (const auto& [state, c] : counts) total += c;
    if (total <= 0) throw BadParameter("empirical distribution needs at least one sample");
    for (const auto& [state, c] : counts) {
        dist.support.push_back(state);
        dist.mass.push_back(static_cast<double>(c) / static_cast<double>(total));
    }
    return dist;
}

// Stable configurations are keyed by their eta vector followed by their
// residue vector, so configurations that differ only in paused-site
// residues stay distinct.
using ConfigKey = std::vector<int>;

inline ConfigKey config_key(const Config& cfg) {
    ConfigKey key;
    key.reserve(cfg.eta.size() * 2);
    key.insert(key.end(), cfg.eta.begin(), cfg.eta.end());
    key.insert(key.end(), cfg.h_residue.begin(), cfg.h_residue.end());
    return key;
}

inline Config key_to_config(const ConfigKey& key, int threshold) {
    Config cfg;
    cfg.threshold = threshold;
    const size_t n = key.size() / 2;
    cfg.eta.assign(key.begin(), key.begin() + n);
    cfg.h_residue.assign(key.begin() + n, key.end());
    return cfg;
}

// Projects a configuration law to the law of the total particle count.
inline Distribution<int64_t> project_to_counts(const Distribution<ConfigKey>& dist) {
    std::map<int64_t, double> accum;
    for (size_t i = 0; i < dist.support.size(); ++i) {
        const auto& key = dist.support[i];
        int64_t count = 0;
        for (size_t x = 0; x < key.size() / 2; ++x) count += key[x];
        accum[count] += dist.mass[i];
    }
    Distribution<int64_t> out;
    for (const auto& [count, p] : accum) {
        out.support.push_back(count);
        out.mass.push_back(p);
    }
    return out;
}

// Total-variation distance; supports are aligned, missing states carry
// mass zero.
template <typename State>
double tv_distance(const Distribution<State>& p, const Distribution<State>& q) {
    double sum = 0.0;
    size_t i = 0;
    size_t j = 0;
    while (i < p.support.size() || j < q.support.size()) {
        if (j >= q.support.size() || (i < p.support.size() && p.support[i] < q.support[j])) {
            sum += std::abs(p.mass[i]);
            ++i;
        } else if (i >= p.support.size() || q.support[j] < p.support[i]) {
            sum += std::abs(q.mass[j]);
            ++j;
        } else {
            sum += std::abs(p.mass[i] - q.mass[j]);
            ++i;
            ++j;
        }
    }
    return 0.5 * sum;
}

} // namespace sandpile
