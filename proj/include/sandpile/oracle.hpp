#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sandpile/chains.hpp"
#include "sandpile/distribution.hpp"
#include "sandpile/dynamics.hpp"
#include "sandpile/errors.hpp"
#include "sandpile/graph.hpp"
#include "sandpile/linalg.hpp"
#include "sandpile/rng.hpp"

namespace sandpile {

inline constexpr size_t kDefaultStateCap = 2'000'000;
// Past this many transient states the dense factorization stops being a
// desk-scale computation.
inline constexpr size_t kDenseSolveCap = 8192;

namespace detail {

struct KeyHash {
    size_t operator()(const std::vector<int>& v) const {
        uint64_t h = kGolden ^ (static_cast<uint64_t>(v.size()) << 32);
        for (int x : v)
            h = mix64(h + kGolden * (static_cast<uint64_t>(static_cast<uint32_t>(x)) + 1));
        return static_cast<size_t>(h);
    }
};

} // namespace detail

// Exact distribution of stabilization outcomes, computed on the absorbing
// Markov chain whose step half-topples the scheduled unstable site to a
// uniformly chosen adjacency slot. Drawing a fresh independent slot at
// every step is faithful to the fixed-instruction-array model because a
// stabilization consumes each array entry (x, j) at most once, and entries
// are i.i.d.; do not reuse this reasoning for replayed streams. By the
// Abelian property the resulting law does not depend on the schedule,
// which the tests verify by comparing the two supported schedules.
//
// Chain states are (eta, residues) vectors, extended by the pending-site
// queue when the FIFO schedule is selected. Several initial configurations
// can share one exploration and one matrix factorization.
class StabilizationOracle {
  public:
    StabilizationOracle(const GraphTopology& graph, int threshold,
                        OrderKind order = OrderKind::LowestIndex,
                        size_t state_cap = kDefaultStateCap)
        : graph_(&graph), n_(graph.vertex_count()), k_(threshold), order_(order),
          cap_(state_cap) {
        if (threshold < 2) throw BadParameter("threshold must be >= 2");
        if (order == OrderKind::UniformRandom)
            throw BadParameter("the exact oracle schedules LowestIndex or FifoQueue only");
    }

    Distribution<ConfigKey> distribution(const Config& initial) {
        return distributions({initial}).front();
    }

    std::vector<Distribution<ConfigKey>> distributions(const std::vector<Config>& initials) {
        std::vector<int> roots;
        roots.reserve(initials.size());
        for (const auto& cfg : initials) {
            validate_config(*graph_, cfg);
            if (cfg.threshold != k_) throw BadParameter("threshold mismatch with oracle");
            roots.push_back(intern(encode(cfg)));
        }
        explore();
        factor();

        std::vector<Distribution<ConfigKey>> out;
        out.reserve(roots.size());
        for (int root : roots) out.push_back(absorption_law(root));
        return out;
    }

  private:
    using Key = std::vector<int>;

    bool unstable_in(const Key& key, int x) const {
        return key[x] >= 1 && (key[x] >= k_ || key[n_ + x] != 0);
    }

    int pick_site(const Key& key) const {
        if (order_ == OrderKind::FifoQueue)
            return key.size() > static_cast<size_t>(2 * n_) ? key[2 * n_] : -1;
        for (int x = 0; x < n_; ++x)
            if (unstable_in(key, x)) return x;
        return -1;
    }

    Key encode(const Config& cfg) const {
        Key key;
        key.reserve(2 * n_ + n_);
        key.insert(key.end(), cfg.eta.begin(), cfg.eta.end());
        key.insert(key.end(), cfg.h_residue.begin(), cfg.h_residue.end());
        if (order_ == OrderKind::FifoQueue)
            for (int x = 0; x < n_; ++x)
                if (unstable_in(key, x)) key.push_back(x);
        return key;
    }

    // State after half-toppling x toward dest, mirroring the dynamics
    // module's queue discipline for the FIFO schedule.
    Key apply(const Key& key, int x, int dest) const {
        Key next(key.begin(), key.begin() + 2 * n_);
        next[x] -= 1;
        next[n_ + x] = (next[n_ + x] + 1) % k_;
        if (dest != graph_->sink()) next[dest] += 1;
        if (order_ == OrderKind::FifoQueue) {
            std::vector<int> queue(key.begin() + 2 * n_ + 1, key.end());
            auto queued = [&](int v) {
                return std::find(queue.begin(), queue.end(), v) != queue.end();
            };
            auto unstable = [&](int v) { return unstable_in(next, v); };
            if (dest != graph_->sink() && !queued(dest) && unstable(dest))
                queue.push_back(dest);
            if (!queued(x) && unstable(x)) queue.push_back(x);
            next.insert(next.end(), queue.begin(), queue.end());
        }
        return next;
    }

    int intern(Key key) {
        const auto [it, inserted] = index_.try_emplace(std::move(key), static_cast<int>(keys_.size()));
        if (inserted) {
            if (keys_.size() >= cap_)
                throw StateCapExceeded("stabilization chain exceeds " + std::to_string(cap_) +
                                       " states");
            keys_.push_back(it->first);
            frontier_.push_back(it->second);
        }
        return it->second;
    }

    void explore() {
        while (!frontier_.empty()) {
            const int id = frontier_.front();
            frontier_.pop_front();
            const Key key = keys_[id]; // copy: interning successors may rehash
            const int x = pick_site(key);
            if (x < 0) {
                absorbing_of_[id] = intern_absorbing(Key(key.begin(), key.begin() + 2 * n_));
                continue;
            }
            if (transient_of_.count(id)) continue;
            const int tid = static_cast<int>(t_rows_.size());
            transient_of_[id] = tid;
            if (t_rows_.size() >= kDenseSolveCap)
                throw StateCapExceeded("transient block exceeds the dense solver cap of " +
                                       std::to_string(kDenseSolveCap));
            t_rows_.emplace_back();
            a_rows_.emplace_back();

            const double p = 1.0 / graph_->degree(x);
            std::map<int, int> dest_count;
            for (int dest : graph_->neighbors(x)) ++dest_count[dest];
            for (const auto& [dest, count] : dest_count) {
                const int succ = intern(apply(key, x, dest));
                // successor rows are resolved after exploration
                pending_.push_back({tid, succ, p * count});
            }
        }
        // Split pending edges into transient and absorbing columns.
        for (const auto& edge : pending_) {
            const auto t_it = transient_of_.find(edge.to);
            if (t_it != transient_of_.end()) {
                t_rows_[edge.from].push_back({t_it->second, edge.prob});
            } else {
                a_rows_[edge.from].push_back({absorbing_of_.at(edge.to), edge.prob});
            }
        }
        pending_.clear();
    }

    int intern_absorbing(Key stable_key) {
        const auto [it, inserted] =
            absorbing_index_.try_emplace(std::move(stable_key),
                                         static_cast<int>(absorbing_keys_.size()));
        if (inserted) absorbing_keys_.push_back(it->first);
        return it->second;
    }

    void factor() {
        const int nt = static_cast<int>(t_rows_.size());
        if (nt == 0) return;
        // A = (I - T)^T, so one factorization serves every start vector.
        std::vector<double> a(static_cast<size_t>(nt) * nt, 0.0);
        for (int i = 0; i < nt; ++i) a[static_cast<size_t>(i) * nt + i] = 1.0;
        for (int i = 0; i < nt; ++i)
            for (const auto& [j, p] : t_rows_[i]) a[static_cast<size_t>(j) * nt + i] -= p;
        lu_ = std::make_unique<DenseLU>(std::move(a), nt);
    }

    Distribution<ConfigKey> absorption_law(int root) {
        std::map<ConfigKey, double> law;
        const auto direct = absorbing_of_.find(root);
        if (direct != absorbing_of_.end()) {
            law[absorbing_keys_[direct->second]] = 1.0;
            return finalize_distribution(std::move(law));
        }
        const int nt = static_cast<int>(t_rows_.size());
        std::vector<double> e(nt, 0.0);
        e[transient_of_.at(root)] = 1.0;
        const std::vector<double> visits = lu_->solve(e); // expected visit counts
        for (int i = 0; i < nt; ++i) {
            if (visits[i] == 0.0) continue;
            for (const auto& [aid, p] : a_rows_[i])
                law[absorbing_keys_[aid]] += visits[i] * p;
        }
        return finalize_distribution(std::move(law));
    }

    struct Edge {
        int from; // transient id
        int to;   // state id
        double prob;
    };

    const GraphTopology* graph_;
    int n_;
    int k_;
    OrderKind order_;
    size_t cap_;

    std::unordered_map<Key, int, detail::KeyHash> index_;
    std::vector<Key> keys_;
    std::deque<int> frontier_;
    std::unordered_map<int, int> transient_of_;
    std::unordered_map<int, int> absorbing_of_;
    std::unordered_map<Key, int, detail::KeyHash> absorbing_index_;
    std::vector<Key> absorbing_keys_;
    std::vector<std::vector<std::pair<int, double>>> t_rows_;
    std::vector<std::vector<std::pair<int, double>>> a_rows_;
    std::vector<Edge> pending_;
    std::unique_ptr<DenseLU> lu_;
};

// Exact law of the stable configuration reached from `initial`.
inline Distribution<ConfigKey> stabilization_distribution(
    const GraphTopology& graph, const Config& initial,
    OrderKind order = OrderKind::LowestIndex, size_t state_cap = kDefaultStateCap) {
    StabilizationOracle oracle(graph, initial.threshold, order, state_cap);
    return oracle.distribution(initial);
}

// Row-stochastic transition matrix of the driven-dissipative chain over
// the k^|V| stable configurations (all residues zero), with particle
// addition uniform on V united with the sink: N = |V| + 1.
struct TransitionMatrix {
    int threshold = 2;
    std::vector<ConfigKey> states; // lexicographic
    std::vector<double> q;         // row-major

    int size() const { return static_cast<int>(states.size()); }
    double at(int row, int col) const {
        return q[static_cast<size_t>(row) * states.size() + col];
    }
};

inline TransitionMatrix transition_matrix(const GraphTopology& graph, int threshold,
                                          size_t state_cap = kDefaultStateCap) {
    if (threshold < 2) throw BadParameter("threshold must be >= 2");
    const int n = graph.vertex_count();
    double count = 1.0;
    for (int i = 0; i < n; ++i) count *= threshold;
    if (count > static_cast<double>(std::min(state_cap, kDenseSolveCap)))
        throw StateCapExceeded("k^|V| stable configurations exceed the cap");
    const auto n_states = static_cast<size_t>(count);

    TransitionMatrix tm;
    tm.threshold = threshold;
    tm.states.reserve(n_states);
    std::unordered_map<ConfigKey, int, detail::KeyHash> state_index;
    ConfigKey key(2 * n, 0);
    for (size_t i = 0; i < n_states; ++i) {
        state_index.emplace(key, static_cast<int>(tm.states.size()));
        tm.states.push_back(key);
        for (int digit = n - 1; digit >= 0; --digit) {
            if (++key[digit] < threshold) break;
            key[digit] = 0;
        }
    }

    StabilizationOracle oracle(graph, threshold, OrderKind::LowestIndex, state_cap);
    std::vector<Config> starts;
    starts.reserve(n_states * n);
    for (const auto& state : tm.states) {
        Config cfg = key_to_config(state, threshold);
        for (int x = 0; x < n; ++x) {
            Config bumped = cfg;
            ++bumped.eta[x];
            starts.push_back(std::move(bumped));
        }
    }
    const auto laws = oracle.distributions(starts);

    const double add_prob = 1.0 / (n + 1); // uniform on V and the sink
    tm.q.assign(n_states * n_states, 0.0);
    for (size_t i = 0; i < n_states; ++i) {
        tm.q[i * n_states + i] += add_prob; // lazy step: particle lands in the sink
        for (int x = 0; x < n; ++x) {
            const auto& law = laws[i * n + x];
            for (size_t s = 0; s < law.support.size(); ++s) {
                const auto it = state_index.find(law.support[s]);
                if (it == state_index.end())
                    throw NumericalFailure("stabilization from a clean start left a residue");
                tm.q[i * n_states + it->second] += add_prob * law.mass[s];
            }
        }
    }
    return tm;
}

// Solves pi Q = pi, sum(pi) = 1 for an irreducible row-stochastic matrix.
inline Distribution<ConfigKey> stationary_distribution(const TransitionMatrix& tm) {
    const int n = tm.size();
    if (n == 0) throw BadParameter("empty transition matrix");
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += tm.at(i, j);
        if (std::abs(row - 1.0) > 1e-12)
            throw BadParameter("transition matrix row " + std::to_string(i) +
                               " sums to " + std::to_string(row));
    }

    // Reachability scan in both directions certifies irreducibility.
    const auto reach = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < n; ++w) {
                const double p = forward ? tm.at(v, w) : tm.at(w, v);
                if (p > 1e-15 && !seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
        return seen;
    };
    for (const bool forward : {true, false})
        for (char seen : reach(forward))
            if (!seen) throw NotIrreducible("transition matrix is not irreducible");

    // (Q^T - I) pi = 0 with the first equation replaced by normalization.
    std::vector<double> a(static_cast<size_t>(n) * n);
    std::vector<double> b(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<size_t>(i) * n + j] = tm.at(j, i) - (i == j ? 1.0 : 0.0);
    for (int j = 0; j < n; ++j) a[j] = 1.0;
    b[0] = 1.0;
    const std::vector<double> pi = DenseLU(std::move(a), n).solve(b);

    double residual = 0.0;
    for (int j = 0; j < n; ++j) {
        double col = 0.0;
        for (int i = 0; i < n; ++i) col += pi[i] * tm.at(i, j);
        residual = std::max(residual, std::abs(col - pi[j]));
    }
    if (residual > 1e-12)
        throw NumericalFailure("stationary solve residual " + std::to_string(residual));

    std::map<ConfigKey, double> law;
    for (int i = 0; i < n; ++i) law[tm.states[i]] = pi[i];
    return finalize_distribution(std::move(law));
}

// Exact output law of the exact sampler: stabilizations of eta = k-1
// everywhere, averaged over the k^|V| equiprobable initial residue
// vectors.
inline Distribution<ConfigKey> sampler_distribution(const GraphTopology& graph, int threshold,
                                                    size_t state_cap = kDefaultStateCap) {
    if (threshold < 2) throw BadParameter("threshold must be >= 2");
    const int n = graph.vertex_count();
    double count = 1.0;
    for (int i = 0; i < n; ++i) count *= threshold;
    if (count > static_cast<double>(state_cap))
        throw StateCapExceeded("k^|V| initial residue vectors exceed the cap");
    const auto n_inits = static_cast<size_t>(count);

    StabilizationOracle oracle(graph, threshold, OrderKind::LowestIndex, state_cap);
    std::vector<Config> starts;
    starts.reserve(n_inits);
    Config cfg = make_config(graph, threshold);
    cfg.eta.assign(n, threshold - 1);
    for (size_t i = 0; i < n_inits; ++i) {
        starts.push_back(cfg);
        for (int digit = n - 1; digit >= 0; --digit) {
            if (++cfg.h_residue[digit] < threshold) break;
            cfg.h_residue[digit] = 0;
        }
    }
    const auto laws = oracle.distributions(starts);

    std::map<ConfigKey, double> law;
    const double weight = 1.0 / static_cast<double>(n_inits);
    for (const auto& branch : laws)
        for (size_t s = 0; s < branch.support.size(); ++s)
            law[branch.support[s]] += weight * branch.mass[s];
    return finalize_distribution(std::move(law));
}

// Exact law of X at absorption for the microscopic chain started from
// (x0, y0). Levels of constant x are birth-death chains in y, so the law
// is computed by sweeping x downward with one tridiagonal solve per level
// for the expected visit counts.
inline Distribution<int64_t> micro_absorption_distribution(
    int64_t n, int64_t x0, int64_t y0, size_t state_cap = kDefaultStateCap) {
    check_micro_state({x0, y0, n});
    std::map<int64_t, double> law;
    if (y0 == 0) {
        law[x0] = 1.0;
        return finalize_distribution(std::move(law));
    }

    size_t states = 0;
    std::vector<double> inflow; // indexed by y - y_min at the current level
    for (int64_t x = x0; x >= 1; --x) {
        const int64_t y_min = std::max<int64_t>(1, x - (n - 1));
        const auto m = static_cast<size_t>(x - y_min + 1);
        states += m;
        if (states > state_cap)
            throw StateCapExceeded("microscopic state space exceeds the cap");

        std::vector<double> w(m, 0.0);
        if (x == x0) w[static_cast<size_t>(y0 - y_min)] = 1.0;
        if (x < x0) w.swap(inflow);
        bool empty = true;
        for (double v : w)
            if (v != 0.0) empty = false;
        if (empty) {
            inflow.assign(static_cast<size_t>(x - 1 - std::max<int64_t>(1, x - n) + 1), 0.0);
            continue;
        }

        const auto dn = static_cast<double>(n);
        // visits v solve (I - T)^T v = w for the in-level walk T
        std::vector<double> diag(m, 1.0);
        std::vector<double> lower(m > 1 ? m - 1 : 0);
        std::vector<double> upper(m > 1 ? m - 1 : 0);
        for (size_t i = 0; i + 1 < m; ++i) {
            const int64_t y = y_min + static_cast<int64_t>(i);
            lower[i] = -static_cast<double>(x - y) / dn;            // up-move y -> y+1
            upper[i] = -static_cast<double>(n - 1 - x + y + 1) / dn; // down-move y+1 -> y
        }
        const std::vector<double> visits =
            solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper), std::move(w));

        const int64_t next_y_min = std::max<int64_t>(1, x - n);
        std::vector<double> next(x - 1 >= 1
                                     ? static_cast<size_t>(x - 1 - next_y_min + 1)
                                     : 0,
                                 0.0);
        for (size_t i = 0; i < m; ++i) {
            const int64_t y = y_min + static_cast<int64_t>(i);
            const double sink_flux = visits[i] / dn;
            if (y == 1) {
                law[x] += visits[i] * static_cast<double>(n - x) / dn; // falls asleep, done
                law[x - 1] += sink_flux; // last active particle exits
            } else {
                next[static_cast<size_t>(y - 1 - next_y_min)] += sink_flux;
            }
        }
        inflow.swap(next);
    }
    return finalize_distribution(std::move(law));
}

// Exact stationary law of the complete-graph chain over particle counts.
// All stable configurations with equal counts are exchangeable there, so
// the count chain built from the microscopic absorption laws is lossless;
// its state space is linear in N where the configuration space is 2^(N-1).
inline Distribution<int64_t> complete_graph_count_stationary(
    int64_t n, size_t state_cap = kDefaultStateCap) {
    if (n < 2) throw BadParameter("complete graph needs N >= 2");
    if (static_cast<size_t>(n) > kDenseSolveCap)
        throw StateCapExceeded("count chain exceeds the dense solver cap");
    const auto m = static_cast<size_t>(n);
    std::vector<double> q(m * m, 0.0);
    for (int64_t k = 0; k <= n - 1; ++k) {
        const auto law = micro_absorption_distribution(n, k + 1, 1, state_cap);
        for (size_t i = 0; i < law.support.size(); ++i) {
            // counts stay below N: the last jump from (N, 1) cannot be a
            // stalled one
            if (law.support[i] > n - 1)
                throw NumericalFailure("count chain stepped outside {0,...,N-1}");
            q[static_cast<size_t>(k) * m + static_cast<size_t>(law.support[i])] += law.mass[i];
        }
    }
    std::vector<double> a(m * m);
    std::vector<double> b(m, 0.0);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) a[i * m + j] = q[j * m + i] - (i == j ? 1.0 : 0.0);
    for (size_t j = 0; j < m; ++j) a[j] = 1.0;
    b[0] = 1.0;
    const std::vector<double> pi = DenseLU(std::move(a), static_cast<int>(m)).solve(b);

    double residual = 0.0;
    for (size_t j = 0; j < m; ++j) {
        double col = 0.0;
        for (size_t i = 0; i < m; ++i) col += pi[i] * q[i * m + j];
        residual = std::max(residual, std::abs(col - pi[j]));
    }
    if (residual > 1e-11)
        throw NumericalFailure("count-chain stationary residual " + std::to_string(residual));

    std::map<int64_t, double> law;
    for (size_t k = 0; k < m; ++k) law[static_cast<int64_t>(k)] = pi[k];
    return finalize_distribution(std::move(law));
}

inline double mean_of(const Distribution<int64_t>& dist) {
    double mean = 0.0;
    for (size_t i = 0; i < dist.support.size(); ++i)
        mean += static_cast<double>(dist.support[i]) * dist.mass[i];
    return mean;
}

// Exact one-step law of the driven-dissipative chain from a stable
// configuration, projected to total particle counts. On the complete graph
// this is the law the microscopic chain reproduces.
inline Distribution<int64_t> macro_step_count_distribution(const GraphTopology& graph,
                                                           const Config& from,
                                                           size_t state_cap = kDefaultStateCap) {
    validate_config(graph, from);
    if (!is_stable(from)) throw BadParameter("macro step requires a stable configuration");
    const int n = graph.vertex_count();
    StabilizationOracle oracle(graph, from.threshold, OrderKind::LowestIndex, state_cap);
    std::vector<Config> starts;
    starts.reserve(n);
    for (int x = 0; x < n; ++x) {
        Config bumped = from;
        ++bumped.eta[x];
        starts.push_back(std::move(bumped));
    }
    const auto laws = oracle.distributions(starts);

    const double add_prob = 1.0 / (n + 1);
    std::map<int64_t, double> law;
    law[total_particles(from)] += add_prob;
    for (const auto& branch : laws) {
        const auto counts = project_to_counts(branch);
        for (size_t s = 0; s < counts.support.size(); ++s)
            law[counts.support[s]] += add_prob * counts.mass[s];
    }
    return finalize_distribution(std::move(law));
}

} // namespace sandpile
