#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "assocnet/csv.hpp"
#include "assocnet/error.hpp"
#include "assocnet/netbuild.hpp"

namespace assocnet {

// Parameters of the spreading-activation process. Non-positive
// initial_activation / iterations mean "resolve from the network": a0 becomes
// the node count and T becomes twice the unweighted diameter.
struct ActivationParams {
    double retention = 0.5;
    double decay = 0.0;
    double suppress = 0.0;
    double initial_activation = 0.0;  // <= 0: auto (node count)
    int iterations = 0;               // <= 0: auto (2 * diameter)
    bool weighted = true;

    void validate() const {
        require(retention >= 0.0 && retention <= 1.0, "activation: retention must be in [0,1]");
        require(decay >= 0.0 && decay <= 1.0, "activation: decay must be in [0,1]");
    }
};

struct ActivationMatrix {
    std::vector<std::string> node_labels;
    std::vector<std::string> primes;            // column keys, duplicates allowed
    std::vector<std::vector<double>> columns;   // columns[j][node]

    std::size_t rows() const { return node_labels.size(); }
    std::size_t cols() const { return primes.size(); }
};

namespace detail {

constexpr NodeId kUnvisited = std::numeric_limits<NodeId>::max();

// BFS from src; fills hop distances, returns (farthest node, eccentricity).
inline std::pair<NodeId, NodeId> bfs(const SemanticNetwork& g, NodeId src,
                                     std::vector<NodeId>& dist,
                                     std::vector<NodeId>* parent = nullptr) {
    dist.assign(g.node_count(), kUnvisited);
    if (parent) parent->assign(g.node_count(), kUnvisited);
    std::vector<NodeId> frontier{src}, next;
    dist[src] = 0;
    NodeId level = 0;
    NodeId far = src;
    while (!frontier.empty()) {
        next.clear();
        for (NodeId u : frontier) {
            for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
                NodeId v = g.neighbors[k];
                if (dist[v] == kUnvisited) {
                    dist[v] = level + 1;
                    if (parent) (*parent)[v] = u;
                    next.push_back(v);
                }
            }
        }
        if (!next.empty()) {
            ++level;
            far = next.front();
        }
        frontier.swap(next);
    }
    return {far, level};
}

inline NodeId eccentricity(const SemanticNetwork& g, NodeId src, std::vector<NodeId>& scratch) {
    return bfs(g, src, scratch).second;
}

}  // namespace detail

// Exact unweighted diameter: a double sweep seeds the lower bound, then
// eccentricity-bounding refinement. Every BFS from a node w pins ecc(w) and
// tightens per-node bounds (d(w,v) <= ecc(v) <= ecc(w) + d(w,v)); nodes whose
// upper bound falls to the running maximum can never extend the diameter and
// drop out. Selection alternates between the most peripheral and the most
// central candidate, so central sweeps prune aggressively on small-diameter
// graphs. Throws on disconnected input.
inline int diameter(const SemanticNetwork& g) {
    const std::size_t n = g.node_count();
    require(n > 0, "diameter: empty network");
    if (n == 1) return 0;

    std::vector<NodeId> dist;
    std::vector<NodeId> ecc_lb(n, 0), ecc_ub(n, std::numeric_limits<NodeId>::max());
    NodeId diam_lb = 0;

    auto sweep = [&](NodeId w) {
        auto [far, ecc] = detail::bfs(g, w, dist);
        diam_lb = std::max(diam_lb, ecc);
        for (NodeId v = 0; v < n; ++v) {
            ecc_lb[v] = std::max({ecc_lb[v], dist[v],
                                  static_cast<NodeId>(ecc > dist[v] ? ecc - dist[v] : 0)});
            ecc_ub[v] = std::min(ecc_ub[v], ecc + dist[v]);
        }
        return far;
    };

    // max-degree start, then double sweep to a peripheral pair
    NodeId start = 0;
    for (NodeId i = 1; i < n; ++i)
        if (g.degree(i) > g.degree(start)) start = i;
    NodeId a = sweep(start);
    for (NodeId v = 0; v < n; ++v)
        require(dist[v] != detail::kUnvisited, "diameter: network is disconnected");
    sweep(a);

    // Alternate a peripheral probe (greatest upper bound, may raise the
    // diameter) with a central probe (largest-degree candidate, whose ball
    // prunes the most survivors).
    bool pick_peripheral = true;
    while (true) {
        NodeId chosen = n;
        std::uint64_t best_key = 0;
        for (NodeId v = 0; v < n; ++v) {
            if (ecc_ub[v] <= diam_lb || ecc_lb[v] == ecc_ub[v]) continue;  // settled
            const std::uint64_t key =
                pick_peripheral ? ecc_ub[v] : static_cast<std::uint64_t>(g.degree(v));
            if (chosen == n || key > best_key) {
                chosen = v;
                best_key = key;
            }
        }
        if (chosen == n) break;  // no candidate can exceed diam_lb
        sweep(chosen);
        ecc_ub[chosen] = ecc_lb[chosen];
        pick_peripheral = !pick_peripheral;
    }
    return static_cast<int>(diam_lb);
}

namespace detail {

// One propagation step: every node keeps r*a and scatters (1-r)*a to its
// neighbors proportionally to edge weight (or uniformly when unweighted),
// then decay is applied and entries below the suppress threshold drop to 0.
// Accumulation order is fixed (ascending node index) for bit reproducibility.
inline void spread_step(const SemanticNetwork& g, const ActivationParams& p,
                        const std::vector<double>& a, std::vector<double>& next) {
    const std::size_t n = g.node_count();
    const double r = p.retention;
    for (std::size_t v = 0; v < n; ++v) next[v] = r * a[v];
    for (NodeId u = 0; u < n; ++u) {
        if (a[u] == 0.0) continue;
        const double out = (1.0 - r) * a[u];
        if (out == 0.0) continue;
        const std::size_t b = g.offsets[u], e = g.offsets[u + 1];
        if (b == e) {
            next[u] += out;  // nowhere to send; an isolated node keeps everything
            continue;
        }
        if (p.weighted) {
            const double share = out / g.strengths[u];
            for (std::size_t k = b; k < e; ++k) next[g.neighbors[k]] += share * g.weights[k];
        } else {
            const double share = out / static_cast<double>(e - b);
            for (std::size_t k = b; k < e; ++k) next[g.neighbors[k]] += share;
        }
    }
    if (p.decay > 0.0) {
        const double keep = 1.0 - p.decay;
        for (double& x : next) x *= keep;
    }
    if (p.suppress > 0.0) {
        for (double& x : next)
            if (x < p.suppress) x = 0.0;
    }
}

}  // namespace detail

// Fills in auto parameters against a concrete network.
inline ActivationParams resolve_params(const SemanticNetwork& g, ActivationParams p) {
    p.validate();
    if (p.initial_activation <= 0.0)
        p.initial_activation = static_cast<double>(g.node_count());
    if (p.iterations <= 0) p.iterations = std::max(1, 2 * diameter(g));
    return p;
}

namespace detail {

inline std::vector<double> spread_indexed(const SemanticNetwork& g, NodeId prime,
                                          const ActivationParams& resolved) {
    std::vector<double> a(g.node_count(), 0.0), next(g.node_count(), 0.0);
    a[prime] = resolved.initial_activation;
    for (int t = 0; t < resolved.iterations; ++t) {
        spread_step(g, resolved, a, next);
        a.swap(next);
    }
    return a;
}

}  // namespace detail

// Final activation levels after T steps from a single activated prime.
inline std::vector<double> spread(const SemanticNetwork& g, std::string_view prime,
                                  const ActivationParams& p) {
    NodeId idx = g.find(prime);
    require(idx != g.node_count(), "activation: prime '", prime, "' is not in the network");
    return detail::spread_indexed(g, idx, resolve_params(g, p));
}

// One column per prime; columns are independent, so parallel scheduling does
// not change the result. Unknown primes are rejected before any work starts.
inline ActivationMatrix spread_batch(const SemanticNetwork& g,
                                     const std::vector<std::string>& primes,
                                     const ActivationParams& p, unsigned threads = 0) {
    std::vector<NodeId> idx(primes.size());
    for (std::size_t j = 0; j < primes.size(); ++j) {
        idx[j] = g.find(primes[j]);
        require(idx[j] != g.node_count(), "activation: prime '", primes[j],
                "' is not in the network");
    }
    const ActivationParams resolved = resolve_params(g, p);

    ActivationMatrix m;
    m.node_labels = g.labels;
    m.primes = primes;
    m.columns.resize(primes.size());

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, primes.empty() ? 1 : primes.size());
    if (threads <= 1 || primes.size() <= 1) {
        for (std::size_t j = 0; j < primes.size(); ++j)
            m.columns[j] = detail::spread_indexed(g, idx[j], resolved);
        return m;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t j = cursor.fetch_add(1);
                if (j >= primes.size()) break;
                m.columns[j] = detail::spread_indexed(g, idx[j], resolved);
            }
        });
    }
    for (auto& th : pool) th.join();
    return m;
}

// CSV: first column node label, one column per prime.
inline void write_activation_csv(const ActivationMatrix& m, const std::filesystem::path& path) {
    auto out = open_output(path.string());
    std::vector<std::string> header{"node"};
    header.insert(header.end(), m.primes.begin(), m.primes.end());
    write_csv_row(out, header);
    std::vector<std::string> row(m.cols() + 1);
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        row[0] = m.node_labels[i];
        for (std::size_t j = 0; j < m.cols(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m.columns[j][i]);
            require(ec == std::errc(), "activation: number formatting failed");
            row[j + 1].assign(buf, ptr);
        }
        write_csv_row(out, row);
    }
    require(out.good(), "activation: write failed: ", path.string());
}

}  // namespace assocnet
