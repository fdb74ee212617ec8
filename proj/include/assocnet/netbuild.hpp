#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "assocnet/csv.hpp"
#include "assocnet/error.hpp"
#include "assocnet/lexicon.hpp"
#include "assocnet/norms.hpp"
#include "assocnet/text.hpp"

#include <json.hpp>

namespace assocnet {

using NodeId = std::uint32_t;

namespace detail {
inline std::uint64_t pack_pair(NodeId a, NodeId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}
}  // namespace detail

// Cue -> response arcs with occurrence counts. Intermediate product of
// build_directed; labels are sorted so node ids are deterministic.
struct DirectedGraph {
    std::vector<std::string> labels;
    std::unordered_map<std::uint64_t, std::uint32_t> arcs;  // (src<<32|dst) -> weight

    std::size_t node_count() const { return labels.size(); }
    std::size_t arc_count() const { return arcs.size(); }
};

// Undirected weighted graph in compressed sparse adjacency form. Labels are
// sorted lexicographically; neighbor lists are sorted ascending. Immutable
// once built; safe for concurrent reads.
struct SemanticNetwork {
    std::vector<std::string> labels;
    std::vector<std::size_t> offsets;     // size node_count()+1
    std::vector<NodeId> neighbors;
    std::vector<std::uint32_t> weights;   // parallel to neighbors
    std::vector<double> strengths;        // per-node sum of incident weights

    struct Metadata {
        std::string source;
        std::vector<std::string> filters;
    } metadata;

    std::size_t node_count() const { return labels.size(); }
    std::size_t edge_count() const { return neighbors.size() / 2; }
    std::size_t degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }

    // Index of `label`, or node_count() when absent.
    NodeId find(std::string_view label) const {
        auto it = std::lower_bound(labels.begin(), labels.end(), label);
        if (it != labels.end() && *it == label)
            return static_cast<NodeId>(it - labels.begin());
        return static_cast<NodeId>(labels.size());
    }
    bool contains(std::string_view label) const { return find(label) != labels.size(); }
};

struct NetStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    double density = 0.0;     // 2E / (N(N-1))
    double avg_degree = 0.0;  // 2E / N

    nlohmann::json to_json() const {
        return {{"nodes", nodes}, {"edges", edges}, {"density", density},
                {"avg_degree", avg_degree}};
    }
};

// Pairwise node/edge containment percentages; edge comparison is restricted
// to the subgraphs induced on the common node set, weights ignored.
struct OverlapReport {
    struct Side {
        std::size_t size_a = 0, size_b = 0, common = 0;
        double pct_a_not_in_b = 0.0, pct_common_of_union = 0.0, pct_b_not_in_a = 0.0;
    };
    Side nodes;
    Side edges;

    nlohmann::json to_json() const {
        auto side = [](const Side& s) {
            return nlohmann::json{{"size_a", s.size_a},
                                  {"size_b", s.size_b},
                                  {"common", s.common},
                                  {"pct_a_not_in_b", s.pct_a_not_in_b},
                                  {"pct_common_of_union", s.pct_common_of_union},
                                  {"pct_b_not_in_a", s.pct_b_not_in_a}};
        };
        return {{"nodes", side(nodes)}, {"edges", side(edges)}};
    }
};

namespace detail {

// Assembles CSR from unique undirected edges (u < v).
inline SemanticNetwork build_csr(std::vector<std::string> labels,
                                 std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> edges,
                                 SemanticNetwork::Metadata metadata) {
    SemanticNetwork net;
    net.labels = std::move(labels);
    net.metadata = std::move(metadata);
    const std::size_t n = net.labels.size();
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [u, v, w] : edges) {
        ++deg[u];
        ++deg[v];
    }
    net.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) net.offsets[i + 1] = net.offsets[i] + deg[i];
    net.neighbors.resize(net.offsets[n]);
    net.weights.resize(net.offsets[n]);
    std::vector<std::size_t> fill(net.offsets.begin(), net.offsets.end() - 1);
    std::sort(edges.begin(), edges.end());
    for (const auto& [u, v, w] : edges) {
        net.neighbors[fill[u]] = v;
        net.weights[fill[u]++] = w;
        net.neighbors[fill[v]] = u;
        net.weights[fill[v]++] = w;
    }
    // rows touched in ascending (u,v) order leave each list sorted except for
    // the back-references; one pass fixes them
    for (std::size_t i = 0; i < n; ++i) {
        auto b = net.offsets[i], e = net.offsets[i + 1];
        std::vector<std::pair<NodeId, std::uint32_t>> row;
        row.reserve(e - b);
        for (std::size_t k = b; k < e; ++k) row.emplace_back(net.neighbors[k], net.weights[k]);
        std::sort(row.begin(), row.end());
        for (std::size_t k = b; k < e; ++k) {
            net.neighbors[k] = row[k - b].first;
            net.weights[k] = row[k - b].second;
        }
    }
    net.strengths.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = net.offsets[i]; k < net.offsets[i + 1]; ++k)
            net.strengths[i] += net.weights[k];
    return net;
}

}  // namespace detail

// General in-memory constructor: labels may include isolated nodes; edges are
// (label, label, weight) with distinct endpoints.
inline SemanticNetwork make_network(
    std::vector<std::string> labels,
    const std::vector<std::tuple<std::string, std::string, std::uint32_t>>& edges,
    SemanticNetwork::Metadata metadata = {}) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    std::unordered_map<std::string, NodeId> index;
    index.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        index.emplace(labels[i], static_cast<NodeId>(i));
    std::unordered_map<std::uint64_t, std::uint32_t> merged;
    for (const auto& [a, b, w] : edges) {
        auto ia = index.find(a), ib = index.find(b);
        require(ia != index.end() && ib != index.end(),
                "network: edge endpoint not in label set: ", a, " -- ", b);
        require(ia->second != ib->second, "network: self-loop not permitted: ", a);
        require(w >= 1, "network: edge weight must be >= 1: ", a, " -- ", b);
        NodeId u = std::min(ia->second, ib->second), v = std::max(ia->second, ib->second);
        auto [it, inserted] = merged.emplace(detail::pack_pair(u, v), w);
        if (!inserted) it->second = std::max(it->second, w);
    }
    std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> edge_vec;
    edge_vec.reserve(merged.size());
    for (const auto& [key, w] : merged)
        edge_vec.emplace_back(static_cast<NodeId>(key >> 32),
                              static_cast<NodeId>(key & 0xffffffffu), w);
    return detail::build_csr(std::move(labels), std::move(edge_vec), std::move(metadata));
}

// Directed frequency graph: one arc cue->response per observed pair, weight =
// occurrence count. Blank responses are skipped; cues with only blanks become
// isolated nodes.
inline DirectedGraph build_directed(const NormsTable& table) {
    DirectedGraph g;
    std::vector<std::string> labels;
    for (const NormRow& row : table.rows) {
        labels.push_back(row.cue);
        for (const std::string& resp : row.responses)
            if (!resp.empty()) labels.push_back(resp);
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    g.labels = std::move(labels);
    std::unordered_map<std::string_view, NodeId> index;
    index.reserve(g.labels.size());
    for (std::size_t i = 0; i < g.labels.size(); ++i)
        index.emplace(g.labels[i], static_cast<NodeId>(i));
    for (const NormRow& row : table.rows) {
        NodeId cue = index.at(row.cue);
        for (const std::string& resp : row.responses) {
            if (resp.empty()) continue;
            ++g.arcs[detail::pack_pair(cue, index.at(resp))];
        }
    }
    return g;
}

// One undirected edge per unordered pair, weight = max over the 1-2 arcs.
inline SemanticNetwork undirect_max(const DirectedGraph& g,
                                    SemanticNetwork::Metadata metadata = {}) {
    std::unordered_map<std::uint64_t, std::uint32_t> merged;
    merged.reserve(g.arcs.size());
    for (const auto& [key, w] : g.arcs) {
        NodeId a = static_cast<NodeId>(key >> 32), b = static_cast<NodeId>(key & 0xffffffffu);
        require(a != b, "network: directed graph contains a self-loop at '", g.labels[a], "'");
        NodeId u = std::min(a, b), v = std::max(a, b);
        auto [it, inserted] = merged.emplace(detail::pack_pair(u, v), w);
        if (!inserted) it->second = std::max(it->second, w);
    }
    std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> edges;
    edges.reserve(merged.size());
    for (const auto& [key, w] : merged)
        edges.emplace_back(static_cast<NodeId>(key >> 32),
                           static_cast<NodeId>(key & 0xffffffffu), w);
    return detail::build_csr(g.labels, std::move(edges), std::move(metadata));
}

// Filters in fixed order: lexicon membership, then idiosyncratic (weight-1)
// edges, then the largest connected component. Size ties on the final step go
// to the component containing the lexicographically smallest label.
inline SemanticNetwork reduce(const SemanticNetwork& g, const Lexicon& lex) {
    const std::size_t n = g.node_count();
    std::vector<char> keep(n, 0);
    for (std::size_t i = 0; i < n; ++i) keep[i] = lex.is_valid_word(g.labels[i]) ? 1 : 0;

    // surviving edges with weight >= 2 between surviving nodes
    std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> edges;
    for (NodeId u = 0; u < n; ++u) {
        if (!keep[u]) continue;
        for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
            NodeId v = g.neighbors[k];
            if (v <= u || !keep[v]) continue;
            if (g.weights[k] >= 2) edges.emplace_back(u, v, g.weights[k]);
        }
    }

    std::vector<NodeId> kept_nodes;
    for (NodeId i = 0; i < n; ++i)
        if (keep[i]) kept_nodes.push_back(i);
    require(!kept_nodes.empty(), "network: reduction removed every node");

    // connected components over kept nodes; adjacency from the filtered edges
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto& [u, v, w] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<std::int64_t> component(n, -1);
    std::vector<std::size_t> comp_size;
    for (NodeId start : kept_nodes) {
        if (component[start] >= 0) continue;
        const std::int64_t c = static_cast<std::int64_t>(comp_size.size());
        std::size_t size = 0;
        std::queue<NodeId> q;
        component[start] = c;
        q.push(start);
        while (!q.empty()) {
            NodeId u = q.front();
            q.pop();
            ++size;
            for (NodeId v : adj[u]) {
                if (component[v] < 0) {
                    component[v] = c;
                    q.push(v);
                }
            }
        }
        comp_size.push_back(size);
    }
    // kept_nodes is label-sorted, so the first component reaching the maximum
    // size is the tie-break winner
    std::int64_t best = 0;
    for (std::size_t c = 1; c < comp_size.size(); ++c)
        if (comp_size[c] > comp_size[static_cast<std::size_t>(best)])
            best = static_cast<std::int64_t>(c);

    std::vector<std::string> labels;
    std::vector<NodeId> remap(n, 0);
    for (NodeId i : kept_nodes) {
        if (component[i] == best) {
            remap[i] = static_cast<NodeId>(labels.size());
            labels.push_back(g.labels[i]);
        }
    }
    std::vector<std::tuple<NodeId, NodeId, std::uint32_t>> final_edges;
    for (const auto& [u, v, w] : edges)
        if (component[u] == best && component[v] == best)
            final_edges.emplace_back(remap[u], remap[v], w);

    SemanticNetwork::Metadata meta = g.metadata;
    meta.filters.insert(meta.filters.end(),
                        {"valid-words", "min-weight-2", "largest-component"});
    return detail::build_csr(std::move(labels), std::move(final_edges), std::move(meta));
}

inline NetStats net_stats_from_counts(std::size_t nodes, std::size_t edges) {
    NetStats s;
    s.nodes = nodes;
    s.edges = edges;
    if (nodes > 1)
        s.density = 2.0 * static_cast<double>(edges) /
                    (static_cast<double>(nodes) * static_cast<double>(nodes - 1));
    if (nodes > 0) s.avg_degree = 2.0 * static_cast<double>(edges) / static_cast<double>(nodes);
    return s;
}

inline NetStats net_stats(const SemanticNetwork& g) {
    return net_stats_from_counts(g.node_count(), g.edge_count());
}

inline OverlapReport compare(const SemanticNetwork& a, const SemanticNetwork& b) {
    OverlapReport report;

    // node sets: both label vectors are sorted
    std::vector<std::string> common;
    std::set_intersection(a.labels.begin(), a.labels.end(), b.labels.begin(), b.labels.end(),
                          std::back_inserter(common));
    auto fill = [](OverlapReport::Side& s) {
        const std::size_t uni = s.size_a + s.size_b - s.common;
        s.pct_a_not_in_b =
            s.size_a ? 100.0 * static_cast<double>(s.size_a - s.common) / s.size_a : 0.0;
        s.pct_b_not_in_a =
            s.size_b ? 100.0 * static_cast<double>(s.size_b - s.common) / s.size_b : 0.0;
        s.pct_common_of_union = uni ? 100.0 * static_cast<double>(s.common) / uni : 0.0;
    };
    report.nodes.size_a = a.node_count();
    report.nodes.size_b = b.node_count();
    report.nodes.common = common.size();
    fill(report.nodes);

    // edge sets over the subgraphs induced on the intersection, weights ignored
    std::unordered_map<std::string_view, NodeId> common_id;
    common_id.reserve(common.size());
    for (std::size_t i = 0; i < common.size(); ++i)
        common_id.emplace(common[i], static_cast<NodeId>(i));
    auto induced_edges = [&](const SemanticNetwork& g) {
        std::vector<std::uint64_t> out;
        for (NodeId u = 0; u < g.node_count(); ++u) {
            auto iu = common_id.find(g.labels[u]);
            if (iu == common_id.end()) continue;
            for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
                NodeId v = g.neighbors[k];
                if (v <= u) continue;
                auto iv = common_id.find(g.labels[v]);
                if (iv == common_id.end()) continue;
                NodeId cu = std::min(iu->second, iv->second);
                NodeId cv = std::max(iu->second, iv->second);
                out.push_back(detail::pack_pair(cu, cv));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    auto ea = induced_edges(a);
    auto eb = induced_edges(b);
    std::vector<std::uint64_t> ecommon;
    std::set_intersection(ea.begin(), ea.end(), eb.begin(), eb.end(),
                          std::back_inserter(ecommon));
    report.edges.size_a = ea.size();
    report.edges.size_b = eb.size();
    report.edges.common = ecommon.size();
    fill(report.edges);
    return report;
}

// Edge-list file: word1<TAB>word2<TAB>weight, word1 < word2, rows sorted.
inline void write_edge_list(const SemanticNetwork& g, const std::filesystem::path& path) {
    auto out = open_output(path.string());
    for (NodeId u = 0; u < g.node_count(); ++u) {
        require(g.labels[u].find('\t') == std::string::npos,
                "network: label contains a tab, cannot serialize: ", g.labels[u]);
        for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
            NodeId v = g.neighbors[k];
            if (v <= u) continue;
            // labels are index-sorted, so u < v implies label order too
            out << g.labels[u] << '\t' << g.labels[v] << '\t' << g.weights[k] << '\n';
        }
    }
    require(out.good(), "network: write failed: ", path.string());
}

inline SemanticNetwork read_edge_list(const std::filesystem::path& path,
                                      SemanticNetwork::Metadata metadata = {}) {
    auto in = open_input(path.string());
    if (metadata.source.empty()) metadata.source = path.filename().string();
    std::vector<std::tuple<std::string, std::string, std::uint32_t>> edges;
    std::vector<std::string> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split(line, '\t');
        require(cols.size() == 3, "edge list: expected 3 tab-separated columns at line ",
                lineno, " in ", path.string());
        std::uint32_t w = 0;
        auto [ptr, ec] = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), w);
        require(ec == std::errc() && ptr == cols[2].data() + cols[2].size() && w >= 1,
                "edge list: bad weight '", cols[2], "' at line ", lineno, " in ",
                path.string());
        require(cols[0] != cols[1], "edge list: self-loop at line ", lineno, " in ",
                path.string());
        labels.push_back(cols[0]);
        labels.push_back(cols[1]);
        edges.emplace_back(std::move(cols[0]), std::move(cols[1]), w);
    }
    return make_network(std::move(labels), edges, std::move(metadata));
}

}  // namespace assocnet
