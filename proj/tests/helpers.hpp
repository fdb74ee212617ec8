#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "assocnet/activation.hpp"
#include "assocnet/netbuild.hpp"
#include "assocnet/rng.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "assocnet") {
        static std::atomic<unsigned> counter{0};
        path_ = fs::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Small lexicon whose maps are closed under the pipeline (fixed points only),
// used by the idempotence and end-to-end unit tests.
inline fs::path make_test_lexicon(const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "words.txt",
               "dog\ncat\nman\nwoman\ncolor\nfruit\napple\nbanana\norange\ntree\nwood\n"
               "leaf\ngreen\nthrow out\ncheck-in\na lot\nrun\nwater\nfire\nhouse\n");
    write_file(dir / "lemmas.tsv", "men\tman\nwomen\twoman\ndogs\tdog\ncats\tcat\nleaves\tleaf\n");
    write_file(dir / "spellings.tsv", "colour\tcolor\nrecieve\treceive\n");
    write_file(dir / "compounds.tsv", "throwout\tthrow out\ncheckin\tcheck-in\n");
    return dir;
}

// Random connected undirected graph: spanning tree plus extra edges, integer
// weights in [1, max_weight].
inline assocnet::SemanticNetwork random_connected_network(assocnet::Rng& rng, std::size_t n,
                                                          std::size_t extra_edges,
                                                          std::uint32_t max_weight) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%04zu", i);
        labels.emplace_back(buf);
    }
    std::vector<std::tuple<std::string, std::string, std::uint32_t>> edges;
    for (std::size_t i = 1; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        edges.emplace_back(labels[i], labels[j],
                           1 + static_cast<std::uint32_t>(rng.below(max_weight)));
    }
    for (std::size_t k = 0; k < extra_edges; ++k) {
        std::size_t a = static_cast<std::size_t>(rng.below(n));
        std::size_t b = static_cast<std::size_t>(rng.below(n));
        if (a == b) continue;
        edges.emplace_back(labels[a], labels[b],
                           1 + static_cast<std::uint32_t>(rng.below(max_weight)));
    }
    return assocnet::make_network(std::move(labels), edges);
}

// Independent dense reference for the spreading process: explicit row-stochastic
// matrix P (by strength, or degree when unweighted), full-matrix update
// a' = r*a + (1-r) * P^T a, then decay, then suppress.
inline std::vector<double> dense_spread_reference(const assocnet::SemanticNetwork& g,
                                                  std::size_t prime,
                                                  const assocnet::ActivationParams& p) {
    const std::size_t n = g.node_count();
    std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
    for (std::size_t u = 0; u < n; ++u) {
        const std::size_t deg = g.offsets[u + 1] - g.offsets[u];
        if (deg == 0) {
            P[u][u] = 1.0;  // isolated node keeps its activation
            continue;
        }
        for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
            const std::size_t v = g.neighbors[k];
            P[u][v] = p.weighted ? g.weights[k] / g.strengths[u]
                                 : 1.0 / static_cast<double>(deg);
        }
    }
    std::vector<double> a(n, 0.0), next(n, 0.0);
    a[prime] = p.initial_activation;
    for (int t = 0; t < p.iterations; ++t) {
        for (std::size_t v = 0; v < n; ++v) {
            double recv = 0.0;
            for (std::size_t u = 0; u < n; ++u) recv += P[u][v] * a[u];
            next[v] = p.retention * a[v] + (1.0 - p.retention) * recv;
        }
        for (std::size_t v = 0; v < n; ++v) {
            next[v] *= (1.0 - p.decay);
            if (p.suppress > 0.0 && next[v] < p.suppress) next[v] = 0.0;
        }
        a.swap(next);
    }
    return a;
}

struct PipelineDataset {
    fs::path csv;
    fs::path lexicon_dir;
    fs::path items_csv;
    fs::path probe_json;
};

// Synthetic norms file + matching lexicon + experiment fixtures, small enough
// to preprocess and simulate in milliseconds but structured enough for both
// packaged studies: gendered primes attach to stereotyped targets, related
// primes attach to their LDT targets, and weak bridges keep one component.
inline PipelineDataset write_pipeline_dataset(const fs::path& dir) {
    fs::create_directories(dir / "lexicon");
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"woman", "man"},   {"female", "male"},       {"mother", "father"},
        {"girl", "boy"},    {"feminine", "masculine"}};

    std::ostringstream csv;
    csv << "cue,R1,R2,R3\n";
    auto assoc = [&](const std::string& cue, const std::string& resp, int count) {
        for (int i = 0; i < count; ++i) csv << cue << ',' << resp << ",,\n";
    };
    for (const auto& [f, m] : pairs) {
        assoc(f, "gentle", 10);
        assoc(f, "strong", 2);
        assoc(m, "strong", 10);
        assoc(m, "gentle", 2);
    }
    assoc("doctor", "nurse", 8);
    assoc("bread", "butter", 8);
    assoc("water", "fire", 6);
    assoc("tree", "house", 6);
    // bridges so the reduced network is a single component
    assoc("thing", "gentle", 3);
    assoc("thing", "doctor", 3);
    assoc("thing", "bread", 3);
    assoc("thing", "water", 3);
    assoc("thing", "tree", 3);

    std::ostringstream words;
    for (const char* w :
         {"woman", "man", "female", "male", "mother", "father", "girl", "boy", "feminine",
          "masculine", "gentle", "strong", "doctor", "nurse", "bread", "butter", "water",
          "fire", "tree", "house", "thing"})
        words << w << '\n';

    PipelineDataset ds;
    ds.csv = dir / "norms.csv";
    ds.lexicon_dir = dir / "lexicon";
    ds.items_csv = dir / "items.csv";
    ds.probe_json = dir / "probe.json";
    write_file(ds.csv, csv.str());
    write_file(ds.lexicon_dir / "words.txt", words.str());
    write_file(ds.lexicon_dir / "lemmas.tsv", "");
    write_file(ds.lexicon_dir / "spellings.tsv", "");
    write_file(ds.lexicon_dir / "compounds.tsv", "");
    write_file(ds.items_csv,
               "target,related_prime,unrelated_prime,rt_related,rt_unrelated\n"
               "gentle,woman,man,-0.5,0.5\n"
               "strong,man,woman,-0.4,0.6\n"
               "nurse,doctor,bread,-0.3,0.7\n"
               "butter,bread,doctor,-0.2,0.8\n"
               "fire,water,tree,-0.1,0.9\n"
               "house,tree,water,-0.15,0.85\n");
    write_file(ds.probe_json, R"({
  "prime_pairs": [["woman","man"],["female","male"],["mother","father"],["girl","boy"],["feminine","masculine"]],
  "female_targets": ["gentle"],
  "male_targets": ["strong"]
})");
    return ds;
}

// All-pairs BFS diameter oracle.
inline int all_pairs_diameter(const assocnet::SemanticNetwork& g) {
    const std::size_t n = g.node_count();
    int diam = 0;
    std::vector<int> dist(n);
    std::vector<std::size_t> frontier, next;
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[s] = 0;
        frontier.assign(1, s);
        int level = 0;
        while (!frontier.empty()) {
            next.clear();
            for (std::size_t u : frontier)
                for (std::size_t k = g.offsets[u]; k < g.offsets[u + 1]; ++k) {
                    const std::size_t v = g.neighbors[k];
                    if (dist[v] < 0) {
                        dist[v] = level + 1;
                        next.push_back(v);
                    }
                }
            if (!next.empty()) ++level;
            frontier.swap(next);
        }
        diam = std::max(diam, level);
    }
    return diam;
}

}  // namespace testutil
