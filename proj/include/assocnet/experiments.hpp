#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "assocnet/activation.hpp"
#include "assocnet/csv.hpp"
#include "assocnet/error.hpp"
#include "assocnet/netbuild.hpp"
#include "assocnet/stats.hpp"

#include <json.hpp>

namespace assocnet {

// One lexical-decision item: a target, its related and unrelated primes, and
// the empirical z-scored reaction times for both pairings.
struct PrimingItem {
    std::string target;
    std::string related_prime;
    std::string unrelated_prime;
    double rt_related = 0.0;
    double rt_unrelated = 0.0;
};

struct GenderProbe {
    std::vector<std::pair<std::string, std::string>> prime_pairs;  // (female, male)
    std::vector<std::string> female_targets;
    std::vector<std::string> male_targets;

    void validate() const {
        require(!prime_pairs.empty(), "probe: no prime pairs");
        require(!female_targets.empty() && !male_targets.empty(), "probe: missing targets");
        for (const auto& [f, m] : prime_pairs)
            require(!f.empty() && !m.empty() && f != m, "probe: bad prime pair '", f, "'/'",
                    m, "'");
    }
    // every individual prime pairs with every target
    std::size_t pair_count() const {
        return 2 * prime_pairs.size() * (female_targets.size() + male_targets.size());
    }
};

// Generic result of one packaged study: the normalized target-by-prime table,
// the paired observations feeding the tests, and plot-ready rows.
struct PairedObservation {
    std::string category;    // "priming" | "female_targets" | "male_targets"
    std::string target;
    std::string prime_a;     // related / female-related prime
    std::string prime_b;     // unrelated / male-related prime
    double al_a = 0.0;
    double al_b = 0.0;
    double diff = 0.0;       // al_a - al_b
    double rt_a = std::numeric_limits<double>::quiet_NaN();
    double rt_b = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
    std::string kind;  // "priming" | "bias_probe"
    nlohmann::json metadata;
    std::vector<std::string> dropped_words;

    // heatmap: one row per target, one column per prime (normalized ALs)
    std::vector<std::string> row_labels;
    std::vector<std::string> row_categories;  // parallel to row_labels
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> heatmap;  // heatmap[row][col]

    std::vector<PairedObservation> observations;
    std::map<std::string, PairedTestResult> tests;
    std::map<std::string, CorrelationResult> correlations;
};

inline std::vector<PrimingItem> load_priming_items(const std::filesystem::path& path) {
    auto in = open_input(path.string());
    CsvParser parser(in);
    std::vector<std::string> fields;
    require(parser.next(fields) && fields.size() == 5 && fields[0] == "target",
            "priming items: expected header "
            "'target,related_prime,unrelated_prime,rt_related,rt_unrelated' in ",
            path.string());
    std::vector<PrimingItem> items;
    auto to_double = [&](const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        require(ec == std::errc() && ptr == s.data() + s.size(),
                "priming items: bad number '", s, "' at line ", parser.line(), " in ",
                path.string());
        return v;
    };
    while (parser.next(fields)) {
        require(fields.size() == 5, "priming items: row with ", fields.size(),
                " fields at line ", parser.line(), " in ", path.string());
        PrimingItem item;
        item.target = fields[0];
        item.related_prime = fields[1];
        item.unrelated_prime = fields[2];
        item.rt_related = to_double(fields[3]);
        item.rt_unrelated = to_double(fields[4]);
        require(!item.target.empty() && !item.related_prime.empty() &&
                    !item.unrelated_prime.empty(),
                "priming items: empty word at line ", parser.line());
        require(item.target != item.related_prime && item.target != item.unrelated_prime,
                "priming items: target equals one of its primes at line ", parser.line());
        items.push_back(std::move(item));
    }
    return items;
}

inline GenderProbe load_gender_probe(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "probe: cannot open ", path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail("probe: invalid JSON in ", path.string(), ": ", e.what());
    }
    GenderProbe probe;
    try {
        for (const auto& pair : j.at("prime_pairs"))
            probe.prime_pairs.emplace_back(pair.at(0).get<std::string>(),
                                           pair.at(1).get<std::string>());
        probe.female_targets = j.at("female_targets").get<std::vector<std::string>>();
        probe.male_targets = j.at("male_targets").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail("probe: malformed probe file ", path.string(), ": ", e.what());
    }
    probe.validate();
    return probe;
}

namespace detail {

inline nlohmann::json params_json(const ActivationParams& p, NormMode mode) {
    return {{"retention", p.retention},
            {"decay", p.decay},
            {"suppress", p.suppress},
            {"initial_activation", p.initial_activation <= 0.0 ? nlohmann::json("auto")
                                                               : nlohmann::json(p.initial_activation)},
            {"iterations", p.iterations <= 0 ? nlohmann::json("auto")
                                             : nlohmann::json(p.iterations)},
            {"weighted", p.weighted},
            {"normalization", norm_mode_name(mode)},
            {"step_order", "distribute, decay, suppress"}};
}

}  // namespace detail

// Semantic-priming validation: activate every related and unrelated prime,
// normalize, and compare target activation levels by prime type. The Spearman
// correlation runs over all (activation, reaction time) observations.
inline ExperimentReport run_priming(const SemanticNetwork& g,
                                    const std::vector<PrimingItem>& items,
                                    const ActivationParams& p, NormMode mode,
                                    unsigned threads = 0) {
    ExperimentReport report;
    report.kind = "priming";

    std::vector<PrimingItem> usable;
    for (const PrimingItem& item : items) {
        if (g.contains(item.target) && g.contains(item.related_prime) &&
            g.contains(item.unrelated_prime)) {
            usable.push_back(item);
        } else {
            report.dropped_words.push_back(item.target);
        }
    }
    require(usable.size() >= 5, "priming: only ", usable.size(),
            " usable items (need >= 5); ", report.dropped_words.size(), " dropped");

    std::vector<std::string> primes;
    primes.reserve(usable.size() * 2);
    for (const PrimingItem& item : usable) {
        primes.push_back(item.related_prime);
        primes.push_back(item.unrelated_prime);
    }

    const ActivationMatrix raw = spread_batch(g, primes, p, threads);
    const ActivationMatrix norm = normalize(raw, mode);

    report.col_labels = norm.primes;
    std::vector<double> al_related, al_unrelated, als, rts;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        const PrimingItem& item = usable[i];
        const NodeId t = g.find(item.target);
        const double rel = norm.columns[2 * i][t];
        const double unrel = norm.columns[2 * i + 1][t];
        al_related.push_back(rel);
        al_unrelated.push_back(unrel);
        als.push_back(rel);
        rts.push_back(item.rt_related);
        als.push_back(unrel);
        rts.push_back(item.rt_unrelated);

        PairedObservation obs;
        obs.category = "priming";
        obs.target = item.target;
        obs.prime_a = item.related_prime;
        obs.prime_b = item.unrelated_prime;
        obs.al_a = rel;
        obs.al_b = unrel;
        obs.diff = rel - unrel;
        obs.rt_a = item.rt_related;
        obs.rt_b = item.rt_unrelated;
        report.observations.push_back(std::move(obs));

        report.row_labels.push_back(item.target);
        report.row_categories.push_back("priming");
        std::vector<double> row(norm.cols());
        for (std::size_t j = 0; j < norm.cols(); ++j) row[j] = norm.columns[j][t];
        report.heatmap.push_back(std::move(row));
    }

    // all-zero differences (or a constant vector) drop the corresponding
    // result instead of failing the whole run
    report.metadata = nlohmann::json::object();
    try {
        report.tests.emplace("priming", wilcoxon_paired(al_related, al_unrelated));
    } catch (const Error& e) {
        report.metadata["test_skipped"] = e.what();
    }
    try {
        report.correlations.emplace("activation_vs_rt", spearman(als, rts));
    } catch (const Error& e) {
        report.metadata["correlation_skipped"] = e.what();
    }
    report.metadata.update({{"experiment", "priming"},
                            {"items_total", items.size()},
                            {"items_used", usable.size()},
                            {"items_dropped", report.dropped_words.size()},
                            {"network_source", g.metadata.source},
                            {"parameters", detail::params_json(p, mode)}});
    return report;
}

// Gender-bias probe: activate the 2k paired primes, normalize, and test the
// paired activation difference (female prime minus male prime) per target
// category. All primes must be present; missing targets are dropped.
inline ExperimentReport run_bias_probe(const SemanticNetwork& g, const GenderProbe& probe,
                                       const ActivationParams& p, NormMode mode,
                                       unsigned threads = 0) {
    probe.validate();
    ExperimentReport report;
    report.kind = "bias_probe";

    std::vector<std::string> primes;
    for (const auto& [f, m] : probe.prime_pairs) {
        require(g.contains(f), "bias probe: prime '", f, "' is not in the network");
        require(g.contains(m), "bias probe: prime '", m, "' is not in the network");
        primes.push_back(f);
        primes.push_back(m);
    }

    const ActivationMatrix raw = spread_batch(g, primes, p, threads);
    const ActivationMatrix norm = normalize(raw, mode);
    report.col_labels = norm.primes;

    auto add_category = [&](const std::vector<std::string>& targets,
                            const std::string& category) {
        std::vector<double> al_female, al_male;
        for (const std::string& target : targets) {
            const NodeId t = g.find(target);
            if (t == g.node_count()) {
                report.dropped_words.push_back(target);
                continue;
            }
            report.row_labels.push_back(target);
            report.row_categories.push_back(category);
            std::vector<double> row(norm.cols());
            for (std::size_t j = 0; j < norm.cols(); ++j) row[j] = norm.columns[j][t];
            report.heatmap.push_back(std::move(row));

            for (std::size_t k = 0; k < probe.prime_pairs.size(); ++k) {
                const double f_al = norm.columns[2 * k][t];
                const double m_al = norm.columns[2 * k + 1][t];
                al_female.push_back(f_al);
                al_male.push_back(m_al);
                PairedObservation obs;
                obs.category = category;
                obs.target = target;
                obs.prime_a = probe.prime_pairs[k].first;
                obs.prime_b = probe.prime_pairs[k].second;
                obs.al_a = f_al;
                obs.al_b = m_al;
                obs.diff = f_al - m_al;
                report.observations.push_back(std::move(obs));
            }
        }
        if (!al_female.empty()) {
            try {
                report.tests.emplace(category, wilcoxon_paired(al_female, al_male));
            } catch (const Error& e) {
                report.metadata["test_skipped_" + category] = e.what();
            }
        }
    };
    report.metadata = nlohmann::json::object();
    add_category(probe.female_targets, "female_targets");
    add_category(probe.male_targets, "male_targets");

    report.metadata.update(
        {{"experiment", "bias_probe"},
         {"prime_pairs", probe.prime_pairs.size()},
         {"targets_total", probe.female_targets.size() + probe.male_targets.size()},
         {"targets_used", report.row_labels.size()},
         {"targets_dropped", report.dropped_words.size()},
         {"network_source", g.metadata.source},
         {"cross_model_vectorization", "flattened target x prime per category"},
         {"parameters", detail::params_json(p, mode)}});
    return report;
}

// Spearman between two bias reports over the flattened (target x prime)
// normalized activation vectors, separately per target category.
inline std::map<std::string, CorrelationResult> cross_model_correlation(
    const ExperimentReport& a, const ExperimentReport& b) {
    require(a.kind == "bias_probe" && b.kind == "bias_probe",
            "cross-model correlation requires two bias-probe reports");
    require(a.row_labels == b.row_labels && a.col_labels == b.col_labels &&
                a.row_categories == b.row_categories,
            "cross-model correlation: reports have mismatched probe shapes");

    std::map<std::string, CorrelationResult> out;
    for (const std::string category : {"female_targets", "male_targets"}) {
        std::vector<double> va, vb;
        for (std::size_t r = 0; r < a.row_labels.size(); ++r) {
            if (a.row_categories[r] != category) continue;
            for (std::size_t c = 0; c < a.col_labels.size(); ++c) {
                va.push_back(a.heatmap[r][c]);
                vb.push_back(b.heatmap[r][c]);
            }
        }
        if (!va.empty()) out.emplace(category, spearman(va, vb));
    }
    return out;
}

namespace detail {
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    require(ec == std::errc(), "report: number formatting failed");
    return std::string(buf, ptr);
}
}  // namespace detail

// Rebuilds the comparable part of a bias report from a written heatmap.csv,
// enough for cross_model_correlation against a fresh run.
inline ExperimentReport load_bias_heatmap(const std::filesystem::path& heatmap_csv) {
    auto in = open_input(heatmap_csv.string());
    CsvParser parser(in);
    std::vector<std::string> fields;
    require(parser.next(fields) && fields.size() >= 3 && fields[0] == "target" &&
                fields[1] == "category",
            "heatmap: expected header 'target,category,<primes...>' in ",
            heatmap_csv.string());
    ExperimentReport report;
    report.kind = "bias_probe";
    report.col_labels.assign(fields.begin() + 2, fields.end());
    while (parser.next(fields)) {
        require(fields.size() == report.col_labels.size() + 2,
                "heatmap: row with wrong column count at line ", parser.line(), " in ",
                heatmap_csv.string());
        report.row_labels.push_back(fields[0]);
        report.row_categories.push_back(fields[1]);
        std::vector<double> row;
        row.reserve(report.col_labels.size());
        for (std::size_t i = 2; i < fields.size(); ++i) {
            double v = 0.0;
            auto [ptr, ec] =
                std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
            require(ec == std::errc() && ptr == fields[i].data() + fields[i].size(),
                    "heatmap: bad number '", fields[i], "' at line ", parser.line());
            row.push_back(v);
        }
        report.heatmap.push_back(std::move(row));
    }
    return report;
}

// Writes report.json, heatmap.csv, boxplot.csv and histogram.csv into `dir`.
inline void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        nlohmann::json j;
        j["kind"] = report.kind;
        j["metadata"] = report.metadata;
        j["dropped_words"] = report.dropped_words;
        nlohmann::json tests = nlohmann::json::object();
        for (const auto& [name, t] : report.tests) tests[name] = t.to_json();
        j["tests"] = tests;
        nlohmann::json correlations = nlohmann::json::object();
        for (const auto& [name, c] : report.correlations) correlations[name] = c.to_json();
        j["correlations"] = correlations;
        nlohmann::json obs = nlohmann::json::array();
        for (const PairedObservation& o : report.observations) {
            nlohmann::json jo = {{"category", o.category}, {"target", o.target},
                                 {"prime_a", o.prime_a},   {"prime_b", o.prime_b},
                                 {"al_a", o.al_a},         {"al_b", o.al_b},
                                 {"diff", o.diff}};
            if (!std::isnan(o.rt_a)) {
                jo["rt_a"] = o.rt_a;
                jo["rt_b"] = o.rt_b;
            }
            obs.push_back(std::move(jo));
        }
        j["observations"] = obs;
        auto out = open_output((dir / "report.json").string());
        out << j.dump(2) << '\n';
    }
    {
        auto out = open_output((dir / "heatmap.csv").string());
        std::vector<std::string> header{"target", "category"};
        header.insert(header.end(), report.col_labels.begin(), report.col_labels.end());
        write_csv_row(out, header);
        for (std::size_t r = 0; r < report.row_labels.size(); ++r) {
            std::vector<std::string> row{report.row_labels[r], report.row_categories[r]};
            for (double v : report.heatmap[r]) row.push_back(detail::format_double(v));
            write_csv_row(out, row);
        }
    }
    {
        auto out = open_output((dir / "boxplot.csv").string());
        write_csv_row(out, {"category", "condition", "target", "prime", "activation"});
        const bool priming = report.kind == "priming";
        for (const PairedObservation& o : report.observations) {
            write_csv_row(out, {o.category, priming ? "related" : "female_prime", o.target,
                                o.prime_a, detail::format_double(o.al_a)});
            write_csv_row(out, {o.category, priming ? "unrelated" : "male_prime", o.target,
                                o.prime_b, detail::format_double(o.al_b)});
        }
    }
    {
        auto out = open_output((dir / "histogram.csv").string());
        write_csv_row(out, {"category", "target", "prime_pair", "difference"});
        for (const PairedObservation& o : report.observations)
            write_csv_row(out, {o.category, o.target, o.prime_a + "/" + o.prime_b,
                                detail::format_double(o.diff)});
    }
}

}  // namespace assocnet
