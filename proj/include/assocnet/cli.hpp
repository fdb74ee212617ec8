#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "assocnet/activation.hpp"
#include "assocnet/error.hpp"
#include "assocnet/experiments.hpp"
#include "assocnet/lexicon.hpp"
#include "assocnet/llmgen.hpp"
#include "assocnet/netbuild.hpp"
#include "assocnet/norms.hpp"
#include "assocnet/stats.hpp"
#include "assocnet/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace assocnet::cli {

namespace fs = std::filesystem;

namespace detail {

inline std::string rounded(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

// Sidecar metadata next to a primary output; no timestamps, so reruns with
// the same inputs stay byte-identical.
inline void write_meta(const fs::path& primary, const std::string& subcommand,
                       nlohmann::json parameters) {
    nlohmann::json meta = {{"tool", "assocnet"},
                           {"version", assocnet::version()},
                           {"subcommand", subcommand},
                           {"parameters", std::move(parameters)}};
    auto out = open_output(primary.string() + ".meta.json");
    out << meta.dump(2) << '\n';
}

inline nlohmann::json stats_display(const NetStats& s) {
    return {{"nodes", s.nodes},
            {"edges", s.edges},
            {"density", rounded(s.density, 4)},
            {"avg_degree", rounded(s.avg_degree, 1)}};
}

inline nlohmann::json overlap_display(const OverlapReport::Side& s) {
    return {{"pct_a_not_in_b", rounded(s.pct_a_not_in_b, 0) + "%"},
            {"pct_common_of_union", rounded(s.pct_common_of_union, 0) + "%"},
            {"pct_b_not_in_a", rounded(s.pct_b_not_in_a, 0) + "%"}};
}

struct ActivationCliOpts {
    ActivationParams params;
    std::string iterations = "auto";
    std::string initial = "auto";
    bool unweighted = false;

    ActivationParams resolve() const {
        ActivationParams p = params;
        p.weighted = !unweighted;
        auto parse_or_auto = [](const std::string& s, const char* what) -> double {
            if (s == "auto") return 0.0;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            require(ec == std::errc() && ptr == s.data() + s.size(), "cli: ", what,
                    " must be 'auto' or a number, got '", s, "'");
            require(v > 0.0, "cli: ", what, " must be positive");
            return v;
        };
        p.iterations = static_cast<int>(parse_or_auto(iterations, "--iterations"));
        p.initial_activation = parse_or_auto(initial, "--initial");
        p.validate();
        return p;
    }

    nlohmann::json to_json() const {
        ActivationParams p = params;
        return {{"retention", p.retention},
                {"decay", p.decay},
                {"suppress", p.suppress},
                {"iterations", iterations},
                {"initial", initial},
                {"weighted", !unweighted}};
    }
};

inline void add_activation_options(CLI::App* cmd, ActivationCliOpts& o) {
    cmd->add_option("--retention", o.params.retention, "Fraction of activation a node keeps per step")
        ->capture_default_str();
    cmd->add_option("--decay", o.params.decay, "Per-step decay fraction")->capture_default_str();
    cmd->add_option("--suppress", o.params.suppress, "Zero out activations below this threshold")
        ->capture_default_str();
    cmd->add_option("--iterations", o.iterations, "Time steps: 'auto' (2 x diameter) or an integer")
        ->capture_default_str();
    cmd->add_option("--initial", o.initial,
                    "Initial activation of the prime: 'auto' (node count) or a number")
        ->capture_default_str();
    cmd->add_flag("--unweighted", o.unweighted, "Distribute by degree instead of edge weight");
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"assocnet: free-association norms -> semantic networks -> "
                 "spreading-activation experiments"};
    app.set_version_flag("--version", ASSOCNET_VERSION);
    app.set_config("--config", "", "Flat key=value config file ([subcommand] sections)");
    app.require_subcommand(1);

    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads for batch simulation (0 = auto)")
        ->capture_default_str();

    // --- preprocess ---------------------------------------------------------
    struct {
        std::string input, lexicon_dir, output, report;
        std::uint64_t seed = 0;
    } pre;
    {
        auto* cmd = app.add_subcommand("preprocess",
                                       "Clean and balance a raw norms CSV (cue,R1,R2,R3)");
        cmd->add_option("--input", pre.input, "Raw norms CSV")->required();
        cmd->add_option("--lexicon-dir", pre.lexicon_dir,
                        "Directory with words.txt, lemmas.tsv, spellings.tsv, compounds.tsv")
            ->required();
        cmd->add_option("--seed", pre.seed, "Seed for downsampling cues with > 100 rows")
            ->capture_default_str();
        cmd->add_option("--output", pre.output, "Preprocessed CSV path")->required();
        cmd->add_option("--report", pre.report, "Transformation-count report JSON path");
        cmd->callback([&] {
            Lexicon lex = load_lexicon_dir(pre.lexicon_dir);
            NormsTable raw = parse_norms_csv(pre.input);
            PreprocessReport rep;
            NormsTable table = preprocess(raw, lex, pre.seed, &rep);
            write_norms_csv(table, pre.output);
            DatasetStats stats = dataset_stats(table);
            nlohmann::json params = {{"input", pre.input},
                                     {"lexicon_dir", pre.lexicon_dir},
                                     {"seed", pre.seed}};
            if (!lex.provenance.is_null()) params["lexicon_provenance"] = lex.provenance;
            detail::write_meta(pre.output, "preprocess", params);
            if (!pre.report.empty()) {
                nlohmann::json j = {{"preprocess", rep.to_json()},
                                    {"dataset_stats", stats.to_json()}};
                auto out = open_output(pre.report);
                out << j.dump(2) << '\n';
            }
            std::cout << "preprocessed " << stats.unique_cues << " cues, "
                      << stats.total_responses << " responses, "
                      << detail::rounded(stats.missing_pct, 1) << "% missing\n";
        });
    }

    // --- build-net ----------------------------------------------------------
    struct {
        std::string input, lexicon_dir, output, full_output, stats;
    } bn;
    {
        auto* cmd = app.add_subcommand(
            "build-net", "Build, undirect and filter the semantic network from a norms CSV");
        cmd->add_option("--input", bn.input, "Preprocessed norms CSV")->required();
        cmd->add_option("--lexicon-dir", bn.lexicon_dir, "Lexicon resources directory")
            ->required();
        cmd->add_option("--output", bn.output, "Reduced-network edge list (TSV)")->required();
        cmd->add_option("--full-output", bn.full_output, "Also write the unfiltered edge list");
        cmd->add_option("--stats", bn.stats, "Write full+reduced NetStats JSON");
        cmd->callback([&] {
            Lexicon lex = load_lexicon_dir(bn.lexicon_dir);
            NormsTable table = parse_norms_csv(bn.input);
            SemanticNetwork::Metadata meta;
            meta.source = fs::path(bn.input).stem().string();
            SemanticNetwork full = undirect_max(build_directed(table), meta);
            SemanticNetwork reduced = reduce(full, lex);
            write_edge_list(reduced, bn.output);
            detail::write_meta(bn.output, "build-net",
                               {{"input", bn.input},
                                {"lexicon_dir", bn.lexicon_dir},
                                {"filters", reduced.metadata.filters}});
            if (!bn.full_output.empty()) write_edge_list(full, bn.full_output);
            NetStats fs_ = net_stats(full), rs = net_stats(reduced);
            if (!bn.stats.empty()) {
                nlohmann::json j = {{"full", fs_.to_json()},
                                    {"reduced", rs.to_json()},
                                    {"display",
                                     {{"full", detail::stats_display(fs_)},
                                      {"reduced", detail::stats_display(rs)}}}};
                auto out = open_output(bn.stats);
                out << j.dump(2) << '\n';
            }
            std::cout << "full: " << fs_.nodes << " nodes, " << fs_.edges << " edges; reduced: "
                      << rs.nodes << " nodes, " << rs.edges << " edges\n";
        });
    }

    // --- net-stats ----------------------------------------------------------
    struct {
        std::string input, output;
    } ns;
    {
        auto* cmd = app.add_subcommand("net-stats", "Nodes, edges, density, average degree");
        cmd->add_option("--input", ns.input, "Edge-list TSV")->required();
        cmd->add_option("--output", ns.output, "Write JSON here instead of stdout");
        cmd->callback([&] {
            NetStats s = net_stats(read_edge_list(ns.input));
            nlohmann::json j = s.to_json();
            j["display"] = detail::stats_display(s);
            if (ns.output.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                auto out = open_output(ns.output);
                out << j.dump(2) << '\n';
                detail::write_meta(ns.output, "net-stats", {{"input", ns.input}});
            }
        });
    }

    // --- compare-nets -------------------------------------------------------
    struct {
        std::string a, b, output;
    } cn;
    {
        auto* cmd = app.add_subcommand("compare-nets",
                                       "Node/edge overlap percentages between two networks");
        cmd->add_option("--a", cn.a, "First edge-list TSV")->required();
        cmd->add_option("--b", cn.b, "Second edge-list TSV")->required();
        cmd->add_option("--output", cn.output, "Write JSON here instead of stdout");
        cmd->callback([&] {
            OverlapReport r = compare(read_edge_list(cn.a), read_edge_list(cn.b));
            nlohmann::json j = r.to_json();
            j["display"] = {{"nodes", detail::overlap_display(r.nodes)},
                            {"edges", detail::overlap_display(r.edges)}};
            if (cn.output.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                auto out = open_output(cn.output);
                out << j.dump(2) << '\n';
                detail::write_meta(cn.output, "compare-nets", {{"a", cn.a}, {"b", cn.b}});
            }
        });
    }

    // --- activate -----------------------------------------------------------
    struct {
        std::string network, primes, output;
        detail::ActivationCliOpts act;
    } ac;
    {
        auto* cmd = app.add_subcommand("activate",
                                       "Spreading activation from each prime in a list");
        cmd->add_option("--network", ac.network, "Edge-list TSV")->required();
        cmd->add_option("--primes", ac.primes, "File with one prime label per line")->required();
        cmd->add_option("--output", ac.output, "Activation matrix CSV")->required();
        detail::add_activation_options(cmd, ac.act);
        cmd->callback([&] {
            SemanticNetwork g = read_edge_list(ac.network);
            std::vector<std::string> primes = llm::load_cue_list(ac.primes);
            ActivationMatrix m = spread_batch(g, primes, ac.act.resolve(), threads);
            write_activation_csv(m, ac.output);
            nlohmann::json params = ac.act.to_json();
            params["network"] = ac.network;
            params["primes"] = primes.size();
            detail::write_meta(ac.output, "activate", params);
            std::cout << "activated " << primes.size() << " primes over " << g.node_count()
                      << " nodes\n";
        });
    }

    // --- prime-experiment ---------------------------------------------------
    struct {
        std::string network, items, outdir, mode = "l1";
        detail::ActivationCliOpts act;
    } pe;
    {
        auto* cmd = app.add_subcommand(
            "prime-experiment", "Semantic-priming study against LDT reaction times");
        cmd->add_option("--network", pe.network, "Edge-list TSV")->required();
        cmd->add_option("--items", pe.items,
                        "CSV: target,related_prime,unrelated_prime,rt_related,rt_unrelated")
            ->required();
        cmd->add_option("--output-dir", pe.outdir, "Report directory")->required();
        cmd->add_option("--mode", pe.mode, "Normalization: l1, max or zscore")
            ->capture_default_str();
        detail::add_activation_options(cmd, pe.act);
        cmd->callback([&] {
            SemanticNetwork g = read_edge_list(pe.network);
            auto items = load_priming_items(pe.items);
            ExperimentReport report = run_priming(g, items, pe.act.resolve(),
                                                  parse_norm_mode(pe.mode), threads);
            write_report(report, pe.outdir);
            nlohmann::json params = pe.act.to_json();
            params["network"] = pe.network;
            params["items"] = pe.items;
            params["mode"] = pe.mode;
            detail::write_meta(fs::path(pe.outdir) / "report.json", "prime-experiment", params);
            const auto& t = report.tests.at("priming");
            const auto& c = report.correlations.at("activation_vs_rt");
            std::cout << "priming effect_r = " << detail::rounded(t.effect_r, 3)
                      << " (p = " << t.p << "), activation~RT rho = "
                      << detail::rounded(c.rho, 3) << " (p = " << c.p << ")\n";
        });
    }

    // --- bias-probe ---------------------------------------------------------
    struct {
        std::string network, probe, outdir, mode = "l1", compare_with;
        detail::ActivationCliOpts act;
    } bp;
    {
        auto* cmd = app.add_subcommand("bias-probe",
                                       "Paired prime activation differences per target category");
        cmd->add_option("--network", bp.network, "Edge-list TSV")->required();
        cmd->add_option("--probe", bp.probe, "Probe JSON (prime_pairs + target lists)")
            ->required();
        cmd->add_option("--output-dir", bp.outdir, "Report directory")->required();
        cmd->add_option("--mode", bp.mode, "Normalization: l1, max or zscore")
            ->capture_default_str();
        cmd->add_option("--compare-with", bp.compare_with,
                        "heatmap.csv from another network's run; adds per-category "
                        "cross-model Spearman correlations");
        detail::add_activation_options(cmd, bp.act);
        cmd->callback([&] {
            SemanticNetwork g = read_edge_list(bp.network);
            GenderProbe probe = load_gender_probe(bp.probe);
            ExperimentReport report = run_bias_probe(g, probe, bp.act.resolve(),
                                                     parse_norm_mode(bp.mode), threads);
            if (!bp.compare_with.empty()) {
                ExperimentReport other = load_bias_heatmap(bp.compare_with);
                for (const auto& [category, corr] : cross_model_correlation(report, other))
                    report.correlations.emplace("cross_model_" + category, corr);
                report.metadata["compared_with"] = bp.compare_with;
            }
            write_report(report, bp.outdir);
            nlohmann::json params = bp.act.to_json();
            params["network"] = bp.network;
            params["probe"] = bp.probe;
            params["mode"] = bp.mode;
            detail::write_meta(fs::path(bp.outdir) / "report.json", "bias-probe", params);
            for (const auto& [category, t] : report.tests)
                std::cout << category << " effect_r = " << detail::rounded(t.effect_r, 3)
                          << " (p = " << t.p << ")\n";
        });
    }

    // --- generate -----------------------------------------------------------
    struct {
        std::string cues, config, output, log;
        bool do_resume = false;
    } gen;
    {
        auto* cmd = app.add_subcommand(
            "generate", "Regenerate norms from an OpenAI-compatible chat endpoint");
        cmd->add_option("--cues", gen.cues, "File with one cue per line");
        cmd->add_option("--config", gen.config, "Generation config JSON")->required();
        cmd->add_option("--output", gen.output, "Raw norms CSV to write")->required();
        cmd->add_option("--log", gen.log, "Append-only JSONL request log")->required();
        cmd->add_flag("--resume", gen.do_resume, "Re-request only missing/failed slots");
        cmd->callback([&] {
            llm::GenConfig cfg = llm::GenConfig::from_json_file(gen.config);
            llm::GenerationResult result;
            if (gen.do_resume) {
                result = llm::resume(gen.log, cfg);
            } else {
                require(!gen.cues.empty(), "cli: --cues is required unless --resume is given");
                result = llm::generate(llm::load_cue_list(gen.cues), cfg, gen.log);
            }
            write_norms_csv(result.table, gen.output);
            detail::write_meta(gen.output, "generate",
                               {{"model", cfg.model},
                                {"endpoint", cfg.endpoint},
                                {"repetitions", cfg.repetitions},
                                {"slots_requested", result.requests_issued},
                                {"slots_failed", result.failed_slots}});
            std::cout << "generated " << result.table.rows.size() << " rows ("
                      << result.failed_slots << " failed slots)\n";
        });
    }

    // --- pipeline -----------------------------------------------------------
    struct {
        std::string input, lexicon_dir, outdir, ldt_items, gender_probe, mode = "l1";
        std::uint64_t seed = 0;
        detail::ActivationCliOpts act;
    } pl;
    {
        auto* cmd = app.add_subcommand(
            "pipeline", "preprocess -> build-net -> experiments for one dataset");
        cmd->add_option("--input", pl.input, "Raw norms CSV")->required();
        cmd->add_option("--lexicon-dir", pl.lexicon_dir, "Lexicon resources directory")
            ->required();
        cmd->add_option("--seed", pl.seed, "Seed for downsampling")->capture_default_str();
        cmd->add_option("--outdir", pl.outdir, "Output directory")->required();
        cmd->add_option("--ldt-items", pl.ldt_items, "Run the priming study with these items");
        cmd->add_option("--gender-probe", pl.gender_probe, "Run the bias probe with this JSON");
        cmd->add_option("--mode", pl.mode, "Normalization: l1, max or zscore")
            ->capture_default_str();
        detail::add_activation_options(cmd, pl.act);
        cmd->callback([&] {
            fs::create_directories(pl.outdir);
            const fs::path outdir(pl.outdir);
            Lexicon lex = load_lexicon_dir(pl.lexicon_dir);
            nlohmann::json run_params = {{"input", pl.input},
                                         {"lexicon_dir", pl.lexicon_dir},
                                         {"seed", pl.seed},
                                         {"mode", pl.mode},
                                         {"activation", pl.act.to_json()}};
            if (!lex.provenance.is_null()) run_params["lexicon_provenance"] = lex.provenance;

            NormsTable raw = parse_norms_csv(pl.input);
            PreprocessReport rep;
            NormsTable table = preprocess(raw, lex, pl.seed, &rep);
            write_norms_csv(table, outdir / "preprocessed.csv");
            DatasetStats stats = dataset_stats(table);
            {
                auto out = open_output((outdir / "preprocess_report.json").string());
                out << nlohmann::json(rep.to_json()).dump(2) << '\n';
            }
            {
                auto out = open_output((outdir / "dataset_stats.json").string());
                out << stats.to_json().dump(2) << '\n';
            }
            std::cout << "[1/3] preprocessed: " << stats.unique_cues << " cues, "
                      << stats.total_responses << " responses\n";

            SemanticNetwork::Metadata meta;
            meta.source = fs::path(pl.input).stem().string();
            SemanticNetwork full = undirect_max(build_directed(table), meta);
            SemanticNetwork reduced = reduce(full, lex);
            write_edge_list(full, outdir / "network_full.tsv");
            write_edge_list(reduced, outdir / "network.tsv");
            NetStats fstats = net_stats(full), rstats = net_stats(reduced);
            {
                nlohmann::json j = {{"full", fstats.to_json()},
                                    {"reduced", rstats.to_json()},
                                    {"display",
                                     {{"full", detail::stats_display(fstats)},
                                      {"reduced", detail::stats_display(rstats)}}}};
                auto out = open_output((outdir / "net_stats.json").string());
                out << j.dump(2) << '\n';
            }
            std::cout << "[2/3] network: " << rstats.nodes << " nodes, " << rstats.edges
                      << " edges after reduction\n";

            const ActivationParams params = pl.act.resolve();
            const NormMode mode = parse_norm_mode(pl.mode);
            if (!pl.ldt_items.empty()) {
                auto items = load_priming_items(pl.ldt_items);
                ExperimentReport report = run_priming(reduced, items, params, mode, threads);
                write_report(report, outdir / "priming");
                const auto& t = report.tests.at("priming");
                std::cout << "[3/3] priming effect_r = " << detail::rounded(t.effect_r, 3)
                          << "\n";
            }
            if (!pl.gender_probe.empty()) {
                GenderProbe probe = load_gender_probe(pl.gender_probe);
                ExperimentReport report = run_bias_probe(reduced, probe, params, mode, threads);
                write_report(report, outdir / "bias");
                for (const auto& [category, t] : report.tests)
                    std::cout << "[3/3] bias " << category << " effect_r = "
                              << detail::rounded(t.effect_r, 3) << "\n";
            }
            if (pl.ldt_items.empty() && pl.gender_probe.empty())
                std::cout << "[3/3] no experiment fixtures given, skipping studies\n";
            detail::write_meta(outdir / "run", "pipeline", run_params);
        });
    }

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace assocnet::cli
