#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "assocnet/csv.hpp"
#include "assocnet/error.hpp"
#include "assocnet/lexicon.hpp"
#include "assocnet/rng.hpp"
#include "assocnet/text.hpp"

#include <json.hpp>

namespace assocnet {

inline constexpr std::size_t kResponsesPerRow = 3;
inline constexpr std::size_t kRepetitionsPerCue = 100;

// One (cue, R1, R2, R3) record; blank responses are empty strings.
struct NormRow {
    std::string cue;
    std::array<std::string, kResponsesPerRow> responses;
};

struct NormsTable {
    std::vector<NormRow> rows;
    // cue -> row indices, ascending. Contiguous after preprocess (rows sorted by cue).
    std::map<std::string, std::vector<std::size_t>> cue_index;

    void reindex() {
        cue_index.clear();
        for (std::size_t i = 0; i < rows.size(); ++i) cue_index[rows[i].cue].push_back(i);
    }

    bool balanced() const {
        for (const auto& [cue, idx] : cue_index)
            if (idx.size() != kRepetitionsPerCue) return false;
        return true;
    }
};

struct DatasetStats {
    std::size_t unique_cues = 0;
    std::size_t total_responses = 0;   // non-blank response cells
    std::size_t unique_responses = 0;  // distinct non-blank strings
    double missing_pct = 0.0;          // blanks / (unique_cues * 300) * 100

    nlohmann::json to_json() const {
        return {{"unique_cues", unique_cues},
                {"total_responses", total_responses},
                {"unique_responses", unique_responses},
                {"missing_pct", missing_pct}};
    }
};

// Per-step transformation counts emitted by preprocess().
struct PreprocessReport {
    std::uint64_t seed = 0;
    std::size_t input_rows = 0;
    std::size_t empty_cue_rows_dropped = 0;
    std::size_t articles_stripped = 0;
    std::size_t underscores_replaced = 0;
    std::size_t compounds_repaired = 0;
    std::size_t spellings_corrected = 0;
    std::size_t lemmatized = 0;
    std::size_t cues_merged = 0;       // cue groups fused by spelling/lemma rewrites
    std::size_t rows_padded = 0;
    std::size_t rows_sampled_out = 0;
    std::size_t cue_echoes_blanked = 0;
    std::size_t duplicates_blanked = 0;
    std::size_t output_rows = 0;

    nlohmann::json to_json() const {
        return {{"seed", seed},
                {"input_rows", input_rows},
                {"empty_cue_rows_dropped", empty_cue_rows_dropped},
                {"articles_stripped", articles_stripped},
                {"underscores_replaced", underscores_replaced},
                {"compounds_repaired", compounds_repaired},
                {"spellings_corrected", spellings_corrected},
                {"lemmatized", lemmatized},
                {"cues_merged", cues_merged},
                {"rows_padded", rows_padded},
                {"rows_sampled_out", rows_sampled_out},
                {"cue_echoes_blanked", cue_echoes_blanked},
                {"duplicates_blanked", duplicates_blanked},
                {"output_rows", output_rows},
                {"step_order",
                 "lowercase, article-strip, underscores, compounds, spelling, lemma, "
                 "balance, cue-echo, within-row-duplicates"}};
    }
};

inline const std::array<std::string, 4> kStrippablePrefixes = {"a ", "an ", "the ", "to "};

inline NormsTable parse_norms_csv(const std::filesystem::path& path) {
    auto in = open_input(path.string());
    CsvParser parser(in);
    std::vector<std::string> fields;
    require(parser.next(fields), "norms: empty file, expected header 'cue,R1,R2,R3' in ",
            path.string());
    require(fields.size() == 4 && fields[0] == "cue" && fields[1] == "R1" &&
                fields[2] == "R2" && fields[3] == "R3",
            "norms: missing or malformed header (expected 'cue,R1,R2,R3') in ", path.string());
    NormsTable table;
    while (parser.next(fields)) {
        require(fields.size() == 4, "norms: row with ", fields.size(),
                " fields (expected 4) at line ", parser.line(), " in ", path.string());
        NormRow row;
        row.cue = std::move(fields[0]);
        for (std::size_t i = 0; i < kResponsesPerRow; ++i)
            row.responses[i] = std::move(fields[i + 1]);
        table.rows.push_back(std::move(row));
    }
    table.reindex();
    return table;
}

inline void write_norms_csv(const NormsTable& table, const std::filesystem::path& path) {
    auto out = open_output(path.string());
    out << "cue,R1,R2,R3\n";
    for (const NormRow& row : table.rows)
        write_csv_row(out, {row.cue, row.responses[0], row.responses[1], row.responses[2]});
    require(out.good(), "norms: write failed: ", path.string());
}

// Applies the cleaning pipeline in its fixed order and balances every cue to
// exactly 100 rows. Deterministic for a given (input, lexicon, seed) triple.
inline NormsTable preprocess(const NormsTable& raw, const Lexicon& lex, std::uint64_t seed,
                             PreprocessReport* report_out = nullptr) {
    PreprocessReport report;
    report.seed = seed;
    report.input_rows = raw.rows.size();

    // 1. lowercase; the original-cue inventory guards article stripping below
    std::vector<NormRow> rows;
    rows.reserve(raw.rows.size());
    std::unordered_set<std::string> original_cues;
    for (const NormRow& r : raw.rows) {
        NormRow row;
        row.cue = to_lower(trim(r.cue));
        for (std::size_t i = 0; i < kResponsesPerRow; ++i)
            row.responses[i] = to_lower(trim(r.responses[i]));
        if (row.cue.empty()) {
            ++report.empty_cue_rows_dropped;
            continue;
        }
        original_cues.insert(row.cue);
        rows.push_back(std::move(row));
    }

    for (NormRow& row : rows) {
        for (std::string& resp : row.responses) {
            if (resp.empty()) continue;
            // 2. leading article/preposition, unless the response is an original cue
            if (!original_cues.count(resp)) {
                for (const std::string& prefix : kStrippablePrefixes) {
                    if (starts_with(resp, prefix)) {
                        resp = trim(resp.substr(prefix.size()));
                        ++report.articles_stripped;
                        break;
                    }
                }
            }
            // 3. underscores to spaces
            if (resp.find('_') != std::string::npos) {
                for (char& c : resp)
                    if (c == '_') c = ' ';
                resp = trim(resp);
                ++report.underscores_replaced;
            }
            // 4. compound repair
            if (const std::string* fixed = Lexicon::lookup(lex.compound_map, resp)) {
                resp = *fixed;
                ++report.compounds_repaired;
            }
        }
        // 5. spelling, 6. lemma — applied to cues and responses
        if (const std::string* sp = Lexicon::lookup(lex.spelling_map, row.cue)) {
            row.cue = *sp;
            ++report.spellings_corrected;
        }
        if (const std::string* lm = Lexicon::lookup(lex.lemma_map, row.cue)) {
            if (*lm != row.cue) ++report.lemmatized;
            row.cue = *lm;
        }
        for (std::string& resp : row.responses) {
            if (resp.empty()) continue;
            if (const std::string* sp = Lexicon::lookup(lex.spelling_map, resp)) {
                resp = *sp;
                ++report.spellings_corrected;
            }
            if (const std::string* lm = Lexicon::lookup(lex.lemma_map, resp)) {
                if (*lm != resp) ++report.lemmatized;
                resp = *lm;
            }
        }
    }

    // 7. balance: group by (possibly rewritten) cue, keep original row order
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].cue].push_back(i);

    std::set<std::string> post_map_cues;
    for (const NormRow& row : rows) post_map_cues.insert(row.cue);
    if (original_cues.size() > post_map_cues.size())
        report.cues_merged = original_cues.size() - post_map_cues.size();

    NormsTable out;
    out.rows.reserve(groups.size() * kRepetitionsPerCue);
    for (auto& [cue, indices] : groups) {
        if (indices.size() > kRepetitionsPerCue) {
            Rng rng(seed ^ fnv1a64(cue));
            report.rows_sampled_out += indices.size() - kRepetitionsPerCue;
            auto keep = sample_indices(indices.size(), kRepetitionsPerCue, rng);
            std::vector<std::size_t> kept;
            kept.reserve(kRepetitionsPerCue);
            for (std::size_t k : keep) kept.push_back(indices[k]);
            indices = std::move(kept);
        }
        for (std::size_t idx : indices) out.rows.push_back(std::move(rows[idx]));
        for (std::size_t pad = indices.size(); pad < kRepetitionsPerCue; ++pad) {
            out.rows.push_back(NormRow{cue, {"", "", ""}});
            ++report.rows_padded;
        }
    }

    // 8. blank responses echoing the cue; 9. blank within-row duplicates (keep first)
    for (NormRow& row : out.rows) {
        for (std::size_t i = 0; i < kResponsesPerRow; ++i) {
            std::string& resp = row.responses[i];
            if (resp.empty()) continue;
            if (resp == row.cue) {
                resp.clear();
                ++report.cue_echoes_blanked;
                continue;
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (!row.responses[j].empty() && row.responses[j] == resp) {
                    resp.clear();
                    ++report.duplicates_blanked;
                    break;
                }
            }
        }
    }

    out.reindex();
    report.output_rows = out.rows.size();
    if (report_out) *report_out = report;
    return out;
}

inline DatasetStats dataset_stats(const NormsTable& t) {
    require(t.balanced(), "norms: dataset_stats requires a balanced table (100 rows per cue)");
    DatasetStats stats;
    stats.unique_cues = t.cue_index.size();
    std::unordered_set<std::string> distinct;
    for (const NormRow& row : t.rows) {
        for (const std::string& resp : row.responses) {
            if (resp.empty()) continue;
            ++stats.total_responses;
            distinct.insert(resp);
        }
    }
    stats.unique_responses = distinct.size();
    const std::size_t cells = stats.unique_cues * kRepetitionsPerCue * kResponsesPerRow;
    stats.missing_pct =
        cells == 0 ? 0.0
                   : 100.0 * static_cast<double>(cells - stats.total_responses) /
                         static_cast<double>(cells);
    return stats;
}

}  // namespace assocnet
