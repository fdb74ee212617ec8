#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "assocnet/error.hpp"
#include "assocnet/text.hpp"

#include <json.hpp>

namespace assocnet {

// Dictionary resources consumed as plain data files: a valid-word list plus
// three lookup maps (noun plural -> singular, spelling fixes, and
// concatenated form -> spaced/hyphenated form). Immutable after load.
struct Lexicon {
    std::unordered_set<std::string> valid_words;
    std::unordered_map<std::string, std::string> lemma_map;
    std::unordered_map<std::string, std::string> spelling_map;
    std::unordered_map<std::string, std::string> compound_map;
    nlohmann::json provenance;  // optional metadata.json sidecar, verbatim

    bool is_valid_word(const std::string& w) const { return valid_words.count(w) != 0; }

    // nullptr when the map has no entry for `w`.
    static const std::string* lookup(const std::unordered_map<std::string, std::string>& m,
                                     const std::string& w) {
        auto it = m.find(w);
        return it == m.end() ? nullptr : &it->second;
    }
};

struct CompoundMapResult {
    std::unordered_map<std::string, std::string> map;  // stripped form -> original entry
    std::size_t dropped_collisions = 0;
};

// Builds the one-to-one repair map from multiword entries. Entries whose
// separator-stripped forms collide are all discarded and counted.
inline CompoundMapResult build_compound_map(const std::vector<std::string>& multiword_entries) {
    CompoundMapResult result;
    std::unordered_map<std::string, std::vector<std::string>> buckets;
    for (const std::string& raw : multiword_entries) {
        std::string entry = to_lower(trim(raw));
        if (entry.empty() || !has_separator(entry)) continue;
        buckets[remove_separators(entry)].push_back(entry);
    }
    for (auto& [key, entries] : buckets) {
        std::sort(entries.begin(), entries.end());
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
        if (entries.size() == 1) {
            result.map.emplace(key, entries.front());
        } else {
            result.dropped_collisions += entries.size();
        }
    }
    return result;
}

namespace detail {

inline std::unordered_map<std::string, std::string> load_tsv_map(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "lexicon: cannot open ", path.string());
    std::unordered_map<std::string, std::string> map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        require(tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos,
                "lexicon: malformed line (expected 2 tab-separated columns) in ",
                path.string(), " line ", lineno);
        std::string key = to_lower(trim(line.substr(0, tab)));
        std::string value = to_lower(trim(line.substr(tab + 1)));
        require(!key.empty() && !value.empty(), "lexicon: empty key or value in ",
                path.string(), " line ", lineno);
        auto [it, inserted] = map.emplace(std::move(key), std::move(value));
        require(inserted, "lexicon: duplicate key '", it->first, "' in ", path.string(),
                " line ", lineno);
    }
    return map;
}

}  // namespace detail

inline Lexicon load_lexicon(const std::filesystem::path& word_list_path,
                            const std::filesystem::path& lemma_path,
                            const std::filesystem::path& spelling_path,
                            const std::filesystem::path& compound_path) {
    Lexicon lex;

    {
        std::ifstream in(word_list_path, std::ios::binary);
        require(in.good(), "lexicon: cannot open ", word_list_path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string entry = to_lower(trim(line));
            if (!entry.empty()) lex.valid_words.insert(std::move(entry));
        }
    }

    lex.lemma_map = detail::load_tsv_map(lemma_path);
    lex.spelling_map = detail::load_tsv_map(spelling_path);
    lex.compound_map = detail::load_tsv_map(compound_path);

    // The compound map must be injective and keyed by the stripped value.
    std::unordered_set<std::string> seen_values;
    for (const auto& [key, value] : lex.compound_map) {
        require(remove_separators(value) == key, "lexicon: compound entry '", key, "' -> '",
                value, "' does not match its separator-stripped form in ",
                compound_path.string());
        require(seen_values.insert(value).second,
                "lexicon: compound map is not one-to-one, value '", value,
                "' appears twice in ", compound_path.string());
    }
    return lex;
}

// Directory layout: words.txt, lemmas.tsv, spellings.tsv, compounds.tsv,
// optional metadata.json describing resource provenance.
inline Lexicon load_lexicon_dir(const std::filesystem::path& dir) {
    Lexicon lex = load_lexicon(dir / "words.txt", dir / "lemmas.tsv", dir / "spellings.tsv",
                               dir / "compounds.tsv");
    auto meta_path = dir / "metadata.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        require(in.good(), "lexicon: cannot open ", meta_path.string());
        try {
            lex.provenance = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail("lexicon: invalid metadata.json in ", dir.string(), ": ", e.what());
        }
    }
    return lex;
}

}  // namespace assocnet
