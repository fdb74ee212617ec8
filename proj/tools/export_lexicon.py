#!/usr/bin/env python3
"""Export the lexicon resource files consumed by assocnet from WordNet.

Produces, inside --output-dir:
  words.txt      one valid word per line (WordNet lemma names, '_' -> ' ')
  lemmas.tsv     noun plural -> singular map (tensed verbs left alone)
  spellings.tsv  misspelling/British -> American map (pass-through of
                 --spelling-csv if given, empty otherwise)
  compounds.tsv  concatenated form -> spaced/hyphenated form, one-to-one
  metadata.json  provenance sidecar (nltk/WordNet versions, counts)

Requires nltk with the wordnet corpus:
  pip install nltk && python -m nltk.downloader wordnet

This is a one-time export; the toolkit itself has no NLP dependencies.
"""

import argparse
import csv
import json
import sys
from pathlib import Path


def wordnet_or_die():
    try:
        import nltk
        from nltk.corpus import wordnet
        wordnet.ensure_loaded()
        return nltk, wordnet
    except LookupError:
        sys.exit("wordnet corpus missing: run  python -m nltk.downloader wordnet")
    except ImportError:
        sys.exit("nltk not installed: run  pip install nltk")


def plural_candidates(lemma: str):
    """Surface forms whose noun lemmatization might land on `lemma`."""
    yield lemma + "s"
    yield lemma + "es"
    if lemma.endswith("y"):
        yield lemma[:-1] + "ies"
    if lemma.endswith("f"):
        yield lemma[:-1] + "ves"
    if lemma.endswith("fe"):
        yield lemma[:-2] + "ves"


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--output-dir", required=True, type=Path)
    parser.add_argument("--spelling-csv", type=Path,
                        help="two-column CSV of misspelling,correction to convert "
                             "(e.g. the Small World of Words spelling dictionary)")
    args = parser.parse_args()

    nltk, wordnet = wordnet_or_die()
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)

    # word list: every lemma name, underscores as spaces
    words = set()
    for synset in wordnet.all_synsets():
        for lemma in synset.lemma_names():
            words.add(lemma.lower().replace("_", " "))
    with open(out / "words.txt", "w", encoding="utf-8", newline="\n") as f:
        for word in sorted(words):
            f.write(word + "\n")

    # noun plural -> singular: candidate surface forms arbitrated by morphy,
    # plus WordNet's irregular noun exceptions
    lemma_map = {}
    candidates = set()
    for exc in wordnet._exception_map["n"]:
        candidates.add(exc)
    singulars = {w for w in words if " " not in w and "-" not in w}
    for lemma in singulars:
        candidates.update(plural_candidates(lemma))
    for cand in sorted(candidates):
        base = wordnet.morphy(cand, wordnet.NOUN)
        if base and base != cand:
            lemma_map[cand] = base
    with open(out / "lemmas.tsv", "w", encoding="utf-8", newline="\n") as f:
        for key in sorted(lemma_map):
            f.write(f"{key}\t{lemma_map[key]}\n")

    # spelling map is external data; convert when provided
    spelling_count = 0
    with open(out / "spellings.tsv", "w", encoding="utf-8", newline="\n") as f:
        if args.spelling_csv:
            with open(args.spelling_csv, encoding="utf-8") as src:
                for row in csv.reader(src):
                    if len(row) < 2 or not row[0] or not row[1]:
                        continue
                    f.write(f"{row[0].strip().lower()}\t{row[1].strip().lower()}\n")
                    spelling_count += 1

    # compound repair map: strip separators, drop colliding keys
    buckets = {}
    for word in words:
        if " " in word or "-" in word:
            buckets.setdefault(word.replace(" ", "").replace("-", ""), set()).add(word)
    compounds = {k: next(iter(v)) for k, v in buckets.items() if len(v) == 1}
    dropped = sum(len(v) for v in buckets.values() if len(v) > 1)
    with open(out / "compounds.tsv", "w", encoding="utf-8", newline="\n") as f:
        for key in sorted(compounds):
            f.write(f"{key}\t{compounds[key]}\n")

    metadata = {
        "generator": "export_lexicon.py",
        "nltk_version": nltk.__version__,
        "wordnet_version": wordnet.get_version(),
        "word_count": len(words),
        "lemma_entries": len(lemma_map),
        "spelling_entries": spelling_count,
        "compound_entries": len(compounds),
        "compound_collisions_dropped": dropped,
    }
    with open(out / "metadata.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {len(words)} words, {len(lemma_map)} lemma entries, "
          f"{len(compounds)} compounds ({dropped} collisions dropped) to {out}")


if __name__ == "__main__":
    main()
