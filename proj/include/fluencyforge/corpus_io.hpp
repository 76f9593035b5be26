#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fluencyforge::corpus {

enum class Origin { Monolingual, BilingualTarget, BilingualSource, HumanTest };
const char* to_string(Origin o);

// A loaded corpus: one whitespace-normalized, non-empty sentence per entry.
struct RawCorpus {
    std::vector<std::string> sentences;
    Origin origin = Origin::Monolingual;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
};

struct LoadReport {
    std::size_t kept = 0;
    std::size_t dropped_blank = 0;
};

// Core of load_corpus, usable without touching the filesystem. Validates
// UTF-8 (error names `source_name` and the 1-based line number), normalizes
// whitespace, and drops lines that end up empty.
RawCorpus corpus_from_lines(const std::vector<std::string>& lines, Origin origin,
                            const std::string& source_name, LoadReport* report = nullptr);

RawCorpus load_corpus(const std::string& path, Origin origin, LoadReport* report = nullptr);

enum class PairLabel { Mono, Bilingual };
const char* to_string(PairLabel l);

struct LabeledPair {
    std::string text;
    PairLabel label = PairLabel::Mono;

    bool operator==(const LabeledPair&) const = default;
};

struct ParallelPair {
    std::string source;
    std::string target;

    bool operator==(const ParallelPair&) const = default;
};

struct ParallelLoadReport {
    std::size_t kept = 0;
    std::size_t dropped_incomplete = 0; // pairs with an empty side
};

// Loads two positionally aligned files. Line counts must match; pairs where
// either side normalizes to empty are dropped as a unit (keeping the i-th
// source with the i-th target).
std::vector<ParallelPair> load_parallel(const std::string& src_path, const std::string& tgt_path,
                                        ParallelLoadReport* report = nullptr);

using TokenLengthFn = std::function<std::size_t(const std::string&)>;

struct SampleReport {
    std::size_t n_total = 0;
    std::size_t n_exact = 0;
    double exact_match_rate = 1.0; // n_exact / n_total; 1.0 when n_total == 0
};

// Draws |reference| sentences from `mono` without replacement so that the
// i-th draw has the same token length as the i-th reference sentence when
// any unused sentence of that length exists, else the nearest available
// length (ties broken toward shorter). Deterministic given (inputs, seed).
RawCorpus sample_length_matched(const RawCorpus& mono, const RawCorpus& reference,
                                const TokenLengthFn& token_length, std::uint64_t seed,
                                SampleReport* report = nullptr);

struct ClassificationSplits {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> dev;
    std::vector<LabeledPair> test;
};

// Builds label-balanced train/dev/test splits from equally sized bilingual
// and monolingual corpora. dev_n and test_n are per-class counts (dev holds
// dev_n BILINGUAL + dev_n MONO sentences). Splits are disjoint and each is
// shuffled; deterministic given seed.
ClassificationSplits build_classification_dataset(const RawCorpus& bilingual_targets,
                                                  const RawCorpus& mono_sampled,
                                                  std::size_t dev_n, std::size_t test_n,
                                                  std::uint64_t seed);

// Original pairs first, synthetic appended; order within each preserved.
std::vector<ParallelPair> concat_backtranslation(const std::vector<ParallelPair>& original,
                                                 const std::vector<ParallelPair>& synthetic);

// Labeled-dataset TSV: one "LABEL\ttext" line per pair, labels MONO/BILINGUAL.
std::string to_tsv(const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> parse_tsv(std::string_view tsv, const std::string& source_name);
void write_tsv(const std::string& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> read_tsv(const std::string& path);

} // namespace fluencyforge::corpus
