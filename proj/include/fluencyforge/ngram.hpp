#pragma once

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/corpus_io.hpp"
#include "fluencyforge/pos_tagger.hpp"
#include "fluencyforge/token_sequence.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fluencyforge::ngram {

// POS-abstracted n-gram analytics: sentences are reduced to word-level
// patterns where content words become their coarse POS tag (NOUN/VERB/
// ADJ/ADV) and function words and punctuation stay verbatim. Patterns are
// counted per corpus, scored by how over-represented they are in one
// corpus relative to the pool, and joined with masking decisions to show
// how often each pattern's function words end up replaced by <mask>.

// A surface word with its word-level annotation.
struct TaggedWord {
    std::string surface;
    TokenAnnotation ann;
};

// Word-level tagging of a raw sentence (whitespace-split words, each
// classified as a whole — not per subword).
std::vector<TaggedWord> tag_words(const std::string& sentence, const pos::LexiconTagger& tagger);

// Content words → POS tag string; everything else (function words,
// punctuation, symbols) → surface verbatim, original casing preserved.
std::vector<std::string> abstract_sequence(const std::vector<TaggedWord>& words);

// tag_words + abstract_sequence.
std::vector<std::string> abstract_sentence(const std::string& sentence,
                                           const pos::LexiconTagger& tagger);

// Canonical single-string form of a pattern: items joined by one space.
// Items never contain whitespace (words are whitespace-split), so the two
// forms are interconvertible.
std::string join_pattern(const std::vector<std::string>& items);
std::vector<std::string> split_pattern(const std::string& pattern);

// Corpus id → abstracted sentences.
using AbstractCorpora = std::map<std::string, std::vector<std::vector<std::string>>>;

struct NgramCounts {
    int n = 1;
    std::int64_t min_count = 1;
    // Patterns that survived the min_count filter → per-corpus counts.
    std::map<std::string, std::map<std::string, std::int64_t>> counts;
    // Sliding-window totals per corpus, counted BEFORE the filter: these
    // are the probability denominators, so dropping rare patterns from the
    // report never changes the probabilities of the surviving ones.
    std::map<std::string, std::int64_t> corpus_totals;

    std::int64_t pooled_total() const;
    std::int64_t pooled_count(const std::string& pattern) const;
    std::int64_t corpus_count(const std::string& pattern, const std::string& corpus_id) const;
};

// Sliding-window counts within sentence boundaries (windows never span two
// sentences). Patterns whose pooled count is below min_count are dropped
// from `counts`; `corpus_totals` always reflects every window. Throws
// UsageError for n < 1 or an empty corpora map.
NgramCounts count_ngrams(const AbstractCorpora& corpora, int n, std::int64_t min_count);

struct ImportanceScore {
    double p_given_c = 0.0; // P(pattern | corpus) = count / corpus total
    double prior = 0.0;     // P(pattern) = pooled count / pooled total
    double importance = 0.0; // p_given_c / prior
};

// Importance of one pattern for one corpus. Returns nullopt when the
// pattern is absent from the counts (never occurred, or was filtered).
// Throws DataError when corpus_id is unknown or has zero n-gram mass.
std::optional<ImportanceScore> importance(const NgramCounts& counts, const std::string& pattern,
                                          const std::string& corpus_id);

struct NgramRecord {
    std::vector<std::string> pattern;
    int n = 1;
    std::map<std::string, std::int64_t> count_per_corpus;
    double p_given_c = 0.0;
    double prior = 0.0;
    double importance = 0.0;
    // Fraction of the pattern's function-word slots whose words were fully
    // replaced by <mask>. Unset until joined with a masked corpus, and
    // unset for patterns with no function slots.
    std::optional<double> mask_ratio;

    std::int64_t pooled_count() const;
    std::int64_t focus_count(const std::string& corpus_id) const;
};

// One record per surviving pattern, scored against `focus_corpus`, sorted
// by importance descending (ties: pooled count descending, then pattern
// ascending). top_k = 0 keeps everything.
std::vector<NgramRecord> rank_ngrams(const NgramCounts& counts, const std::string& focus_corpus,
                                     std::size_t top_k = 0);

// Target sides of a parallel corpus, in order — use on the original pairs
// and on MaskedCorpus::pairs to get the two aligned line sets the mask
// join consumes.
std::vector<std::string> target_lines(const std::vector<corpus::ParallelPair>& pairs);

// Fraction of the pattern's function-word slots, over all its occurrences
// in the corpus, whose words were masked. A word counts as masked only
// when every one of its subwords was replaced by <mask>; POS-tag (content)
// slots are excluded from numerator and denominator. `original_targets`
// are the pre-masking sentences; `masked_targets` the aligned tokenized
// masked lines. Returns nullopt when the pattern never occurs or has no
// function slots. Throws DataError when the two line sets do not align
// token-for-token.
std::optional<double> phrase_mask_ratio(const std::vector<std::string>& pattern,
                                        const std::vector<std::string>& original_targets,
                                        const std::vector<std::string>& masked_targets,
                                        const bpe::Tokenizer& tokenizer,
                                        const pos::LexiconTagger& tagger);

// phrase_mask_ratio over every record in place (one pass over the corpus).
void join_mask_ratios(std::vector<NgramRecord>& records,
                      const std::vector<std::string>& original_targets,
                      const std::vector<std::string>& masked_targets,
                      const bpe::Tokenizer& tokenizer, const pos::LexiconTagger& tagger);

// TSV report: header "pattern\tn\tcount_C\tcount_pool\timportance\tmask_ratio"
// then one row per record in order. Unset mask ratios render as "-".
std::string to_tsv(const std::vector<NgramRecord>& records, const std::string& focus_corpus);
void write_tsv(const std::string& path, const std::vector<NgramRecord>& records,
               const std::string& focus_corpus);

} // namespace fluencyforge::ngram
