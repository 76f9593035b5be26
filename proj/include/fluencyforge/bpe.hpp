#pragma once

#include "fluencyforge/token_sequence.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fluencyforge::bpe {

// Subword tokenizer learned by greedy byte-pair merging with the "</w>"
// end-of-word convention: the last character of every word is fused with
// the marker, merges never cross word boundaries, and the most frequent
// adjacent pair wins each round (lexicographically smaller pair on ties,
// stop below pair count 2).
//
// Reserved tokens hold ids 0..5 in a fixed order and are atomic: the
// learner never splits a word equal to one, the encoder matches them before
// merge application, and no merge may produce one.
//
// Known limitation (shared with the standard formulation): corpus text that
// itself contains the literal substring "</w>" inside a word is ambiguous
// with the end-of-word marker and is not supported.
class Tokenizer {
public:
    static constexpr int kCls = 0;     // [CLS]
    static constexpr int kSep = 1;     // [SEP]
    static constexpr int kMaskClf = 2; // [MASK]  (classifier content masking)
    static constexpr int kMaskMt = 3;  // <mask>  (fluency-noise masking)
    static constexpr int kPad = 4;     // [PAD]
    static constexpr int kUnk = 5;     // [UNK]
    static constexpr std::size_t kNumSpecials = 6;

    static const std::array<std::string, kNumSpecials>& specials();
    static bool is_special_literal(std::string_view token);

    // Learns merges until the vocabulary reaches `target_vocab_size` or no
    // adjacent pair occurs at least twice. The initial vocabulary holds the
    // reserved tokens plus both variants ("x" and "x</w>") of every
    // character seen in the corpus, so any sentence over the training
    // alphabet round-trips regardless of character position; the target
    // must exceed that floor.
    static Tokenizer learn(const std::vector<std::string>& corpus, std::size_t target_vocab_size);

    // Whitespace-normalizes, splits into words, applies merges in learned
    // order. Surface subwords use the "@@" continuation convention; reserved
    // literals and unknown characters come out as single SYMBOL-flagged
    // tokens. Other flags are defaults for the tagger to fill in.
    TokenSequence encode(const std::string& sentence) const;

    std::size_t encoded_length(const std::string& sentence) const;

    // Inverse of encode on sentences over the training alphabet. Reserved
    // ids render as their literal spelling, as standalone words.
    std::string decode(const std::vector<int>& ids) const;

    // Maps one whitespace-separated line of surface subwords (the "@@"
    // continuation convention, reserved literals standalone) back to exact
    // ids without re-segmenting. DataError names any unknown token.
    std::vector<int> ids_from_tokenized(const std::string& line) const;

    std::size_t vocab_size() const { return id_to_token_.size(); }
    std::size_t merge_count() const { return merges_.size(); }

    // -1 when the token is not in the vocabulary.
    int id_of(std::string_view token) const;
    const std::string& token_of(int id) const; // DataError when out of range

    // Merge list: header line "#version: fluency-forge-bpe-1", then one
    // "left right" line per merge in learned order.
    std::string merges_text() const;
    // Vocabulary: one "token<TAB>id" line per entry, ascending id.
    std::string vocab_text() const;

    void save(const std::string& merges_path, const std::string& vocab_path) const;
    static Tokenizer load(const std::string& merges_path, const std::string& vocab_path);
    static Tokenizer from_text(std::string_view merges_text, std::string_view vocab_text,
                               const std::string& merges_name, const std::string& vocab_name);

private:
    Tokenizer() = default;

    void add_token(const std::string& token);
    void rebuild_merge_ranks();
    std::vector<std::string> apply_merges(std::vector<std::string> symbols) const;

    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::map<std::pair<std::string, std::string>, std::size_t> merge_rank_;
};

} // namespace fluencyforge::bpe
