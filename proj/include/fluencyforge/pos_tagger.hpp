#pragma once

#include "fluencyforge/token_sequence.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fluencyforge::pos {

// Tag spelled like the file format ("DET", "NOUN", ...); nullopt if unknown.
std::optional<PosTag> parse_tag(std::string_view text);

// NOUN/VERB/ADJ/ADV are content; Symbol is symbol; everything else function.
WordClass word_class_of(PosTag tag);

// Deterministic word tagger: closed-class lexicon plus ordered suffix rules.
// Words made purely of punctuation/symbol characters are FUNCTION(PUNCT),
// digit-shaped words FUNCTION(NUM), closed-class words FUNCTION(their tag);
// all remaining words are CONTENT via the first matching suffix rule
// (NOUN/VERB/ADJ/ADV) or NOUN by default — unknown words can never become
// maskable. Lookup is case-insensitive (ASCII and basic Cyrillic).
class LexiconTagger {
public:
    // Built-in English closed-class lexicon and suffix rules.
    static LexiconTagger english();

    // Lexicon file: "word<TAB>TAG" with TAG in {DET, PREP, PRON, CONJ, AUX,
    // PART, PUNCT, NUM, OTHER-FUNC}. Suffix file: "suffix<TAB>TAG" in
    // priority order with TAG in {NOUN, VERB, ADJ, ADV}. '#'-prefixed lines
    // are comments.
    static LexiconTagger from_files(const std::string& lexicon_path,
                                    const std::string& suffix_path);
    static LexiconTagger from_text(std::string_view lexicon_text, std::string_view suffix_text,
                                   const std::string& lexicon_name, const std::string& suffix_name);

    TokenAnnotation classify_token(std::string_view word) const;

    // Flags every subword in place: reserved tokens SYMBOL, all subwords of
    // one surface word share the word's tag.
    void tag_sequence(TokenSequence& seq) const;

private:
    LexiconTagger() = default;

    std::unordered_map<std::string, PosTag> closed_class_;
    std::vector<std::pair<std::string, PosTag>> suffix_rules_;
};

} // namespace fluencyforge::pos
