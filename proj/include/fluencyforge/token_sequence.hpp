#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace fluencyforge {

// Word class of a subword token. Symbol covers the reserved tokens
// ([CLS], [SEP], [PAD], [MASK], <mask>) which are neither content nor
// function words.
enum class WordClass { Content, Function, Symbol };

enum class PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Det,
    Prep,
    Pron,
    Conj,
    Aux,
    Part,
    Punct,
    Num,
    OtherFunc,
    Symbol,
};

const char* to_string(WordClass c);
const char* to_string(PosTag t);

struct TokenAnnotation {
    WordClass word_class = WordClass::Content;
    PosTag pos = PosTag::Noun;
};

// A tokenized sentence. `surface` uses the "@@" continuation convention:
// a subword ending in "@@" is glued to the next one; reserved tokens keep
// their literal spelling. ids/surface/flags always stay the same length.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> surface;
    std::vector<TokenAnnotation> flags;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }

    bool content(std::size_t i) const { return flags[i].word_class == WordClass::Content; }
    bool function(std::size_t i) const { return flags[i].word_class == WordClass::Function; }
    bool symbol(std::size_t i) const { return flags[i].word_class == WordClass::Symbol; }

    void push_back(int id, std::string text, TokenAnnotation ann) {
        ids.push_back(id);
        surface.push_back(std::move(text));
        flags.push_back(ann);
    }
};

// [first, last) token index ranges of the surface words in `seq`, derived
// from the "@@" continuation markers. Reserved tokens form their own
// single-token span.
std::vector<std::pair<std::size_t, std::size_t>> word_spans(const TokenSequence& seq);

// Surface word covered by a span (continuation markers stripped).
std::string span_text(const TokenSequence& seq, std::pair<std::size_t, std::size_t> span);

} // namespace fluencyforge
