#include "fluencyforge/token_sequence.hpp"

namespace fluencyforge {

const char* to_string(WordClass c) {
    switch (c) {
    case WordClass::Content: return "CONTENT";
    case WordClass::Function: return "FUNCTION";
    case WordClass::Symbol: return "SYMBOL";
    }
    return "?";
}

const char* to_string(PosTag t) {
    switch (t) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Adj: return "ADJ";
    case PosTag::Adv: return "ADV";
    case PosTag::Det: return "DET";
    case PosTag::Prep: return "PREP";
    case PosTag::Pron: return "PRON";
    case PosTag::Conj: return "CONJ";
    case PosTag::Aux: return "AUX";
    case PosTag::Part: return "PART";
    case PosTag::Punct: return "PUNCT";
    case PosTag::Num: return "NUM";
    case PosTag::OtherFunc: return "OTHER-FUNC";
    case PosTag::Symbol: return "SYM";
    }
    return "?";
}

namespace {

bool has_continuation_marker(const std::string& s) {
    return s.size() > 2 && s.compare(s.size() - 2, 2, "@@") == 0;
}

} // namespace

std::vector<std::pair<std::size_t, std::size_t>> word_spans(const TokenSequence& seq) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t i = 0;
    while (i < seq.size()) {
        if (seq.symbol(i)) {
            spans.emplace_back(i, i + 1);
            ++i;
            continue;
        }
        std::size_t j = i;
        // Chain while the current subword carries the continuation marker;
        // a symbol token terminates the word even if the marker says otherwise
        // (masking can replace a word-final subword).
        while (j + 1 < seq.size() && has_continuation_marker(seq.surface[j]) && !seq.symbol(j + 1))
            ++j;
        spans.emplace_back(i, j + 1);
        i = j + 1;
    }
    return spans;
}

std::string span_text(const TokenSequence& seq, std::pair<std::size_t, std::size_t> span) {
    std::string out;
    for (std::size_t i = span.first; i < span.second; ++i) {
        const std::string& piece = seq.surface[i];
        if (i + 1 < span.second && has_continuation_marker(piece))
            out.append(piece, 0, piece.size() - 2);
        else
            out.append(piece);
    }
    return out;
}

} // namespace fluencyforge
