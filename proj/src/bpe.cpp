#include "fluencyforge/bpe.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/unicode.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>

namespace fluencyforge::bpe {

namespace {

constexpr std::string_view kEow = "</w>";
constexpr std::string_view kMergeHeader = "#version: fluency-forge-bpe-1";

bool ends_with_eow(std::string_view sym) {
    return sym.size() > kEow.size() && sym.compare(sym.size() - kEow.size(), kEow.size(), kEow) == 0;
}

std::vector<std::string> word_to_symbols(const std::string& word) {
    std::vector<std::string> symbols = unicode::codepoints(word);
    symbols.back() += kEow;
    return symbols;
}

} // namespace

const std::array<std::string, Tokenizer::kNumSpecials>& Tokenizer::specials() {
    static const std::array<std::string, kNumSpecials> s = {"[CLS]", "[SEP]", "[MASK]",
                                                            "<mask>", "[PAD]", "[UNK]"};
    return s;
}

bool Tokenizer::is_special_literal(std::string_view token) {
    for (const std::string& s : specials())
        if (token == s)
            return true;
    return false;
}

void Tokenizer::add_token(const std::string& token) {
    token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(token);
}

void Tokenizer::rebuild_merge_ranks() {
    merge_rank_.clear();
    for (std::size_t r = 0; r < merges_.size(); ++r)
        merge_rank_.emplace(merges_[r], r);
}

Tokenizer Tokenizer::learn(const std::vector<std::string>& corpus, std::size_t target_vocab_size) {
    using Pair = std::pair<std::string, std::string>;

    // Count surface words; reserved literals stay atomic and learn nothing.
    std::map<std::string, std::int64_t> word_counts;
    for (const std::string& sentence : corpus)
        for (std::string& w : unicode::split_words(unicode::normalize_whitespace(sentence)))
            if (!is_special_literal(w))
                ++word_counts[std::move(w)];
    if (word_counts.empty())
        throw DataError("cannot learn merges: corpus has no words");

    struct WordEntry {
        std::vector<std::string> symbols;
        std::int64_t count;
    };
    std::vector<WordEntry> words;
    words.reserve(word_counts.size());
    std::set<std::string> alphabet;
    for (const auto& [word, count] : word_counts) {
        WordEntry e{word_to_symbols(word), count};
        for (const std::string& cp : unicode::codepoints(word))
            alphabet.insert(cp);
        words.push_back(std::move(e));
    }

    Tokenizer t;
    for (const std::string& s : specials())
        t.add_token(s);
    // Both positional variants of every character, so encode can always fall
    // back to character symbols for unseen words over the training alphabet.
    for (const std::string& cp : alphabet) {
        t.add_token(cp);
        t.add_token(cp + std::string(kEow));
    }
    if (target_vocab_size <= t.vocab_size())
        throw DataError("target vocab size " + std::to_string(target_vocab_size) +
                        " does not exceed alphabet + reserved tokens (" +
                        std::to_string(t.vocab_size()) + ")");

    // Pair statistics with a word index per pair, kept exact under merges.
    std::map<Pair, std::int64_t> pair_counts;
    std::map<Pair, std::set<std::size_t>> pair_words;
    auto add_pairs = [&](std::size_t w) {
        const auto& sym = words[w].symbols;
        for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
            Pair p{sym[i], sym[i + 1]};
            pair_counts[p] += words[w].count;
            pair_words[p].insert(w);
        }
    };
    auto remove_pairs = [&](std::size_t w) {
        const auto& sym = words[w].symbols;
        for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
            Pair p{sym[i], sym[i + 1]};
            auto it = pair_counts.find(p);
            it->second -= words[w].count;
            if (it->second <= 0)
                pair_counts.erase(it);
            auto wit = pair_words.find(p);
            if (wit != pair_words.end()) {
                wit->second.erase(w);
                if (wit->second.empty())
                    pair_words.erase(wit);
            }
        }
    };
    for (std::size_t w = 0; w < words.size(); ++w)
        add_pairs(w);

    while (t.vocab_size() < target_vocab_size) {
        // Most frequent pair; first hit in the ordered map is the
        // lexicographically smallest among equal counts. Pairs whose
        // product spells a reserved literal are never merge candidates.
        const Pair* best = nullptr;
        std::int64_t best_count = 0;
        for (const auto& [pair, count] : pair_counts) {
            if (count > best_count && !is_special_literal(pair.first + pair.second)) {
                best = &pair;
                best_count = count;
            }
        }
        if (best == nullptr || best_count < 2)
            break;

        const Pair merge = *best;
        const std::string product = merge.first + merge.second;
        const std::set<std::size_t> affected = pair_words[merge];
        for (std::size_t w : affected) {
            remove_pairs(w);
            auto& sym = words[w].symbols;
            std::vector<std::string> next;
            next.reserve(sym.size());
            for (std::size_t i = 0; i < sym.size();) {
                if (i + 1 < sym.size() && sym[i] == merge.first && sym[i + 1] == merge.second) {
                    next.push_back(product);
                    i += 2;
                } else {
                    next.push_back(std::move(sym[i]));
                    ++i;
                }
            }
            sym = std::move(next);
            add_pairs(w);
        }
        t.merges_.push_back(merge);
        if (t.token_to_id_.find(product) == t.token_to_id_.end())
            t.add_token(product);
    }
    t.rebuild_merge_ranks();
    return t;
}

std::vector<std::string> Tokenizer::apply_merges(std::vector<std::string> symbols) const {
    for (;;) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
            if (it != merge_rank_.end() && it->second < best_rank)
                best_rank = it->second;
        }
        if (best_rank == std::numeric_limits<std::size_t>::max())
            break;
        const auto& [l, r] = merges_[best_rank];
        std::vector<std::string> next;
        next.reserve(symbols.size());
        for (std::size_t i = 0; i < symbols.size();) {
            if (i + 1 < symbols.size() && symbols[i] == l && symbols[i + 1] == r) {
                next.push_back(l + r);
                i += 2;
            } else {
                next.push_back(std::move(symbols[i]));
                ++i;
            }
        }
        symbols = std::move(next);
    }
    return symbols;
}

TokenSequence Tokenizer::encode(const std::string& sentence) const {
    TokenSequence seq;
    for (const std::string& word :
         unicode::split_words(unicode::normalize_whitespace(sentence))) {
        if (is_special_literal(word)) {
            seq.push_back(id_of(word), word, {WordClass::Symbol, PosTag::Symbol});
            continue;
        }
        std::vector<std::string> symbols = apply_merges(word_to_symbols(word));
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            const std::string& sym = symbols[i];
            auto it = token_to_id_.find(sym);
            if (it == token_to_id_.end()) {
                seq.push_back(kUnk, specials()[kUnk], {WordClass::Symbol, PosTag::Symbol});
            } else if (ends_with_eow(sym)) {
                seq.push_back(it->second, sym.substr(0, sym.size() - kEow.size()),
                              {WordClass::Content, PosTag::Noun});
            } else {
                seq.push_back(it->second, sym + "@@", {WordClass::Content, PosTag::Noun});
            }
        }
    }
    return seq;
}

std::size_t Tokenizer::encoded_length(const std::string& sentence) const {
    return encode(sentence).size();
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        const std::string& tok = token_of(id);
        if (id < static_cast<int>(kNumSpecials)) {
            // Reserved tokens stand alone as words.
            if (!out.empty() && out.back() != ' ')
                out += ' ';
            out += tok;
            out += ' ';
        } else if (ends_with_eow(tok)) {
            out.append(tok, 0, tok.size() - kEow.size());
            out += ' ';
        } else {
            out += tok;
        }
    }
    while (!out.empty() && out.back() == ' ')
        out.pop_back();
    return out;
}

std::vector<int> Tokenizer::ids_from_tokenized(const std::string& line) const {
    std::vector<int> ids;
    for (const std::string& tok : unicode::split_words(unicode::normalize_whitespace(line))) {
        int id = -1;
        if (is_special_literal(tok)) {
            for (std::size_t s = 0; s < kNumSpecials; ++s)
                if (tok == specials()[s])
                    id = static_cast<int>(s);
        } else if (tok.size() > 2 && tok.compare(tok.size() - 2, 2, "@@") == 0) {
            id = id_of(tok.substr(0, tok.size() - 2));
        } else {
            id = id_of(tok + std::string(kEow));
        }
        if (id < 0)
            throw DataError("tokenized line contains token '" + tok +
                            "' outside the vocabulary");
        ids.push_back(id);
    }
    return ids;
}

int Tokenizer::id_of(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Tokenizer::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(id_to_token_.size()));
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Tokenizer::merges_text() const {
    std::string out(kMergeHeader);
    out += '\n';
    for (const auto& [l, r] : merges_) {
        out += l;
        out += ' ';
        out += r;
        out += '\n';
    }
    return out;
}

std::string Tokenizer::vocab_text() const {
    std::string out;
    for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
        out += id_to_token_[id];
        out += '\t';
        out += std::to_string(id);
        out += '\n';
    }
    return out;
}

void Tokenizer::save(const std::string& merges_path, const std::string& vocab_path) const {
    io::write_file_atomic(merges_path, merges_text());
    io::write_file_atomic(vocab_path, vocab_text());
}

Tokenizer Tokenizer::load(const std::string& merges_path, const std::string& vocab_path) {
    return from_text(io::read_file(merges_path), io::read_file(vocab_path), merges_path,
                     vocab_path);
}

Tokenizer Tokenizer::from_text(std::string_view merges_text, std::string_view vocab_text,
                               const std::string& merges_name, const std::string& vocab_name) {
    Tokenizer t;

    std::vector<std::string> vocab_lines = io::split_lines(vocab_text);
    for (std::size_t i = 0; i < vocab_lines.size(); ++i) {
        const std::string& line = vocab_lines[i];
        if (line.empty())
            continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("malformed vocab line (no tab) at " + vocab_name + ":" +
                            std::to_string(i + 1));
        std::string token = line.substr(0, tab);
        int id;
        try {
            id = std::stoi(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw DataError("malformed vocab id at " + vocab_name + ":" + std::to_string(i + 1));
        }
        if (id != static_cast<int>(t.id_to_token_.size()))
            throw DataError("vocab ids must be dense and ascending from 0; got id " +
                            std::to_string(id) + " at " + vocab_name + ":" + std::to_string(i + 1));
        if (t.token_to_id_.count(token))
            throw DataError("duplicate vocab token '" + token + "' at " + vocab_name + ":" +
                            std::to_string(i + 1));
        t.add_token(token);
    }
    if (t.vocab_size() < kNumSpecials)
        throw DataError("vocab in " + vocab_name + " is missing the reserved tokens");
    for (std::size_t i = 0; i < kNumSpecials; ++i)
        if (t.id_to_token_[i] != specials()[i])
            throw DataError("vocab in " + vocab_name + " must reserve id " + std::to_string(i) +
                            " for " + specials()[i] + ", found '" + t.id_to_token_[i] + "'");

    std::vector<std::string> merge_lines = io::split_lines(merges_text);
    if (merge_lines.empty() || merge_lines[0] != kMergeHeader)
        throw DataError("merge file " + merges_name + " must start with '" +
                        std::string(kMergeHeader) + "'");
    for (std::size_t i = 1; i < merge_lines.size(); ++i) {
        const std::string& line = merge_lines[i];
        if (line.empty())
            continue;
        std::size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
            line.find(' ', sp + 1) != std::string::npos)
            throw DataError("malformed merge line at " + merges_name + ":" +
                            std::to_string(i + 1) + " (need exactly 'left right')");
        std::string l = line.substr(0, sp);
        std::string r = line.substr(sp + 1);
        if (t.id_of(l) < 0 || t.id_of(r) < 0 || t.id_of(l + r) < 0)
            throw DataError("merge at " + merges_name + ":" + std::to_string(i + 1) +
                            " references tokens absent from the vocab");
        t.merges_.emplace_back(std::move(l), std::move(r));
    }
    t.rebuild_merge_ranks();
    return t;
}

} // namespace fluencyforge::bpe
