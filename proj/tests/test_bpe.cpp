#include "fluencyforge/bpe.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/rng.hpp"
#include "fluencyforge/token_sequence.hpp"
#include "fluencyforge/unicode.hpp"

#include <doctest.h>

#include <map>
#include <string>
#include <vector>

using namespace fluencyforge;
using bpe::Tokenizer;

namespace {

using Pair = std::pair<std::string, std::string>;

// Brute-force reference learner: recounts every adjacent pair from scratch
// each round instead of maintaining counts incrementally. Same contract:
// most frequent pair, lexicographically smaller on ties, stop below count 2,
// no merge may spell a reserved literal.
std::vector<Pair> oracle_learn(const std::vector<std::string>& corpus, std::size_t max_merges) {
    std::map<std::string, long long> word_counts;
    for (const auto& s : corpus)
        for (auto& w : unicode::split_words(unicode::normalize_whitespace(s)))
            if (!Tokenizer::is_special_literal(w))
                ++word_counts[w];

    std::vector<std::pair<std::vector<std::string>, long long>> words;
    for (const auto& [w, c] : word_counts) {
        auto sym = unicode::codepoints(w);
        sym.back() += "</w>";
        words.push_back({sym, c});
    }

    std::vector<Pair> merges;
    while (merges.size() < max_merges) {
        std::map<Pair, long long> counts;
        for (const auto& [sym, c] : words)
            for (std::size_t i = 0; i + 1 < sym.size(); ++i)
                counts[{sym[i], sym[i + 1]}] += c;
        const Pair* best = nullptr;
        long long best_count = 0;
        for (const auto& [p, c] : counts)
            if (c > best_count && !Tokenizer::is_special_literal(p.first + p.second)) {
                best = &p;
                best_count = c;
            }
        if (best == nullptr || best_count < 2)
            break;
        Pair m = *best;
        for (auto& [sym, c] : words) {
            std::vector<std::string> next;
            for (std::size_t i = 0; i < sym.size();) {
                if (i + 1 < sym.size() && sym[i] == m.first && sym[i + 1] == m.second) {
                    next.push_back(m.first + m.second);
                    i += 2;
                } else {
                    next.push_back(sym[i]);
                    ++i;
                }
            }
            sym = next;
        }
        merges.push_back(std::move(m));
    }
    return merges;
}

std::vector<Pair> parse_merges(const Tokenizer& t) {
    std::vector<Pair> out;
    bool first = true;
    std::string text = t.merges_text();
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line = text.substr(start, nl - start);
        start = nl + 1;
        if (first) {
            first = false;
            continue;
        }
        if (line.empty())
            continue;
        std::size_t sp = line.find(' ');
        out.push_back({line.substr(0, sp), line.substr(sp + 1)});
    }
    return out;
}

std::vector<std::string> random_corpus(std::uint64_t seed, std::size_t n_sentences) {
    rng::Engine eng(seed);
    const std::string alphabet = "abcd";
    std::vector<std::string> corpus;
    for (std::size_t s = 0; s < n_sentences; ++s) {
        std::string sentence;
        std::size_t n_words = 3 + rng::below(eng, 6);
        for (std::size_t w = 0; w < n_words; ++w) {
            if (w)
                sentence += ' ';
            std::size_t len = 1 + rng::below(eng, 6);
            for (std::size_t c = 0; c < len; ++c)
                sentence += alphabet[rng::below(eng, alphabet.size())];
        }
        corpus.push_back(sentence);
    }
    return corpus;
}

const std::vector<std::string> kEnglishCorpus = {
    "the lowest point of the lower river",
    "newer and newest ideas flow lower",
    "the widest river flows to the west",
    "newer readers read the newest stories",
    "wide rivers flow slower than narrow ones",
    "the lowest reader reads slower stories",
};

} // namespace

TEST_SUITE("bpe") {

TEST_CASE("learned merges match the brute-force oracle exactly (run to exhaustion)") {
    for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        CAPTURE(seed);
        auto corpus = random_corpus(seed, 40);
        auto oracle = oracle_learn(corpus, SIZE_MAX);
        Tokenizer t = Tokenizer::learn(corpus, 100000); // big enough to exhaust
        CHECK(parse_merges(t) == oracle);
    }
    auto oracle = oracle_learn(kEnglishCorpus, SIZE_MAX);
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 100000);
    CHECK(parse_merges(t) == oracle);
}

TEST_CASE("a truncated run is a prefix of the exhaustive oracle sequence") {
    auto corpus = random_corpus(7, 40);
    auto oracle = oracle_learn(corpus, SIZE_MAX);
    Tokenizer probe = Tokenizer::learn(corpus, 100000); // exhausted run
    Tokenizer tiny = Tokenizer::learn(corpus, probe.vocab_size() - 3);
    auto got = parse_merges(tiny);
    REQUIRE(got.size() <= oracle.size());
    REQUIRE(got.size() >= 1);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == oracle[i]);
}

TEST_CASE("first merge on 'ab ab ab' fuses the only word") {
    Tokenizer t = Tokenizer::learn({"ab ab ab"}, 100);
    auto merges = parse_merges(t);
    REQUIRE(merges.size() == 1);
    CHECK(merges[0] == Pair{"a", "b</w>"});
    TokenSequence seq = t.encode("ab");
    REQUIRE(seq.size() == 1);
    CHECK(seq.surface[0] == "ab");
    CHECK(seq.ids[0] == t.id_of("ab</w>"));
}

TEST_CASE("single-character words leave nothing to merge") {
    Tokenizer t = Tokenizer::learn({"a a a"}, 100);
    CHECK(t.merge_count() == 0);
    CHECK(t.vocab_size() == Tokenizer::kNumSpecials + 2); // "a" and "a</w>"
}

TEST_CASE("equal counts break ties toward the lexicographically smaller pair") {
    Tokenizer t = Tokenizer::learn({"cd cd ab ab"}, 100);
    auto merges = parse_merges(t);
    REQUIRE(merges.size() >= 2);
    CHECK(merges[0] == Pair{"a", "b</w>"});
    CHECK(merges[1] == Pair{"c", "d</w>"});
}

TEST_CASE("round-trip holds for training sentences and unseen sentences over the alphabet") {
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 80);
    for (const std::string& s : kEnglishCorpus)
        CHECK(t.decode(t.encode(s).ids) == s);

    // Unseen words over training characters, messy whitespace.
    CHECK(t.decode(t.encode("  widest   newest \t weirdest").ids) == "widest newest weirdest");
    rng::Engine eng(5);
    const std::string alphabet = "adehilnoprstw"; // characters of the corpus
    for (int trial = 0; trial < 50; ++trial) {
        std::string s;
        std::size_t n_words = 1 + rng::below(eng, 5);
        for (std::size_t w = 0; w < n_words; ++w) {
            if (w)
                s += ' ';
            std::size_t len = 1 + rng::below(eng, 8);
            for (std::size_t c = 0; c < len; ++c)
                s += alphabet[rng::below(eng, alphabet.size())];
        }
        CAPTURE(s);
        CHECK(t.decode(t.encode(s).ids) == s);
    }
}

TEST_CASE("surface subwords carry @@ continuation markers that reassemble words") {
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 40); // small vocab forces splits
    for (const std::string& s : {std::string("the lowest stories"), std::string("tallest")}) {
        TokenSequence seq = t.encode(s);
        auto spans = word_spans(seq);
        auto words = unicode::split_words(s);
        REQUIRE(spans.size() == words.size());
        for (std::size_t i = 0; i < spans.size(); ++i)
            CHECK(span_text(seq, spans[i]) == words[i]);
    }
}

TEST_CASE("ids_from_tokenized inverts encode surfaces exactly") {
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 40); // small vocab forces splits
    for (const std::string& s :
         {std::string("the lowest stories"), std::string("tallest towers lean"),
          std::string("a"), std::string("he sells shells"), kEnglishCorpus[0]}) {
        TokenSequence seq = t.encode(s);
        std::string joined;
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i)
                joined += ' ';
            joined += seq.surface[i];
        }
        CHECK(t.ids_from_tokenized(joined) == seq.ids);
    }
    CHECK(t.ids_from_tokenized("").empty());
    CHECK(t.ids_from_tokenized("  \t ").empty());
}

TEST_CASE("ids_from_tokenized handles reserved literals and unknown-character surfaces") {
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 40);
    // A masked target line: the literal stands alone between word surfaces.
    TokenSequence seq = t.encode("the <mask> stories");
    std::string joined;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i)
            joined += ' ';
        joined += seq.surface[i];
    }
    std::vector<int> ids = t.ids_from_tokenized(joined);
    CHECK(ids == seq.ids);
    bool saw_mask = false;
    for (int id : ids)
        if (id == Tokenizer::kMaskMt)
            saw_mask = true;
    CHECK(saw_mask);
    // [UNK] surfaces round-trip through the reserved-literal rule too.
    TokenSequence unk_seq = t.encode("q");
    REQUIRE(unk_seq.size() == 1);
    REQUIRE(unk_seq.ids[0] == Tokenizer::kUnk);
    CHECK(t.ids_from_tokenized(unk_seq.surface[0]) == unk_seq.ids);
}

TEST_CASE("ids_from_tokenized rejects tokens outside the vocabulary") {
    Tokenizer t = Tokenizer::learn({"ab ab"}, 100);
    CHECK_THROWS_AS((void)t.ids_from_tokenized("zzz"), fluencyforge::DataError);
    CHECK_THROWS_AS((void)t.ids_from_tokenized("ab zz@@"), fluencyforge::DataError);
    try {
        (void)t.ids_from_tokenized("ab zzz ab");
    } catch (const fluencyforge::DataError& e) {
        CHECK(std::string(e.what()).find("zzz") != std::string::npos);
    }
}

TEST_CASE("characters outside the training alphabet become [UNK]") {
    Tokenizer t = Tokenizer::learn({"ab ab"}, 100);
    TokenSequence seq = t.encode("aq");
    bool has_unk = false;
    for (int id : seq.ids)
        if (id == Tokenizer::kUnk)
            has_unk = true;
    CHECK(has_unk);
}

TEST_CASE("empty-after-normalization input encodes to an empty sequence") {
    Tokenizer t = Tokenizer::learn({"ab ab"}, 100);
    CHECK(t.encode("").empty());
    CHECK(t.encode(" \t  ").empty());
}

TEST_CASE("reserved literals are atomic in both learning and encoding") {
    Tokenizer t = Tokenizer::learn({"ab <mask> ab <mask> ab cd cd"}, 100);
    // "<mask>" contributed no characters: '<' is not in the alphabet.
    CHECK(t.id_of("<") == -1);
    TokenSequence seq = t.encode("ab <mask> cd");
    REQUIRE(seq.size() == 3);
    CHECK(seq.ids[1] == Tokenizer::kMaskMt);
    CHECK(seq.surface[1] == "<mask>");
    CHECK(seq.symbol(1));
    CHECK(t.decode(seq.ids) == "ab <mask> cd");

    TokenSequence clf = t.encode("[CLS] ab [SEP]");
    REQUIRE(clf.size() == 3);
    CHECK(clf.ids[0] == Tokenizer::kCls);
    CHECK(clf.ids[2] == Tokenizer::kSep);
}

TEST_CASE("decode rejects out-of-range ids") {
    Tokenizer t = Tokenizer::learn({"ab ab"}, 100);
    CHECK_THROWS_AS(t.decode({static_cast<int>(t.vocab_size())}), DataError);
    CHECK_THROWS_AS(t.decode({-1}), DataError);
}

TEST_CASE("learning is deterministic") {
    auto corpus = random_corpus(99, 30);
    Tokenizer a = Tokenizer::learn(corpus, 200);
    Tokenizer b = Tokenizer::learn(corpus, 200);
    CHECK(a.merges_text() == b.merges_text());
    CHECK(a.vocab_text() == b.vocab_text());
}

TEST_CASE("mean tokens per sentence is non-increasing in vocab size") {
    auto mean_tokens = [](const Tokenizer& t, const std::vector<std::string>& corpus) {
        std::size_t total = 0;
        for (const auto& s : corpus)
            total += t.encoded_length(s);
        return static_cast<double>(total) / static_cast<double>(corpus.size());
    };
    double prev = 1e300;
    for (std::size_t target : {40, 60, 80, 120, 200}) {
        Tokenizer t = Tokenizer::learn(kEnglishCorpus, target);
        double m = mean_tokens(t, kEnglishCorpus);
        CHECK(m <= prev + 1e-12);
        prev = m;
    }
}

TEST_CASE("vocab never exceeds the configured target") {
    auto corpus = random_corpus(3, 40);
    for (std::size_t target : {50, 60, 70}) {
        Tokenizer t = Tokenizer::learn(corpus, target);
        CHECK(t.vocab_size() <= target);
    }
}

TEST_CASE("target vocab below the alphabet floor is an error") {
    CHECK_THROWS_AS(Tokenizer::learn({"ab ab"}, 5), DataError);
    CHECK_THROWS_AS(Tokenizer::learn({"ab ab"}, Tokenizer::kNumSpecials + 4), DataError);
    // One above the floor is legal.
    CHECK_NOTHROW(Tokenizer::learn({"ab ab"}, Tokenizer::kNumSpecials + 5));
    CHECK_THROWS_AS(Tokenizer::learn({"", "  "}, 100), DataError); // no words at all
}

TEST_CASE("save/load round-trips the tokenizer byte-for-byte") {
    Tokenizer t = Tokenizer::learn(kEnglishCorpus, 80);
    Tokenizer loaded =
        Tokenizer::from_text(t.merges_text(), t.vocab_text(), "merges.mem", "vocab.mem");
    CHECK(loaded.merges_text() == t.merges_text());
    CHECK(loaded.vocab_text() == t.vocab_text());
    for (const std::string& s : kEnglishCorpus) {
        CHECK(loaded.encode(s).ids == t.encode(s).ids);
        CHECK(loaded.encode(s).surface == t.encode(s).surface);
    }
}

TEST_CASE("loading rejects malformed files") {
    Tokenizer t = Tokenizer::learn({"ab ab"}, 100);
    std::string merges = t.merges_text();
    std::string vocab = t.vocab_text();

    CHECK_THROWS_AS(Tokenizer::from_text("#version: other\n", vocab, "m", "v"), DataError);
    CHECK_THROWS_AS(Tokenizer::from_text("a b</w>\n" + merges, vocab, "m", "v"), DataError);

    std::string sparse = vocab;
    sparse += "zzz\t99\n";
    CHECK_THROWS_AS(Tokenizer::from_text(merges, sparse, "m", "v"), DataError);

    CHECK_THROWS_AS(Tokenizer::from_text(merges, "x\t0\n", "m", "v"), DataError);

    std::string bad_merge = merges + "q r\n";
    CHECK_THROWS_AS(Tokenizer::from_text(bad_merge, vocab, "m", "v"), DataError);
}

} // TEST_SUITE
