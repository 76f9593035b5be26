#include "fluencyforge/bleu.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <regex>
#include <string>
#include <vector>

using namespace fluencyforge;

namespace {

// Independent oracle: the same scoring signature implemented over
// std::regex and vector-keyed n-gram maps, kept deliberately separate from
// the production code paths.
std::vector<std::string> oracle_tokenize(std::string s) {
    s = std::regex_replace(s, std::regex("<skipped>"), "");
    s = std::regex_replace(s, std::regex("-\n"), "");
    s = std::regex_replace(s, std::regex("\n"), " ");
    s = std::regex_replace(s, std::regex("&quot;"), "\"");
    s = std::regex_replace(s, std::regex("&amp;"), "&");
    s = std::regex_replace(s, std::regex("&lt;"), "<");
    s = std::regex_replace(s, std::regex("&gt;"), ">");
    s = std::regex_replace(s, std::regex("([\\{-\\~\\[-\\` -\\&\\(-\\+\\:-\\@\\/])"), " $1 ");
    s = std::regex_replace(s, std::regex("([^0-9])([\\.,])"), "$1 $2 ");
    s = std::regex_replace(s, std::regex("([\\.,])([^0-9])"), " $1 $2");
    s = std::regex_replace(s, std::regex("([0-9])(-)"), "$1 - ");
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v' || c == '\n') {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        tokens.push_back(cur);
    return tokens;
}

double oracle_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
    long long matched[4] = {0, 0, 0, 0};
    long long total[4] = {0, 0, 0, 0};
    long long hyp_len = 0;
    long long ref_len = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const auto h = oracle_tokenize(hyps[i]);
        const auto r = oracle_tokenize(refs[i]);
        hyp_len += static_cast<long long>(h.size());
        ref_len += static_cast<long long>(r.size());
        for (std::size_t n = 1; n <= 4; ++n) {
            std::map<std::vector<std::string>, long long> hc, rc;
            for (std::size_t k = 0; k + n <= h.size(); ++k)
                ++hc[std::vector<std::string>(h.begin() + k, h.begin() + k + n)];
            for (std::size_t k = 0; k + n <= r.size(); ++k)
                ++rc[std::vector<std::string>(r.begin() + k, r.begin() + k + n)];
            for (const auto& [gram, count] : hc) {
                total[n - 1] += count;
                auto it = rc.find(gram);
                if (it != rc.end())
                    matched[n - 1] += std::min(count, it->second);
            }
        }
    }
    if (hyp_len == 0)
        return 0.0;
    double p[4] = {0, 0, 0, 0};
    double smooth = 1.0;
    for (int n = 0; n < 4; ++n) {
        if (total[n] == 0)
            break;
        if (matched[n] == 0) {
            smooth *= 2.0;
            p[n] = 100.0 / (smooth * static_cast<double>(total[n]));
        } else {
            p[n] = 100.0 * static_cast<double>(matched[n]) / static_cast<double>(total[n]);
        }
    }
    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (p[n] <= 0.0)
            return 0.0;
        log_sum += std::log(p[n] / 100.0);
    }
    const double bp = hyp_len < ref_len
                          ? std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len))
                          : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

} // namespace

TEST_SUITE("bleu") {

TEST_CASE("13a tokenization handles punctuation, numbers, and entities") {
    using V = std::vector<std::string>;
    CHECK(bleu::tokenize_13a("Hello, world!") == V{"Hello", ",", "world", "!"});
    CHECK(bleu::tokenize_13a("It costs 3.50 now.") == V{"It", "costs", "3.50", "now", "."});
    CHECK(bleu::tokenize_13a("&quot;Yes&amp;no&quot;") == V{"\"", "Yes", "&", "no", "\""});
    CHECK(bleu::tokenize_13a("2020-21") == V{"2020", "-", "21"});
    CHECK(bleu::tokenize_13a("pre-war era") == V{"pre-war", "era"});
    CHECK(bleu::tokenize_13a("(a)") == V{"(", "a", ")"});
    CHECK(bleu::tokenize_13a("a<skipped>b") == V{"ab"});
    CHECK(bleu::tokenize_13a("hyphen-\nated line\nbreak") == V{"hyphenated", "line", "break"});
    CHECK(bleu::tokenize_13a("x.3 and 3.x") == V{"x", ".", "3", "and", "3", ".", "x"});
    // Non-ASCII passes through untouched (guillemets are not ASCII punctuation).
    CHECK(bleu::tokenize_13a("«яблоко» upon") == V{"«яблоко»", "upon"});
    CHECK(bleu::tokenize_13a("   ").empty());
    CHECK(bleu::tokenize_13a("").empty());
    // Mixed case is preserved.
    CHECK(bleu::tokenize_13a("The THE the") == V{"The", "THE", "the"});
}

TEST_CASE("13a matches a regex transcription on assorted and random text") {
    const std::vector<std::string> fixtures = {
        "The quick brown fox, it jumped over 3.5 fences!",
        "Prices rose 12,000.50 dollars (or 15%) in 2020-21.",
        "&quot;No,&quot; she said: never&amp;ever...",
        "digits	tabs and   spaces",
        "«Пример» текста, с цифрами 1,5 и точкой.",
        "a-b 1-2 c.d 3.4 e,f 5,6",
        "trailing period.",
        ", leading comma",
    };
    for (const auto& s : fixtures)
        CHECK(bleu::tokenize_13a(s) == oracle_tokenize(s));

    rng::Engine eng(555ULL);
    const std::string alphabet = "ab1.,-!?()&; \"'";
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const std::size_t len = rng::below(eng, 40);
        for (std::size_t i = 0; i < len; ++i)
            s += alphabet[rng::below(eng, alphabet.size())];
        CAPTURE(s);
        CHECK(bleu::tokenize_13a(s) == oracle_tokenize(s));
    }
}

TEST_CASE("hand-worked corpus: clipped counts, geometric mean, unit brevity penalty") {
    // hyp "the cat sat on the mat" vs ref "the cat sat on a mat":
    // p1 = 5/6 (second "the" clips), p2 = 3/5, p3 = 2/4, p4 = 1/3,
    // BP = 1, BLEU = 100 * (1/12)^(1/4) = 53.728...
    const auto b = bleu::corpus_bleu({"the cat sat on the mat"}, {"the cat sat on a mat"});
    CHECK(b.matched == std::array<std::int64_t, 4>{5, 3, 2, 1});
    CHECK(b.total == std::array<std::int64_t, 4>{6, 5, 4, 3});
    CHECK(b.hyp_len == 6);
    CHECK(b.ref_len == 6);
    CHECK(b.brevity_penalty == 1.0);
    CHECK(b.score == doctest::Approx(53.728496591177095).epsilon(1e-9));
    CHECK(std::abs(b.score - 53.7285) < 0.01);
    CHECK(bleu::format_score(b.score) == "53.73");
}

TEST_CASE("identical corpora score a perfect 100") {
    const std::vector<std::string> text = {
        "The cat sat on the mat.",
        "Prices rose by 3.5 % in 2021.",
        "«Да» — she said.",
    };
    const auto b = bleu::corpus_bleu(text, text);
    CHECK(b.score == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(bleu::format_score(b.score) == "100.00");
    for (int n = 0; n < 4; ++n)
        CHECK(b.matched[n] == b.total[n]);
}

TEST_CASE("brevity penalty follows the short-hypothesis formula") {
    // Perfect 4-token prefix of a 5-token reference: all precisions 100,
    // BLEU = 100 * exp(1 - 5/4) = 77.8800783...
    const auto b = bleu::corpus_bleu({"a b c d"}, {"a b c d e"});
    CHECK(b.brevity_penalty == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
    CHECK(b.score == doctest::Approx(77.88007830714049).epsilon(1e-9));

    // Hypothesis longer than the reference: no penalty.
    const auto c = bleu::corpus_bleu({"a b c d e f"}, {"a b c d"});
    CHECK(c.brevity_penalty == 1.0);
}

TEST_CASE("exponential smoothing floors disjoint corpora below 1") {
    // 3 x 20 tokens with no shared n-gram of any order.
    std::vector<std::string> hyps, refs;
    for (int s = 0; s < 3; ++s) {
        std::string h, r;
        for (int i = 0; i < 20; ++i) {
            h += "h" + std::to_string(s * 20 + i) + " ";
            r += "r" + std::to_string(s * 20 + i) + " ";
        }
        hyps.push_back(h);
        refs.push_back(r);
    }
    const auto b = bleu::corpus_bleu(hyps, refs);
    CHECK(b.score > 0.0);
    CHECK(b.score < 1.0);
    // Each zero order doubles the divisor: 100/(2*60), 100/(4*57), ...
    CHECK(b.precision[0] == doctest::Approx(100.0 / 120.0).epsilon(1e-12));
    CHECK(b.precision[1] == doctest::Approx(100.0 / (4.0 * 57.0)).epsilon(1e-12));
    CHECK(b.precision[2] == doctest::Approx(100.0 / (8.0 * 54.0)).epsilon(1e-12));
    CHECK(b.precision[3] == doctest::Approx(100.0 / (16.0 * 51.0)).epsilon(1e-12));
}

TEST_CASE("a corpus with no 4-grams scores zero without effective-order reduction") {
    const auto b = bleu::corpus_bleu({"a b c"}, {"a b c"});
    CHECK(b.total[3] == 0);
    CHECK(b.score == 0.0);
}

TEST_CASE("appending a perfectly matched pair never lowers the score") {
    std::vector<std::string> hyps = {"the cat sat on the mat today"};
    std::vector<std::string> refs = {"the cat sat on a mat today"};
    double prev = bleu::score(hyps, refs);
    for (int i = 0; i < 4; ++i) {
        hyps.push_back("a perfectly matched sentence number " + std::to_string(i) + " here");
        refs.push_back(hyps.back());
        const double next = bleu::score(hyps, refs);
        CHECK(next >= prev);
        prev = next;
    }
}

TEST_CASE("corpus scores agree with the independent oracle") {
    const std::vector<std::string> hyps = {
        "The cat sat on the mat.",
        "Prices rose by 3.5 % this year, analysts said.",
        "No sign of «перемен» in the numbers.",
    };
    const std::vector<std::string> refs = {
        "The cat was sitting on the mat.",
        "Prices increased by 3.5 % this year, analysts noted.",
        "There is no sign of «перемен» in these numbers.",
    };
    CHECK(bleu::score(hyps, refs) == doctest::Approx(oracle_bleu(hyps, refs)).epsilon(1e-9));

    // Randomized corpora over a small vocabulary: high n-gram overlap by
    // construction, so every order exercises both matched and unmatched
    // paths.
    rng::Engine eng(777ULL);
    const std::vector<std::string> vocab = {"the", "cat", "dog", "sat", "on", "mat", ",", "3.5"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> h, r;
        const std::size_t n_sent = 1 + rng::below(eng, 4);
        for (std::size_t s = 0; s < n_sent; ++s) {
            std::string hs, rs;
            const std::size_t hl = 4 + rng::below(eng, 8);
            const std::size_t rl = 4 + rng::below(eng, 8);
            for (std::size_t i = 0; i < hl; ++i)
                hs += vocab[rng::below(eng, vocab.size())] + " ";
            for (std::size_t i = 0; i < rl; ++i)
                rs += vocab[rng::below(eng, vocab.size())] + " ";
            h.push_back(hs);
            r.push_back(rs);
        }
        CAPTURE(trial);
        CHECK(bleu::score(h, r) == doctest::Approx(oracle_bleu(h, r)).epsilon(1e-9));
    }
}

TEST_CASE("input validation") {
    CHECK_THROWS_AS(bleu::corpus_bleu({"a"}, {"a", "b"}), UsageError);
    CHECK_THROWS_AS(bleu::corpus_bleu({}, {}), DataError);
    // Empty hypothesis strings are data, not errors: score is zero.
    CHECK(bleu::score({"", ""}, {"a b c d", "e f g h"}) == 0.0);
}

} // TEST_SUITE
