#include "fluencyforge/bleu.hpp"

#include "fluencyforge/errors.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <string>

namespace fluencyforge::bleu {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// The 13a punctuation class: {-~ [-` space-& (-+ :-@ and / — every ASCII
// punctuation character except . , - ' and the digits/letters.
bool is_13a_punct(unsigned char c) {
    return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') ||
           (c >= '(' && c <= '+') || (c >= ':' && c <= '@') || c == '/';
}

bool is_ascii_digit(unsigned char c) {
    return c >= '0' && c <= '9';
}

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

std::vector<std::string> tokenize_13a(const std::string& line) {
    std::string s = line;
    replace_all(s, "<skipped>", "");
    replace_all(s, "-\n", "");
    replace_all(s, "\n", " ");
    replace_all(s, "&quot;", "\"");
    replace_all(s, "&amp;", "&");
    replace_all(s, "&lt;", "<");
    replace_all(s, "&gt;", ">");

    // Pad general punctuation with spaces.
    std::string t;
    t.reserve(s.size() * 2);
    for (unsigned char c : s) {
        if (is_13a_punct(c)) {
            t += ' ';
            t += static_cast<char>(c);
            t += ' ';
        } else {
            t += static_cast<char>(c);
        }
    }

    // Period/comma split off unless adjacent to a digit; the scans mirror a
    // left-to-right, non-overlapping regex replace.
    std::string u;
    u.reserve(t.size() * 2);
    for (std::size_t i = 0; i < t.size();) {
        const unsigned char a = static_cast<unsigned char>(t[i]);
        if (i + 1 < t.size()) {
            const unsigned char b = static_cast<unsigned char>(t[i + 1]);
            if (!is_ascii_digit(a) && (b == '.' || b == ',')) {
                u += static_cast<char>(a);
                u += ' ';
                u += static_cast<char>(b);
                u += ' ';
                i += 2;
                continue;
            }
        }
        u += static_cast<char>(a);
        ++i;
    }

    std::string v;
    v.reserve(u.size() * 2);
    for (std::size_t i = 0; i < u.size();) {
        const unsigned char a = static_cast<unsigned char>(u[i]);
        if ((a == '.' || a == ',') && i + 1 < u.size() &&
            !is_ascii_digit(static_cast<unsigned char>(u[i + 1]))) {
            v += ' ';
            v += static_cast<char>(a);
            v += ' ';
            v += u[i + 1];
            i += 2;
            continue;
        }
        v += static_cast<char>(a);
        ++i;
    }

    std::string w;
    w.reserve(v.size() * 2);
    for (std::size_t i = 0; i < v.size();) {
        const unsigned char a = static_cast<unsigned char>(v[i]);
        if (is_ascii_digit(a) && i + 1 < v.size() && v[i + 1] == '-') {
            w += static_cast<char>(a);
            w += ' ';
            w += '-';
            w += ' ';
            i += 2;
            continue;
        }
        w += static_cast<char>(a);
        ++i;
    }

    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : w) {
        if (is_space(c)) {
            if (!current.empty()) {
                tokens.push_back(current);
                current.clear();
            }
        } else {
            current += static_cast<char>(c);
        }
    }
    if (!current.empty())
        tokens.push_back(current);
    return tokens;
}

namespace {

// n-grams keyed by their tokens joined with a separator no token contains.
std::map<std::string, std::int64_t> ngram_counts(const std::vector<std::string>& tokens,
                                                 std::size_t n) {
    std::map<std::string, std::int64_t> counts;
    if (tokens.size() < n)
        return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace

Breakdown corpus_bleu(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size())
        throw UsageError("BLEU needs one reference per hypothesis: got " +
                         std::to_string(hypotheses.size()) + " hypotheses and " +
                         std::to_string(references.size()) + " references");
    if (hypotheses.empty())
        throw DataError("BLEU over an empty corpus is undefined");

    Breakdown b;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const std::vector<std::string> hyp = tokenize_13a(hypotheses[s]);
        const std::vector<std::string> ref = tokenize_13a(references[s]);
        b.hyp_len += static_cast<std::int64_t>(hyp.size());
        b.ref_len += static_cast<std::int64_t>(ref.size());
        for (int n = 1; n <= kMaxOrder; ++n) {
            const auto hyp_counts = ngram_counts(hyp, static_cast<std::size_t>(n));
            const auto ref_counts = ngram_counts(ref, static_cast<std::size_t>(n));
            for (const auto& [gram, count] : hyp_counts) {
                b.total[n - 1] += count;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end())
                    b.matched[n - 1] += std::min(count, it->second);
            }
        }
    }

    // Exponential smoothing: each zero-match order halves the substituted
    // precision once more. An order with no hypothesis n-grams at all ends
    // the ladder and pins the score to zero.
    double smooth = 1.0;
    for (int n = 0; n < kMaxOrder; ++n) {
        if (b.total[n] == 0)
            break;
        if (b.matched[n] == 0) {
            smooth *= 2.0;
            b.precision[n] = 100.0 / (smooth * static_cast<double>(b.total[n]));
        } else {
            b.precision[n] =
                100.0 * static_cast<double>(b.matched[n]) / static_cast<double>(b.total[n]);
        }
    }

    if (b.hyp_len > 0) {
        b.brevity_penalty =
            b.hyp_len < b.ref_len
                ? std::exp(1.0 - static_cast<double>(b.ref_len) / static_cast<double>(b.hyp_len))
                : 1.0;
    }

    bool all_positive = b.hyp_len > 0;
    double log_sum = 0.0;
    for (int n = 0; n < kMaxOrder; ++n) {
        if (b.precision[n] <= 0.0) {
            all_positive = false;
            break;
        }
        log_sum += std::log(b.precision[n] / 100.0);
    }
    b.score = all_positive
                  ? 100.0 * b.brevity_penalty * std::exp(log_sum / static_cast<double>(kMaxOrder))
                  : 0.0;
    return b;
}

double score(const std::vector<std::string>& hypotheses,
             const std::vector<std::string>& references) {
    return corpus_bleu(hypotheses, references).score;
}

std::string format_score(double score) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", score);
    return buf;
}

} // namespace fluencyforge::bleu
