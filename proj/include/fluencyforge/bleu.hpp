#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fluencyforge::bleu {

// Corpus-level BLEU-4 with a fixed scoring signature: one reference per
// hypothesis, mixed case, no effective-order reduction, 13a tokenization,
// exponential smoothing of zero match counts, and the standard brevity
// penalty exp(1 - ref_len/hyp_len) when the hypothesis side is shorter.
inline constexpr const char* kSignature = "nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp";

inline constexpr int kMaxOrder = 4;

// The mteval-13a tokenizer: unescapes the SGML entities &quot; &amp; &lt;
// &gt;, drops "<skipped>" and end-of-line hyphenation, pads ASCII
// punctuation with spaces (periods, commas, and dashes only outside of
// numeric context), and splits on whitespace. Non-ASCII bytes pass through
// untouched.
std::vector<std::string> tokenize_13a(const std::string& line);

struct Breakdown {
    std::array<std::int64_t, kMaxOrder> matched{}; // clipped n-gram matches
    std::array<std::int64_t, kMaxOrder> total{};   // hypothesis n-gram counts
    std::array<double, kMaxOrder> precision{};     // smoothed precisions (percent)
    std::int64_t hyp_len = 0;
    std::int64_t ref_len = 0;
    double brevity_penalty = 0.0;
    double score = 0.0; // [0, 100]
};

// Scores the whole corpus. Throws UsageError when the two lists differ in
// length and DataError when they are empty.
Breakdown corpus_bleu(const std::vector<std::string>& hypotheses,
                      const std::vector<std::string>& references);

double score(const std::vector<std::string>& hypotheses,
             const std::vector<std::string>& references);

// Two-decimal rendering used by the command-line scorer ("53.73").
std::string format_score(double score);

} // namespace fluencyforge::bleu
