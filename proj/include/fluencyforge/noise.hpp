#pragma once

#include "fluencyforge/classifier.hpp"
#include "fluencyforge/token_sequence.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fluencyforge::noise {

// Per-sentence saliency analysis: which function-word subwords does the
// origin classifier actually lean on? For each position the report holds
// the L2 norm of the bilingual logit's gradient with respect to that
// position's input embedding; candidates (FUNCTION-flagged positions)
// whose norm reaches the candidate mean form the fluency-noise set.
struct SaliencyReport {
    std::vector<std::string> tokens;
    std::vector<TokenAnnotation> flags;
    std::vector<double> grad_norm;
    std::vector<bool> candidate;      // FUNCTION positions
    double threshold = 0.0;           // mean norm over candidates; 0 when none
    std::vector<bool> noise;          // candidate ∧ norm ≥ threshold
    double likelihood_bilingual = 0.0;

    std::size_t size() const { return tokens.size(); }
    std::vector<std::size_t> noise_indices() const;
};

// True exactly at FUNCTION-flagged positions; CONTENT and SYMBOL positions
// (including [CLS]/[SEP]) are never candidates.
std::vector<bool> candidate_set(const TokenSequence& x);

// Pure mean-threshold selection: computes the arithmetic-mean threshold
// over candidate positions and marks candidates with norm >= threshold.
// Returns the threshold (0 when there are no candidates). To keep the
// inclusive comparison honest under floating-point summation the returned
// threshold never exceeds the best candidate norm, so a non-empty
// candidate set always yields a non-empty selection.
double select_noise(const std::vector<double>& norms, const std::vector<bool>& candidate,
                    std::vector<bool>& noise_out);

// Runs the classifier in its content-masked inference regime over `x`
// (a wrapped, tagged sequence) and assembles the full report.
SaliencyReport extract_noise(const clf::Model& model, const TokenSequence& x);

// JSON-lines serialization: one object per sentence with fields
// {tokens, flags, grad_norms, threshold, noise_indices, likelihood};
// grad_norms are written with 6 significant digits. Flags serialize as
// "CLASS/POS" strings (e.g. "FUNCTION/DET").
std::string to_jsonl_line(const SaliencyReport& report);
std::string to_jsonl(const std::vector<SaliencyReport>& reports);
SaliencyReport parse_jsonl_line(std::string_view line, const std::string& source_name,
                                std::size_t lineno);
std::vector<SaliencyReport> parse_jsonl(std::string_view text, const std::string& source_name);
void write_jsonl(const std::string& path, const std::vector<SaliencyReport>& reports);
std::vector<SaliencyReport> read_jsonl(const std::string& path);

} // namespace fluencyforge::noise
