#pragma once

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/classifier.hpp"
#include "fluencyforge/corpus_io.hpp"
#include "fluencyforge/noise.hpp"
#include "fluencyforge/pos_tagger.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fluencyforge::mask {

// γ-gated fluency masking: a parallel corpus's target side is tokenized,
// scored by the origin classifier, and — for sentences the classifier is
// confident (likelihood > γ) are bilingual-derived — the salient function
// subwords (the sentence's noise set) are replaced with <mask>. Sources
// are never touched.

struct MaskPolicy {
    double gamma = 0.9;      // confidence gate in [0, 1]; strict >
    bool exclude_num = false; // keep numeral subwords even when salient
};

struct MaskedCorpus {
    MaskPolicy policy;
    // Targets in tokenized (BPE) form with <mask> inline; sources verbatim.
    std::vector<corpus::ParallelPair> pairs;
    // Detokenized rendering of each masked target, for inspection.
    std::vector<std::string> previews;
    // Per-sentence saliency reports (placeholder with zero norms for
    // sentences the classifier could not score).
    std::vector<noise::SaliencyReport> reports;
    std::vector<std::size_t> replaced_per_sentence;
    // Indices of sentences longer than the classifier window; they pass
    // through unmasked.
    std::vector<std::size_t> skipped;

    std::size_t n_sentences = 0;
    std::size_t n_target_tokens = 0; // symbols excluded
    std::size_t n_replaced = 0;
    std::size_t n_masked_sentences = 0;
    double sentence_mask_ratio = 0.0; // masked sentences / all sentences
    double token_mask_ratio = 0.0;    // replaced tokens / non-symbol target tokens
};

struct MaskRatioReport {
    double gamma = 0.0;
    double sentence_ratio = 0.0;
    double token_ratio = 0.0;
    std::size_t n_sentences = 0;
    std::size_t n_tokens = 0;
    std::size_t n_replaced = 0;
    std::size_t n_masked_sentences = 0;
    std::size_t n_skipped = 0;
    // replaced-token count per sentence → number of sentences with it
    std::map<std::size_t, std::size_t> histogram;
};

// Validates the policy (γ within [0,1]; throws UsageError otherwise) and
// masks the corpus target side as described above. Deterministic; input
// order preserved.
MaskedCorpus mask_corpus(const clf::Model& model, const std::vector<corpus::ParallelPair>& pairs,
                         const bpe::Tokenizer& tokenizer, const pos::LexiconTagger& tagger,
                         const MaskPolicy& policy);

MaskRatioReport mask_ratio_report(const MaskedCorpus& mc);

// "20.0% / 3.0%" style rendering of the two ratios.
std::string format_ratios(const MaskRatioReport& r);

// JSON object {gamma, sentence_ratio, token_ratio, n_sentences, n_tokens}
// with ratios as fractions of 1.
std::string ratio_report_json(const MaskedCorpus& mc);

// One tokenized masked target per line, aligned with the input corpus.
void write_masked_targets(const std::string& path, const MaskedCorpus& mc);
// One detokenized preview per line, aligned with the input corpus.
void write_previews(const std::string& path, const MaskedCorpus& mc);
void write_ratio_json(const std::string& path, const MaskedCorpus& mc);

} // namespace fluencyforge::mask
