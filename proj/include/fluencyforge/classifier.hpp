#pragma once

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/corpus_io.hpp"
#include "fluencyforge/nn.hpp"
#include "fluencyforge/pos_tagger.hpp"
#include "fluencyforge/token_sequence.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fluencyforge::clf {

// Binary corpus-origin classifier: a small post-layer-norm transformer
// encoder over BPE subword ids. Position 0 must hold the [CLS] summary
// token; its final hidden state feeds a tanh pooler and a 2-way output
// projection (class 0 = monolingual, class 1 = bilingual-derived).
//
// The classifier is trained with content masking: every subword flagged
// CONTENT is replaced by the [MASK] id before embedding lookup, so the
// decision must rest on function words, punctuation, and sentence shape
// alone. Symbols and function words pass through unchanged.

struct Config {
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 128;
    int max_len = 64;
    int vocab_size = 0;
};

struct EncoderLayer {
    nn::Linear wq, wk, wv, wo; // attention projections, each (d × d)
    nn::LayerNorm ln1;         // after the attention residual
    nn::Linear ff1, ff2;       // (d × d_ff), (d_ff × d)
    nn::LayerNorm ln2;         // after the feed-forward residual
};

struct Model {
    Config config;
    nn::Mat embedding;  // (vocab_size × d)
    nn::Mat positional; // (max_len × d)
    std::vector<EncoderLayer> layers;
    nn::Linear pooler;   // (d × d), tanh applied on top
    nn::Linear out_proj; // (d × 2)
};

struct Output {
    double logit_mono = 0.0;
    double logit_bilingual = 0.0;
    double likelihood_bilingual = 0.0; // softmax probability of class 1
};

// One training/evaluation example: a wrapped token sequence
// ([CLS] ... [SEP]) and its origin label (0 = mono, 1 = bilingual).
struct Example {
    TokenSequence seq;
    int label = 0;
};

struct TrainOptions {
    int epochs = 10;
    int batch_size = 16;
    double lr = 1e-3;
    int warmup_steps = 50;   // linear ramp from 0 to lr, then constant
    bool mask_content = true;
    std::uint64_t seed = 1;  // epoch shuffling
};

struct EpochStats {
    int epoch = 0;          // 1-based
    double train_loss = 0.0; // mean cross-entropy over the epoch
    double dev_accuracy = 0.0;
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
};

// Validates shape constraints (d_model divisible by n_heads, all dims
// positive) and initializes parameters deterministically from `seed`:
// embeddings/positional ~ N(0, 0.02), linear weights Xavier-normal,
// biases zero, layer-norm gain one / bias zero. Throws UsageError on an
// invalid configuration.
Model init_model(const Config& config, std::uint64_t seed);

// Per-example forward pass. `seq` must already be wrapped: position 0 is
// consumed as the summary token. When `mask_content` is set, ids of
// CONTENT-flagged positions are replaced with the [MASK] id before
// embedding lookup — the effective ids after that replacement are what the
// model sees. Throws DataError if the sequence is empty, longer than
// max_len, or contains an id outside the embedding table.
Output forward(const Model& model, const TokenSequence& seq, bool mask_content);

// Forward pass from an explicit input-embedding matrix (rows = positions,
// already including positional encodings). This is the seam the
// finite-difference oracle perturbs; `grad_embeddings` differentiates
// with respect to exactly this matrix.
Output forward_from_embeddings(const Model& model, const nn::Mat& x0);

// The (n × d) input-embedding matrix forward() builds internally:
// embedding[effective id] + positional[position]. Exposed so callers can
// perturb or differentiate the true model input.
nn::Mat input_embeddings(const Model& model, const TokenSequence& seq, bool mask_content);

// Gradient of the bilingual-class logit with respect to each row of the
// post-replacement input embedding matrix. Row i is d(logit_1)/d(x0[i]).
// When `out` is non-null it receives the forward outputs of the same pass.
nn::Mat grad_embeddings(const Model& model, const TokenSequence& seq, bool mask_content,
                        Output* out = nullptr);

// Softmax probability of the bilingual class given the two logits.
double likelihood_from_logits(double logit_mono, double logit_bilingual);

// Convenience single-call probability (forward + softmax).
double predict_likelihood(const Model& model, const TokenSequence& seq, bool mask_content);

// Fraction of examples whose argmax class matches the label; a tied
// likelihood of exactly 0.5 counts as the monolingual class.
double evaluate_accuracy(const Model& model, const std::vector<Example>& data,
                         bool mask_content);

// Minibatch gradient-descent training with linear learning-rate warmup.
// Shuffles examples each epoch with a deterministic engine, accumulates
// gradients sequentially over each minibatch, and applies one update per
// batch (lr scaled by 1/batch size). Records mean train loss and dev
// accuracy per epoch. Throws DataError if `train` is empty or the two
// labels are not equally frequent, and NumericError if a batch loss turns
// non-finite.
TrainTrace train(Model& model, const std::vector<Example>& train_set,
                 const std::vector<Example>& dev_set, const TrainOptions& opts);

// Wraps a tokenized sentence as a classifier input: prepends [CLS] and
// appends [SEP], both flagged SYMBOL.
TokenSequence wrap_sequence(const TokenSequence& body);

// Tokenizes, POS-tags, and wraps labeled sentences as classifier examples.
// A sentence whose wrapped form would exceed max_len is truncated to fit
// (body cut to max_len - 2 subwords); *truncated counts such sentences
// when non-null.
std::vector<Example> prepare_examples(const std::vector<corpus::LabeledPair>& pairs,
                                      const bpe::Tokenizer& tokenizer,
                                      const pos::LexiconTagger& tagger, int max_len,
                                      std::size_t* truncated = nullptr);

// Binary checkpoint (magic "FFCLF1\n", config as int64 LE, then every
// parameter tensor row-major as float64 LE in declaration order).
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace fluencyforge::clf
