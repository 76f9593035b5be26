#pragma once

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/corpus_io.hpp"
#include "fluencyforge/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fluencyforge::mt {

// Desk-scale encoder-decoder translation model over shared BPE subword
// ids, trained with teacher forcing on possibly mask-bearing targets.
//
// The masking contract: a target position flagged as masked is (1) never a
// loss target, (2) fed to the next decoding step as the <mask> embedding
// regardless of the id stored in `tgt`, and (3) hidden from decoder
// self-attention as a key, so no step's output — its own included — can
// read that position's state. Consequently perturbing the stored gold id
// at a masked position changes neither the loss nor any logit, bit for
// bit, and perturbing the <mask> embedding itself reaches only the steps
// it directly feeds.

struct Config {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ff = 128;
    int max_len = 64;        // positions available on either side
    int vocab_size = 0;
    bool tie_output = false; // reuse the embedding matrix for output logits
};

struct EncoderLayer {
    nn::Linear wq, wk, wv, wo; // self-attention projections, each (d × d)
    nn::LayerNorm ln_att;
    nn::Linear ff1, ff2;       // (d × d_ff), (d_ff × d)
    nn::LayerNorm ln_ff;
};

struct DecoderLayer {
    nn::Linear self_wq, self_wk, self_wv, self_wo; // causal self-attention
    nn::LayerNorm ln_self;
    nn::Linear cross_wq, cross_wk, cross_wv, cross_wo; // attends encoder output
    nn::LayerNorm ln_cross;
    nn::Linear ff1, ff2;
    nn::LayerNorm ln_ff;
};

struct Model {
    Config config;
    nn::Mat embedding;       // (vocab_size × d), shared by both sides
    nn::Mat enc_positional;  // (max_len × d)
    nn::Mat dec_positional;  // (max_len × d)
    std::vector<EncoderLayer> encoder;
    std::vector<DecoderLayer> decoder;
    nn::Linear out_proj;     // (d × vocab); with tie_output only its bias is read
};

// One training pair. `masked[t]` marks target position t as excluded:
// prepare_corpus/make_example set it where the target id is the <mask>
// token, and from then on the flag — not the id — drives the exclusion,
// so tests can perturb `tgt` while holding the flags fixed.
struct MtExample {
    std::vector<int> src;
    std::vector<int> tgt;
    std::vector<unsigned char> masked; // size == tgt.size()
};

// Flags every <mask> target id; sides must be non-empty.
MtExample make_example(std::vector<int> src, std::vector<int> tgt);

// Validates dimensions (all positive, d_model divisible by n_heads,
// vocab covering the reserved block) and fills parameters
// deterministically from `seed`: embeddings/positional N(0, 0.02), linear
// weights Xavier-normal, biases zero, layer-norm gain one / bias zero.
// Throws UsageError on an invalid configuration.
Model init_model(const Config& config, std::uint64_t seed);

// Encodes both sides with the shared tokenizer and flags <mask> target
// subwords. A source longer than max_len subwords is cut to max_len; a
// target longer than max_len - 1 is cut to max_len - 1 (the decoder input
// is shifted right by the start symbol). *truncated counts pairs cut on
// either side.
std::vector<MtExample> prepare_corpus(const std::vector<corpus::ParallelPair>& pairs,
                                      const bpe::Tokenizer& tokenizer, const Config& config,
                                      std::size_t* truncated = nullptr);

// Same contract, but the target side is already tokenized (BPE surfaces
// with inline <mask>, as the masker writes them); ids are reconstructed
// exactly instead of re-segmenting the text.
std::vector<MtExample> prepare_tokenized_corpus(const std::vector<corpus::ParallelPair>& pairs,
                                                const bpe::Tokenizer& tokenizer,
                                                const Config& config,
                                                std::size_t* truncated = nullptr);

struct LossStats {
    double loss_sum = 0.0;   // summed cross-entropy over scored steps
    std::int64_t tokens = 0; // scored steps: unmasked targets plus the end symbol
};

// A model-shaped container with every tensor zeroed (layer-norm gains
// included), for accumulating gradients across sequence_loss calls.
Model zero_gradients(const Config& config);

// Teacher-forced loss of one example; accumulates parameter gradients
// into *grads (a zero-initialized or running-total Model) when non-null.
// Throws DataError on empty sides, flag/target length mismatch, ids
// outside the vocabulary, or sequences beyond max_len.
LossStats sequence_loss(const Model& model, const MtExample& ex, Model* grads);

// Per-step decoder logits under teacher forcing: row t scores the
// prediction of target position t (row tgt.size() scores the end symbol),
// columns are vocabulary ids. Exposed so tests can probe the exclusion
// and causality contracts row by row.
nn::Mat decoder_logits(const Model& model, const MtExample& ex);

struct TrainOptions {
    int epochs = 10;
    int batch_size = 16;
    double lr = 1e-3;
    int warmup_steps = 50;  // linear ramp from 0 to lr, then constant
    std::uint64_t seed = 1; // epoch shuffling
};

struct EpochStats {
    int epoch = 0;           // 1-based
    double train_loss = 0.0; // mean cross-entropy per scored token
    double dev_loss = 0.0;
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
};

// Minibatch gradient descent with linear warmup, mirroring the classifier
// trainer: deterministic per-epoch shuffle, gradients accumulated
// sequentially over each minibatch, one update per batch with the
// learning rate scaled by the batch's scored-token count. Throws
// DataError if `train_set` is empty or `dev_set` is empty with epochs > 0,
// and NumericError if a batch loss turns non-finite.
TrainTrace train(Model& model, const std::vector<MtExample>& train_set,
                 const std::vector<MtExample>& dev_set, const TrainOptions& opts);

// Mean cross-entropy per scored token, no gradients.
double evaluate_loss(const Model& model, const std::vector<MtExample>& examples);

// Fraction of scored steps whose argmax logit equals the gold token.
double token_accuracy(const Model& model, const std::vector<MtExample>& examples);

struct TranslateResult {
    std::vector<int> ids;   // emitted ids; never contains a reserved symbol
    std::string text;       // detokenized hypothesis
    bool truncated = false; // hit the length cap before the end symbol
};

// Beam-search decode; beam 1 is exactly greedy argmax (ties break to the
// lowest token id). Reserved symbols are suppressed at every step; the
// end symbol may be chosen but stops the beam instead of being emitted.
// Beams are ranked by summed log-probability. A source longer than
// max_len is truncated (reported via `truncated`).
TranslateResult translate(const Model& model, const bpe::Tokenizer& tokenizer,
                          const std::string& source, int beam = 1);

// Binary checkpoint (magic "FFMT1\n", config as int64 LE — dimensions
// then the tie flag as 0/1 — then every tensor row-major float64 LE in
// declaration order).
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace fluencyforge::mt
