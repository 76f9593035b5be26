#include "fluencyforge/classifier.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>

namespace fluencyforge::clf {

namespace {

// Fixed tensor traversal order shared by checkpoints, gradient containers,
// and parameter updates. Must never be reordered once checkpoints exist.
template <typename ModelT, typename F>
void visit_tensors(ModelT& m, F&& f) {
    f(m.embedding);
    f(m.positional);
    for (auto& layer : m.layers) {
        f(layer.wq.W);
        f(layer.wq.b);
        f(layer.wk.W);
        f(layer.wk.b);
        f(layer.wv.W);
        f(layer.wv.b);
        f(layer.wo.W);
        f(layer.wo.b);
        f(layer.ln1.gamma);
        f(layer.ln1.beta);
        f(layer.ff1.W);
        f(layer.ff1.b);
        f(layer.ff2.W);
        f(layer.ff2.b);
        f(layer.ln2.gamma);
        f(layer.ln2.beta);
    }
    f(m.pooler.W);
    f(m.pooler.b);
    f(m.out_proj.W);
    f(m.out_proj.b);
}

template <typename MA, typename MB, typename F>
void visit_tensor_pairs(MA& a, MB& b, F&& f) {
    f(a.embedding, b.embedding);
    f(a.positional, b.positional);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        auto& la = a.layers[i];
        auto& lb = b.layers[i];
        f(la.wq.W, lb.wq.W);
        f(la.wq.b, lb.wq.b);
        f(la.wk.W, lb.wk.W);
        f(la.wk.b, lb.wk.b);
        f(la.wv.W, lb.wv.W);
        f(la.wv.b, lb.wv.b);
        f(la.wo.W, lb.wo.W);
        f(la.wo.b, lb.wo.b);
        f(la.ln1.gamma, lb.ln1.gamma);
        f(la.ln1.beta, lb.ln1.beta);
        f(la.ff1.W, lb.ff1.W);
        f(la.ff1.b, lb.ff1.b);
        f(la.ff2.W, lb.ff2.W);
        f(la.ff2.b, lb.ff2.b);
        f(la.ln2.gamma, lb.ln2.gamma);
        f(la.ln2.beta, lb.ln2.beta);
    }
    f(a.pooler.W, b.pooler.W);
    f(a.pooler.b, b.pooler.b);
    f(a.out_proj.W, b.out_proj.W);
    f(a.out_proj.b, b.out_proj.b);
}

void validate_config(const Config& c, bool from_file, const std::string& where) {
    auto fail = [&](const std::string& msg) {
        if (from_file)
            throw DataError(where + ": " + msg);
        throw UsageError(msg);
    };
    if (c.d_model <= 0 || c.n_heads <= 0 || c.n_layers <= 0 || c.d_ff <= 0 ||
        c.max_len <= 2 || c.vocab_size <= 0) {
        fail("invalid model configuration: all dimensions must be positive "
             "(d_model=" + std::to_string(c.d_model) + ", n_heads=" + std::to_string(c.n_heads) +
             ", n_layers=" + std::to_string(c.n_layers) + ", d_ff=" + std::to_string(c.d_ff) +
             ", max_len=" + std::to_string(c.max_len) +
             ", vocab_size=" + std::to_string(c.vocab_size) + "; max_len must be at least 3)");
    }
    if (c.d_model % c.n_heads != 0) {
        fail("invalid model configuration: d_model (" + std::to_string(c.d_model) +
             ") must be divisible by n_heads (" + std::to_string(c.n_heads) + ")");
    }
    if (c.vocab_size < static_cast<int>(bpe::Tokenizer::kNumSpecials)) {
        fail("invalid model configuration: vocab_size (" + std::to_string(c.vocab_size) +
             ") smaller than the reserved-token block (" +
             std::to_string(bpe::Tokenizer::kNumSpecials) + ")");
    }
}

// Allocates every tensor at its configured shape, zero-filled.
Model make_shell(const Config& config) {
    Model m;
    m.config = config;
    const int d = config.d_model;
    m.embedding = nn::Mat::Zero(config.vocab_size, d);
    m.positional = nn::Mat::Zero(config.max_len, d);
    m.layers.resize(static_cast<std::size_t>(config.n_layers));
    auto shell_linear = [](nn::Linear& lin, int in, int out) {
        lin.W = nn::Mat::Zero(in, out);
        lin.b = nn::Vec::Zero(out);
    };
    auto shell_ln = [d](nn::LayerNorm& ln) {
        ln.gamma = nn::Vec::Ones(d);
        ln.beta = nn::Vec::Zero(d);
    };
    for (auto& layer : m.layers) {
        shell_linear(layer.wq, d, d);
        shell_linear(layer.wk, d, d);
        shell_linear(layer.wv, d, d);
        shell_linear(layer.wo, d, d);
        shell_ln(layer.ln1);
        shell_linear(layer.ff1, d, config.d_ff);
        shell_linear(layer.ff2, config.d_ff, d);
        shell_ln(layer.ln2);
    }
    shell_linear(m.pooler, d, d);
    shell_linear(m.out_proj, d, 2);
    return m;
}

Model zero_like(const Model& m) {
    Model g = make_shell(m.config);
    // make_shell leaves layer-norm gains at one; a gradient container must
    // start at zero everywhere.
    visit_tensors(g, [](auto& t) { t.setZero(); });
    return g;
}

struct LayerCache {
    nn::Mat x_in, q, k, v;
    std::vector<nn::Mat> att; // per-head (n × n) attention probabilities
    nn::Mat att_concat, attn_out, res1, ln1_out, ff_pre, ff_act, ff_out, res2, ln2_out;
    nn::LayerNormCache ln1c, ln2c;
};

struct ForwardCache {
    nn::Mat x0;
    std::vector<LayerCache> layers;
    nn::Vec pooled_pre, pooled;
    Eigen::Vector2d logits;
};

void run_forward(const Model& m, const nn::Mat& x0, ForwardCache& cache) {
    const int d = m.config.d_model;
    const int h = m.config.n_heads;
    const int dh = d / h;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n = x0.rows();

    cache.x0 = x0;
    cache.layers.assign(m.layers.size(), LayerCache{});
    nn::Mat x = x0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const EncoderLayer& layer = m.layers[l];
        LayerCache& lc = cache.layers[l];
        lc.x_in = x;
        lc.q = nn::linear_forward(layer.wq, x);
        lc.k = nn::linear_forward(layer.wk, x);
        lc.v = nn::linear_forward(layer.wv, x);
        lc.att.resize(static_cast<std::size_t>(h));
        lc.att_concat.resize(n, d);
        for (int hh = 0; hh < h; ++hh) {
            auto qh = lc.q.middleCols(hh * dh, dh);
            auto kh = lc.k.middleCols(hh * dh, dh);
            auto vh = lc.v.middleCols(hh * dh, dh);
            nn::Mat scores = (qh * kh.transpose()) * scale;
            lc.att[static_cast<std::size_t>(hh)] = nn::softmax_rows(scores);
            lc.att_concat.middleCols(hh * dh, dh) = lc.att[static_cast<std::size_t>(hh)] * vh;
        }
        lc.attn_out = nn::linear_forward(layer.wo, lc.att_concat);
        lc.res1 = lc.x_in + lc.attn_out;
        lc.ln1_out = nn::layernorm_forward(layer.ln1, lc.res1, lc.ln1c);
        lc.ff_pre = nn::linear_forward(layer.ff1, lc.ln1_out);
        lc.ff_act = nn::gelu(lc.ff_pre);
        lc.ff_out = nn::linear_forward(layer.ff2, lc.ff_act);
        lc.res2 = lc.ln1_out + lc.ff_out;
        lc.ln2_out = nn::layernorm_forward(layer.ln2, lc.res2, lc.ln2c);
        x = lc.ln2_out;
    }
    cache.pooled_pre =
        (x.row(0) * m.pooler.W).transpose() + m.pooler.b;
    cache.pooled = cache.pooled_pre.array().tanh().matrix();
    cache.logits = (cache.pooled.transpose() * m.out_proj.W).transpose() + m.out_proj.b;
}

// Backpropagates d(loss)/d(logits) through the whole network. Returns the
// gradient with respect to the input-embedding matrix; when `grads` is
// non-null also accumulates every transformer/pooler/out-proj parameter
// gradient (embedding/positional scatter is the caller's job, since only it
// knows the effective token ids).
nn::Mat run_backward(const Model& m, const ForwardCache& cache, const Eigen::Vector2d& dlogits,
                     Model* grads) {
    const int d = m.config.d_model;
    const int h = m.config.n_heads;
    const int dh = d / h;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n = cache.x0.rows();

    const nn::Mat& last =
        m.layers.empty() ? cache.x0 : cache.layers.back().ln2_out;

    // Output projection and pooler.
    nn::Vec dpooled = m.out_proj.W * dlogits;
    if (grads != nullptr) {
        grads->out_proj.W += cache.pooled * dlogits.transpose();
        grads->out_proj.b += dlogits;
    }
    nn::Vec dpooled_pre =
        (dpooled.array() * (1.0 - cache.pooled.array().square())).matrix();
    if (grads != nullptr) {
        grads->pooler.W += last.row(0).transpose() * dpooled_pre.transpose();
        grads->pooler.b += dpooled_pre;
    }
    nn::Mat dx = nn::Mat::Zero(n, d);
    dx.row(0) = (m.pooler.W * dpooled_pre).transpose();

    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const EncoderLayer& layer = m.layers[li];
        const LayerCache& lc = cache.layers[li];
        EncoderLayer* lg = grads != nullptr ? &grads->layers[li] : nullptr;

        nn::LayerNormGrad g_ln2{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres2 =
            nn::layernorm_backward(layer.ln2, lc.ln2c, dx, grads != nullptr ? &g_ln2 : nullptr);
        if (lg != nullptr) {
            lg->ln2.gamma += g_ln2.gamma;
            lg->ln2.beta += g_ln2.beta;
        }

        // res2 = ln1_out + ff_out
        nn::LinearGrad g_ff2{nn::Mat::Zero(m.config.d_ff, d), nn::Vec::Zero(d)};
        nn::Mat dff_act =
            nn::linear_backward(layer.ff2, lc.ff_act, dres2, grads != nullptr ? &g_ff2 : nullptr);
        if (lg != nullptr) {
            lg->ff2.W += g_ff2.W;
            lg->ff2.b += g_ff2.b;
        }
        nn::Mat dff_pre = nn::gelu_backward(lc.ff_pre, dff_act);
        nn::LinearGrad g_ff1{nn::Mat::Zero(d, m.config.d_ff), nn::Vec::Zero(m.config.d_ff)};
        nn::Mat dln1_out =
            dres2 +
            nn::linear_backward(layer.ff1, lc.ln1_out, dff_pre, grads != nullptr ? &g_ff1 : nullptr);
        if (lg != nullptr) {
            lg->ff1.W += g_ff1.W;
            lg->ff1.b += g_ff1.b;
        }

        nn::LayerNormGrad g_ln1{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres1 = nn::layernorm_backward(layer.ln1, lc.ln1c, dln1_out,
                                               grads != nullptr ? &g_ln1 : nullptr);
        if (lg != nullptr) {
            lg->ln1.gamma += g_ln1.gamma;
            lg->ln1.beta += g_ln1.beta;
        }

        // res1 = x_in + attn_out
        nn::LinearGrad g_wo{nn::Mat::Zero(d, d), nn::Vec::Zero(d)};
        nn::Mat datt_concat =
            nn::linear_backward(layer.wo, lc.att_concat, dres1, grads != nullptr ? &g_wo : nullptr);
        if (lg != nullptr) {
            lg->wo.W += g_wo.W;
            lg->wo.b += g_wo.b;
        }

        nn::Mat dq = nn::Mat::Zero(n, d);
        nn::Mat dk = nn::Mat::Zero(n, d);
        nn::Mat dv = nn::Mat::Zero(n, d);
        for (int hh = 0; hh < h; ++hh) {
            const nn::Mat& att = lc.att[static_cast<std::size_t>(hh)];
            auto vh = lc.v.middleCols(hh * dh, dh);
            auto qh = lc.q.middleCols(hh * dh, dh);
            auto kh = lc.k.middleCols(hh * dh, dh);
            nn::Mat dout_h = datt_concat.middleCols(hh * dh, dh);
            nn::Mat datt = dout_h * vh.transpose();
            dv.middleCols(hh * dh, dh) = att.transpose() * dout_h;
            nn::Mat dscores = nn::softmax_rows_backward(att, datt);
            dq.middleCols(hh * dh, dh) = (dscores * kh) * scale;
            dk.middleCols(hh * dh, dh) = (dscores.transpose() * qh) * scale;
        }

        nn::LinearGrad g_wq{nn::Mat::Zero(d, d), nn::Vec::Zero(d)};
        nn::LinearGrad g_wk{nn::Mat::Zero(d, d), nn::Vec::Zero(d)};
        nn::LinearGrad g_wv{nn::Mat::Zero(d, d), nn::Vec::Zero(d)};
        nn::Mat dx_in = dres1;
        dx_in += nn::linear_backward(layer.wq, lc.x_in, dq, grads != nullptr ? &g_wq : nullptr);
        dx_in += nn::linear_backward(layer.wk, lc.x_in, dk, grads != nullptr ? &g_wk : nullptr);
        dx_in += nn::linear_backward(layer.wv, lc.x_in, dv, grads != nullptr ? &g_wv : nullptr);
        if (lg != nullptr) {
            lg->wq.W += g_wq.W;
            lg->wq.b += g_wq.b;
            lg->wk.W += g_wk.W;
            lg->wk.b += g_wk.b;
            lg->wv.W += g_wv.W;
            lg->wv.b += g_wv.b;
        }
        dx = dx_in;
    }
    return dx;
}

Output output_from_cache(const ForwardCache& cache) {
    Output out;
    out.logit_mono = cache.logits(0);
    out.logit_bilingual = cache.logits(1);
    out.likelihood_bilingual = likelihood_from_logits(out.logit_mono, out.logit_bilingual);
    return out;
}

// Token ids after content-mask replacement, validated against the model.
std::vector<int> effective_ids(const Model& m, const TokenSequence& seq, bool mask_content) {
    if (seq.empty())
        throw DataError("classifier input is empty: a wrapped sequence has at least [CLS]/[SEP]");
    if (seq.size() > static_cast<std::size_t>(m.config.max_len)) {
        throw DataError("classifier input of " + std::to_string(seq.size()) +
                        " subwords exceeds the model maximum of " +
                        std::to_string(m.config.max_len));
    }
    std::vector<int> ids(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        int id = seq.ids[i];
        if (mask_content && seq.content(i))
            id = bpe::Tokenizer::kMaskClf;
        if (id < 0 || id >= m.config.vocab_size) {
            throw DataError("token id " + std::to_string(id) + " at position " +
                            std::to_string(i) + " is outside the embedding table (vocab size " +
                            std::to_string(m.config.vocab_size) + ")");
        }
        ids[static_cast<std::size_t>(i)] = id;
    }
    return ids;
}

double cross_entropy_and_dlogits(const Eigen::Vector2d& logits, int label,
                                 Eigen::Vector2d& dlogits) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log(std::exp(logits(0) - mx) + std::exp(logits(1) - mx));
    dlogits(0) = std::exp(logits(0) - lse);
    dlogits(1) = std::exp(logits(1) - lse);
    dlogits(label) -= 1.0;
    return lse - logits(label);
}

} // namespace

Model init_model(const Config& config, std::uint64_t seed) {
    validate_config(config, /*from_file=*/false, "");
    Model m = make_shell(config);
    rng::Engine eng(seed);
    auto fill_normal = [&eng](nn::Mat& t, double stddev) {
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                t(r, c) = rng::normal(eng) * stddev;
    };
    auto fill_linear = [&fill_normal](nn::Linear& lin) {
        const double stddev =
            std::sqrt(2.0 / static_cast<double>(lin.W.rows() + lin.W.cols()));
        fill_normal(lin.W, stddev);
        lin.b.setZero();
    };
    fill_normal(m.embedding, 0.02);
    fill_normal(m.positional, 0.02);
    for (auto& layer : m.layers) {
        fill_linear(layer.wq);
        fill_linear(layer.wk);
        fill_linear(layer.wv);
        fill_linear(layer.wo);
        fill_linear(layer.ff1);
        fill_linear(layer.ff2);
    }
    fill_linear(m.pooler);
    fill_linear(m.out_proj);
    return m;
}

nn::Mat input_embeddings(const Model& model, const TokenSequence& seq, bool mask_content) {
    const std::vector<int> ids = effective_ids(model, seq, mask_content);
    nn::Mat x0(static_cast<Eigen::Index>(ids.size()), model.config.d_model);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        x0.row(static_cast<Eigen::Index>(i)) =
            model.embedding.row(ids[i]) + model.positional.row(static_cast<Eigen::Index>(i));
    }
    return x0;
}

Output forward(const Model& model, const TokenSequence& seq, bool mask_content) {
    return forward_from_embeddings(model, input_embeddings(model, seq, mask_content));
}

Output forward_from_embeddings(const Model& model, const nn::Mat& x0) {
    if (x0.rows() == 0 || x0.cols() != model.config.d_model)
        throw DataError("embedding matrix shape does not match the model width");
    ForwardCache cache;
    run_forward(model, x0, cache);
    return output_from_cache(cache);
}

nn::Mat grad_embeddings(const Model& model, const TokenSequence& seq, bool mask_content,
                        Output* out) {
    nn::Mat x0 = input_embeddings(model, seq, mask_content);
    ForwardCache cache;
    run_forward(model, x0, cache);
    if (out != nullptr)
        *out = output_from_cache(cache);
    Eigen::Vector2d dlogits(0.0, 1.0); // differentiate the bilingual logit
    return run_backward(model, cache, dlogits, nullptr);
}

double likelihood_from_logits(double logit_mono, double logit_bilingual) {
    // p(bilingual) = 1 / (1 + exp(logit_mono - logit_bilingual)), computed
    // via the stable branch.
    const double diff = logit_mono - logit_bilingual;
    if (diff >= 0.0) {
        const double e = std::exp(-diff);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(diff));
}

double predict_likelihood(const Model& model, const TokenSequence& seq, bool mask_content) {
    return forward(model, seq, mask_content).likelihood_bilingual;
}

double evaluate_accuracy(const Model& model, const std::vector<Example>& data,
                         bool mask_content) {
    if (data.empty())
        throw DataError("cannot evaluate accuracy on an empty dataset");
    std::size_t correct = 0;
    for (const Example& ex : data) {
        const double p = predict_likelihood(model, ex.seq, mask_content);
        const int predicted = p > 0.5 ? 1 : 0;
        if (predicted == ex.label)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainTrace train(Model& model, const std::vector<Example>& train_set,
                 const std::vector<Example>& dev_set, const TrainOptions& opts) {
    if (train_set.empty())
        throw DataError("training set is empty");
    std::size_t n_mono = 0, n_bi = 0;
    for (const Example& ex : train_set) {
        if (ex.label == 0)
            ++n_mono;
        else if (ex.label == 1)
            ++n_bi;
        else
            throw DataError("training label must be 0 (mono) or 1 (bilingual), got " +
                            std::to_string(ex.label));
    }
    if (n_mono != n_bi) {
        throw DataError("training set must be label-balanced: " + std::to_string(n_mono) +
                        " mono vs " + std::to_string(n_bi) + " bilingual examples");
    }
    if (opts.epochs < 0 || opts.batch_size <= 0 || !(opts.lr > 0.0) || opts.warmup_steps < 0)
        throw UsageError("invalid training options: epochs must be >= 0, batch size and "
                         "learning rate positive, warmup steps >= 0");
    if (opts.epochs > 0 && dev_set.empty())
        throw DataError("development set is empty: per-epoch accuracy needs at least one example");

    TrainTrace trace;
    rng::Engine eng(opts.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        rng::shuffle(order, eng);
        double epoch_loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opts.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
            const std::size_t batch_n = end - start;
            Model grads = zero_like(model);
            double batch_loss_sum = 0.0;
            for (std::size_t bi = start; bi < end; ++bi) {
                const Example& ex = train_set[order[bi]];
                const std::vector<int> ids = effective_ids(model, ex.seq, opts.mask_content);
                nn::Mat x0(static_cast<Eigen::Index>(ids.size()), model.config.d_model);
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    x0.row(static_cast<Eigen::Index>(i)) =
                        model.embedding.row(ids[i]) +
                        model.positional.row(static_cast<Eigen::Index>(i));
                }
                ForwardCache cache;
                run_forward(model, x0, cache);
                Eigen::Vector2d dlogits;
                batch_loss_sum += cross_entropy_and_dlogits(cache.logits, ex.label, dlogits);
                nn::Mat dx0 = run_backward(model, cache, dlogits, &grads);
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    grads.embedding.row(ids[i]) += dx0.row(static_cast<Eigen::Index>(i));
                    grads.positional.row(static_cast<Eigen::Index>(i)) +=
                        dx0.row(static_cast<Eigen::Index>(i));
                }
            }
            if (!std::isfinite(batch_loss_sum)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch starting at example " +
                                   std::to_string(start));
            }
            ++step;
            const double warm =
                opts.warmup_steps > 0
                    ? std::min(1.0, static_cast<double>(step) /
                                        static_cast<double>(opts.warmup_steps))
                    : 1.0;
            const double lr_t = opts.lr * warm / static_cast<double>(batch_n);
            visit_tensor_pairs(model, grads,
                               [lr_t](auto& param, const auto& grad) { param -= lr_t * grad; });
            epoch_loss_sum += batch_loss_sum;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss_sum / static_cast<double>(train_set.size());
        stats.dev_accuracy = evaluate_accuracy(model, dev_set, opts.mask_content);
        trace.epochs.push_back(stats);
    }
    return trace;
}

TokenSequence wrap_sequence(const TokenSequence& body) {
    TokenSequence out;
    out.push_back(bpe::Tokenizer::kCls, "[CLS]", {WordClass::Symbol, PosTag::Symbol});
    for (std::size_t i = 0; i < body.size(); ++i)
        out.push_back(body.ids[i], body.surface[i], body.flags[i]);
    out.push_back(bpe::Tokenizer::kSep, "[SEP]", {WordClass::Symbol, PosTag::Symbol});
    return out;
}

std::vector<Example> prepare_examples(const std::vector<corpus::LabeledPair>& pairs,
                                      const bpe::Tokenizer& tokenizer,
                                      const pos::LexiconTagger& tagger, int max_len,
                                      std::size_t* truncated) {
    if (max_len <= 2)
        throw UsageError("max_len must be at least 3 to fit [CLS], one subword, and [SEP]");
    std::vector<Example> out;
    out.reserve(pairs.size());
    std::size_t n_truncated = 0;
    const std::size_t body_budget = static_cast<std::size_t>(max_len) - 2;
    for (const corpus::LabeledPair& pair : pairs) {
        TokenSequence seq = tokenizer.encode(pair.text);
        tagger.tag_sequence(seq);
        if (seq.size() > body_budget) {
            seq.ids.resize(body_budget);
            seq.surface.resize(body_budget);
            seq.flags.resize(body_budget);
            ++n_truncated;
        }
        Example ex;
        ex.seq = wrap_sequence(seq);
        ex.label = pair.label == corpus::PairLabel::Bilingual ? 1 : 0;
        out.push_back(std::move(ex));
    }
    if (truncated != nullptr)
        *truncated = n_truncated;
    return out;
}

namespace {
constexpr std::string_view kClfMagic = "FFCLF1\n";
} // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    io::BinWriter w;
    w.bytes(kClfMagic);
    w.i64(model.config.d_model);
    w.i64(model.config.n_heads);
    w.i64(model.config.n_layers);
    w.i64(model.config.d_ff);
    w.i64(model.config.max_len);
    w.i64(model.config.vocab_size);
    visit_tensors(model, [&w](const auto& t) {
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                w.f64(t(r, c));
    });
    io::write_file_atomic(path, w.buffer());
}

Model load_checkpoint(const std::string& path) {
    const std::string data = io::read_file(path);
    io::BinReader r(data, path);
    if (r.bytes(kClfMagic.size()) != kClfMagic)
        throw DataError(path + ": not a classifier checkpoint (bad magic)");
    auto read_dim = [&r, &path](const char* what) {
        const std::int64_t v = r.i64();
        if (v < 1 || v > 1'000'000)
            throw DataError(path + ": implausible " + std::string(what) + " (" +
                            std::to_string(v) + ") in checkpoint header");
        return static_cast<int>(v);
    };
    Config config;
    config.d_model = read_dim("d_model");
    config.n_heads = read_dim("n_heads");
    config.n_layers = read_dim("n_layers");
    config.d_ff = read_dim("d_ff");
    config.max_len = read_dim("max_len");
    config.vocab_size = read_dim("vocab_size");
    validate_config(config, /*from_file=*/true, path);
    Model m = make_shell(config);
    visit_tensors(m, [&r, &path](auto& t) {
        for (Eigen::Index row = 0; row < t.rows(); ++row)
            for (Eigen::Index col = 0; col < t.cols(); ++col) {
                const double v = r.f64();
                if (!std::isfinite(v))
                    throw DataError(path + ": non-finite parameter value in checkpoint");
                t(row, col) = v;
            }
    });
    if (!r.at_end())
        throw DataError(path + ": trailing bytes after parameter tensors (" +
                        std::to_string(r.remaining()) + " extra)");
    return m;
}

} // namespace fluencyforge::clf
