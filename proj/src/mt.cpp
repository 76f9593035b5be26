#include "fluencyforge/mt.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string_view>
#include <tuple>
#include <utility>

namespace fluencyforge::mt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fixed tensor traversal order shared by checkpoints, gradient containers,
// and parameter updates. Must never be reordered once checkpoints exist.
template <typename ModelT, typename F>
void visit_tensors(ModelT& m, F&& f) {
    f(m.embedding);
    f(m.enc_positional);
    f(m.dec_positional);
    for (auto& layer : m.encoder) {
        f(layer.wq.W);
        f(layer.wq.b);
        f(layer.wk.W);
        f(layer.wk.b);
        f(layer.wv.W);
        f(layer.wv.b);
        f(layer.wo.W);
        f(layer.wo.b);
        f(layer.ln_att.gamma);
        f(layer.ln_att.beta);
        f(layer.ff1.W);
        f(layer.ff1.b);
        f(layer.ff2.W);
        f(layer.ff2.b);
        f(layer.ln_ff.gamma);
        f(layer.ln_ff.beta);
    }
    for (auto& layer : m.decoder) {
        f(layer.self_wq.W);
        f(layer.self_wq.b);
        f(layer.self_wk.W);
        f(layer.self_wk.b);
        f(layer.self_wv.W);
        f(layer.self_wv.b);
        f(layer.self_wo.W);
        f(layer.self_wo.b);
        f(layer.ln_self.gamma);
        f(layer.ln_self.beta);
        f(layer.cross_wq.W);
        f(layer.cross_wq.b);
        f(layer.cross_wk.W);
        f(layer.cross_wk.b);
        f(layer.cross_wv.W);
        f(layer.cross_wv.b);
        f(layer.cross_wo.W);
        f(layer.cross_wo.b);
        f(layer.ln_cross.gamma);
        f(layer.ln_cross.beta);
        f(layer.ff1.W);
        f(layer.ff1.b);
        f(layer.ff2.W);
        f(layer.ff2.b);
        f(layer.ln_ff.gamma);
        f(layer.ln_ff.beta);
    }
    f(m.out_proj.W);
    f(m.out_proj.b);
}

template <typename MA, typename MB, typename F>
void visit_tensor_pairs(MA& a, MB& b, F&& f) {
    auto pair_layer_linears = [&f](auto& la, auto& lb, auto member) {
        f((la.*member).W, (lb.*member).W);
        f((la.*member).b, (lb.*member).b);
    };
    auto pair_layer_norms = [&f](auto& la, auto& lb, auto member) {
        f((la.*member).gamma, (lb.*member).gamma);
        f((la.*member).beta, (lb.*member).beta);
    };
    f(a.embedding, b.embedding);
    f(a.enc_positional, b.enc_positional);
    f(a.dec_positional, b.dec_positional);
    for (std::size_t i = 0; i < a.encoder.size(); ++i) {
        auto& la = a.encoder[i];
        auto& lb = b.encoder[i];
        pair_layer_linears(la, lb, &EncoderLayer::wq);
        pair_layer_linears(la, lb, &EncoderLayer::wk);
        pair_layer_linears(la, lb, &EncoderLayer::wv);
        pair_layer_linears(la, lb, &EncoderLayer::wo);
        pair_layer_norms(la, lb, &EncoderLayer::ln_att);
        pair_layer_linears(la, lb, &EncoderLayer::ff1);
        pair_layer_linears(la, lb, &EncoderLayer::ff2);
        pair_layer_norms(la, lb, &EncoderLayer::ln_ff);
    }
    for (std::size_t i = 0; i < a.decoder.size(); ++i) {
        auto& la = a.decoder[i];
        auto& lb = b.decoder[i];
        pair_layer_linears(la, lb, &DecoderLayer::self_wq);
        pair_layer_linears(la, lb, &DecoderLayer::self_wk);
        pair_layer_linears(la, lb, &DecoderLayer::self_wv);
        pair_layer_linears(la, lb, &DecoderLayer::self_wo);
        pair_layer_norms(la, lb, &DecoderLayer::ln_self);
        pair_layer_linears(la, lb, &DecoderLayer::cross_wq);
        pair_layer_linears(la, lb, &DecoderLayer::cross_wk);
        pair_layer_linears(la, lb, &DecoderLayer::cross_wv);
        pair_layer_linears(la, lb, &DecoderLayer::cross_wo);
        pair_layer_norms(la, lb, &DecoderLayer::ln_cross);
        pair_layer_linears(la, lb, &DecoderLayer::ff1);
        pair_layer_linears(la, lb, &DecoderLayer::ff2);
        pair_layer_norms(la, lb, &DecoderLayer::ln_ff);
    }
    f(a.out_proj.W, b.out_proj.W);
    f(a.out_proj.b, b.out_proj.b);
}

void validate_config(const Config& c, bool from_file, const std::string& where) {
    auto fail = [&](const std::string& msg) {
        if (from_file)
            throw DataError(where + ": " + msg);
        throw UsageError(msg);
    };
    if (c.d_model <= 0 || c.n_heads <= 0 || c.n_enc_layers <= 0 || c.n_dec_layers <= 0 ||
        c.d_ff <= 0 || c.max_len <= 1 || c.vocab_size <= 0) {
        fail("invalid model configuration: all dimensions must be positive (d_model=" +
             std::to_string(c.d_model) + ", n_heads=" + std::to_string(c.n_heads) +
             ", n_enc_layers=" + std::to_string(c.n_enc_layers) +
             ", n_dec_layers=" + std::to_string(c.n_dec_layers) +
             ", d_ff=" + std::to_string(c.d_ff) + ", max_len=" + std::to_string(c.max_len) +
             ", vocab_size=" + std::to_string(c.vocab_size) + "; max_len must be at least 2)");
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

// Allocates every tensor at its configured shape, zero-filled (layer-norm
// gains at one).
Model make_shell(const Config& config) {
    Model m;
    m.config = config;
    const int d = config.d_model;
    m.embedding = nn::Mat::Zero(config.vocab_size, d);
    m.enc_positional = nn::Mat::Zero(config.max_len, d);
    m.dec_positional = nn::Mat::Zero(config.max_len, d);
    auto shell_linear = [](nn::Linear& lin, int in, int out) {
        lin.W = nn::Mat::Zero(in, out);
        lin.b = nn::Vec::Zero(out);
    };
    auto shell_ln = [d](nn::LayerNorm& ln) {
        ln.gamma = nn::Vec::Ones(d);
        ln.beta = nn::Vec::Zero(d);
    };
    m.encoder.resize(static_cast<std::size_t>(config.n_enc_layers));
    for (auto& layer : m.encoder) {
        shell_linear(layer.wq, d, d);
        shell_linear(layer.wk, d, d);
        shell_linear(layer.wv, d, d);
        shell_linear(layer.wo, d, d);
        shell_ln(layer.ln_att);
        shell_linear(layer.ff1, d, config.d_ff);
        shell_linear(layer.ff2, config.d_ff, d);
        shell_ln(layer.ln_ff);
    }
    m.decoder.resize(static_cast<std::size_t>(config.n_dec_layers));
    for (auto& layer : m.decoder) {
        shell_linear(layer.self_wq, d, d);
        shell_linear(layer.self_wk, d, d);
        shell_linear(layer.self_wv, d, d);
        shell_linear(layer.self_wo, d, d);
        shell_ln(layer.ln_self);
        shell_linear(layer.cross_wq, d, d);
        shell_linear(layer.cross_wk, d, d);
        shell_linear(layer.cross_wv, d, d);
        shell_linear(layer.cross_wo, d, d);
        shell_ln(layer.ln_cross);
        shell_linear(layer.ff1, d, config.d_ff);
        shell_linear(layer.ff2, config.d_ff, d);
        shell_ln(layer.ln_ff);
    }
    shell_linear(m.out_proj, d, config.vocab_size);
    return m;
}

Model zero_like(const Model& m) {
    Model g = make_shell(m.config);
    visit_tensors(g, [](auto& t) { t.setZero(); });
    return g;
}

// ---- attention (shared by encoder self, decoder self, decoder cross) ----

struct AttCache {
    nn::Mat q, k, v;          // (Tq × d), (Tk × d), (Tk × d)
    std::vector<nn::Mat> att; // per-head (Tq × Tk) probabilities
    nn::Mat att_concat;       // (Tq × d)
};

// `mask`, when non-null, is an additive (Tq × Tk) matrix of 0 / -inf; a
// -inf entry zeroes that key's probability exactly, so excluded positions
// contribute an exact 0.0 through att * v and the bit-identity contracts
// hold. Every mask row must keep at least one finite entry.
nn::Mat attention_forward(const nn::Linear& wq, const nn::Linear& wk, const nn::Linear& wv,
                          const nn::Linear& wo, const nn::Mat& x_q, const nn::Mat& x_kv,
                          const nn::Mat* mask, int n_heads, AttCache& cache) {
    const int d = static_cast<int>(x_q.cols());
    const int dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    cache.q = nn::linear_forward(wq, x_q);
    cache.k = nn::linear_forward(wk, x_kv);
    cache.v = nn::linear_forward(wv, x_kv);
    cache.att.resize(static_cast<std::size_t>(n_heads));
    cache.att_concat.resize(x_q.rows(), d);
    for (int hh = 0; hh < n_heads; ++hh) {
        auto qh = cache.q.middleCols(hh * dh, dh);
        auto kh = cache.k.middleCols(hh * dh, dh);
        auto vh = cache.v.middleCols(hh * dh, dh);
        nn::Mat scores = (qh * kh.transpose()) * scale;
        if (mask != nullptr)
            scores += *mask;
        cache.att[static_cast<std::size_t>(hh)] = nn::softmax_rows(scores);
        cache.att_concat.middleCols(hh * dh, dh) = cache.att[static_cast<std::size_t>(hh)] * vh;
    }
    return nn::linear_forward(wo, cache.att_concat);
}

// Accumulates dx_q / dx_kv (callers pass the same matrix twice for
// self-attention) and, when the grad pointers are non-null, the four
// projection gradients. The softmax backward needs no special casing for
// masked entries: their probabilities are exactly zero, which zeroes the
// corresponding score gradients.
void attention_backward(const nn::Linear& wq, const nn::Linear& wk, const nn::Linear& wv,
                        const nn::Linear& wo, const AttCache& cache, const nn::Mat& x_q,
                        const nn::Mat& x_kv, const nn::Mat& dOut, int n_heads, nn::Mat& dx_q,
                        nn::Mat& dx_kv, nn::Linear* gq, nn::Linear* gk, nn::Linear* gv,
                        nn::Linear* go) {
    const int d = static_cast<int>(x_q.cols());
    const int dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    nn::LinearGrad g_wo{nn::Mat::Zero(d, d), nn::Vec::Zero(d)};
    nn::Mat datt_concat =
        nn::linear_backward(wo, cache.att_concat, dOut, go != nullptr ? &g_wo : nullptr);
    if (go != nullptr) {
        go->W += g_wo.W;
        go->b += g_wo.b;
    }

    nn::Mat dq = nn::Mat::Zero(x_q.rows(), d);
    nn::Mat dk = nn::Mat::Zero(x_kv.rows(), d);
    nn::Mat dv = nn::Mat::Zero(x_kv.rows(), d);
    for (int hh = 0; hh < n_heads; ++hh) {
        const nn::Mat& att = cache.att[static_cast<std::size_t>(hh)];
        auto qh = cache.q.middleCols(hh * dh, dh);
        auto kh = cache.k.middleCols(hh * dh, dh);
        auto vh = cache.v.middleCols(hh * dh, dh);
        nn::Mat dout_h = datt_concat.middleCols(hh * dh, dh);
        nn::Mat datt = dout_h * vh.transpose();
        dv.middleCols(hh * dh, dh) = att.transpose() * dout_h;
        nn::Mat dscores = nn::softmax_rows_backward(att, datt);
        dq.middleCols(hh * dh, dh) = (dscores * kh) * scale;
        dk.middleCols(hh * dh, dh) = (dscores.transpose() * qh) * scale;
    }

    auto backprop_proj = [](const nn::Linear& lin, const nn::Mat& x, const nn::Mat& dY,
                            nn::Linear* acc) {
        if (acc == nullptr)
            return nn::linear_backward(lin, x, dY, nullptr);
        nn::LinearGrad g{nn::Mat::Zero(lin.W.rows(), lin.W.cols()), nn::Vec::Zero(lin.b.size())};
        nn::Mat dx = nn::linear_backward(lin, x, dY, &g);
        acc->W += g.W;
        acc->b += g.b;
        return dx;
    };
    dx_q += backprop_proj(wq, x_q, dq, gq);
    dx_kv += backprop_proj(wk, x_kv, dk, gk);
    dx_kv += backprop_proj(wv, x_kv, dv, gv);
}

// ---- full forward/backward ----

struct EncLayerCache {
    nn::Mat x_in;
    AttCache att;
    nn::Mat attn_out, res1, ln1_out, ff_pre, ff_act, ff_out, res2, ln2_out;
    nn::LayerNormCache ln1c, ln2c;
};

struct DecLayerCache {
    nn::Mat x_in;
    AttCache self_att;
    nn::Mat self_out, res_s, ln_s_out;
    nn::LayerNormCache ln_sc;
    AttCache cross_att;
    nn::Mat cross_out, res_c, ln_c_out;
    nn::LayerNormCache ln_cc;
    nn::Mat ff_pre, ff_act, ff_out, res_f, ln_f_out;
    nn::LayerNormCache ln_fc;
};

struct ForwardCache {
    nn::Mat enc_x0, dec_x0;
    std::vector<EncLayerCache> enc;
    std::vector<DecLayerCache> dec;
    nn::Mat enc_out;
    nn::Mat self_mask; // additive (T_dec × T_dec): causal + key exclusion
    nn::Mat dec_out;   // final decoder hidden states
    nn::Mat logits;    // (T_dec × vocab)
};

void check_id(const Model& m, int id, const char* side, std::size_t pos) {
    if (id < 0 || id >= m.config.vocab_size) {
        throw DataError(std::string(side) + " token id " + std::to_string(id) + " at position " +
                        std::to_string(pos) + " is outside the embedding table (vocab size " +
                        std::to_string(m.config.vocab_size) + ")");
    }
}

// Teacher-forcing view of an example: the decoder input sequence, the
// gold ids per step, which steps are scored, and which decoder positions
// are hidden from self-attention. All four derive from the masked flags,
// never from the stored gold ids.
struct TeacherForcing {
    std::vector<int> dec_in;                  // [start] + targets (masked → <mask> id)
    std::vector<int> gold;                    // per step; last step is the end symbol
    std::vector<unsigned char> scored;        // per step
    std::vector<unsigned char> key_excluded;  // per decoder position
};

TeacherForcing plan_teacher_forcing(const Model& m, const MtExample& ex) {
    if (ex.src.empty() || ex.tgt.empty())
        throw DataError("translation example has an empty side: both source and target must "
                        "hold at least one subword");
    if (ex.masked.size() != ex.tgt.size()) {
        throw DataError("masked-flag vector length (" + std::to_string(ex.masked.size()) +
                        ") does not match the target length (" + std::to_string(ex.tgt.size()) +
                        ")");
    }
    const std::size_t max_len = static_cast<std::size_t>(m.config.max_len);
    if (ex.src.size() > max_len) {
        throw DataError("source of " + std::to_string(ex.src.size()) +
                        " subwords exceeds the model maximum of " + std::to_string(max_len));
    }
    if (ex.tgt.size() + 1 > max_len) {
        throw DataError("target of " + std::to_string(ex.tgt.size()) +
                        " subwords exceeds the decoder window of " + std::to_string(max_len - 1) +
                        " (one position is reserved for the start symbol)");
    }
    const std::size_t steps = ex.tgt.size() + 1;
    TeacherForcing tf;
    tf.dec_in.resize(steps);
    tf.gold.resize(steps);
    tf.scored.resize(steps);
    tf.key_excluded.assign(steps, 0);
    tf.dec_in[0] = bpe::Tokenizer::kCls;
    for (std::size_t t = 0; t < ex.tgt.size(); ++t) {
        check_id(m, ex.tgt[t], "target", t);
        tf.dec_in[t + 1] = ex.masked[t] ? bpe::Tokenizer::kMaskMt : ex.tgt[t];
        tf.gold[t] = ex.tgt[t];
        tf.scored[t] = ex.masked[t] ? 0 : 1;
        tf.key_excluded[t + 1] = ex.masked[t] ? 1 : 0;
    }
    tf.gold[steps - 1] = bpe::Tokenizer::kSep;
    tf.scored[steps - 1] = 1;
    for (std::size_t i = 0; i < ex.src.size(); ++i)
        check_id(m, ex.src[i], "source", i);
    return tf;
}

nn::Mat build_self_mask(const std::vector<unsigned char>& key_excluded) {
    const Eigen::Index n = static_cast<Eigen::Index>(key_excluded.size());
    nn::Mat mask = nn::Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (j > i || key_excluded[static_cast<std::size_t>(j)])
                mask(i, j) = kNegInf;
    // Position 0 (the start symbol) is never excluded, so every row keeps
    // at least one finite entry.
    return mask;
}

void run_forward(const Model& m, const std::vector<int>& src, const std::vector<int>& dec_in,
                 const std::vector<unsigned char>& key_excluded, ForwardCache& cache) {
    const int d = m.config.d_model;
    const int h = m.config.n_heads;

    cache.enc_x0.resize(static_cast<Eigen::Index>(src.size()), d);
    for (std::size_t i = 0; i < src.size(); ++i) {
        cache.enc_x0.row(static_cast<Eigen::Index>(i)) =
            m.embedding.row(src[i]) + m.enc_positional.row(static_cast<Eigen::Index>(i));
    }
    cache.enc.assign(m.encoder.size(), EncLayerCache{});
    nn::Mat x = cache.enc_x0;
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
        const EncoderLayer& layer = m.encoder[l];
        EncLayerCache& lc = cache.enc[l];
        lc.x_in = x;
        lc.attn_out =
            attention_forward(layer.wq, layer.wk, layer.wv, layer.wo, x, x, nullptr, h, lc.att);
        lc.res1 = lc.x_in + lc.attn_out;
        lc.ln1_out = nn::layernorm_forward(layer.ln_att, lc.res1, lc.ln1c);
        lc.ff_pre = nn::linear_forward(layer.ff1, lc.ln1_out);
        lc.ff_act = nn::gelu(lc.ff_pre);
        lc.ff_out = nn::linear_forward(layer.ff2, lc.ff_act);
        lc.res2 = lc.ln1_out + lc.ff_out;
        lc.ln2_out = nn::layernorm_forward(layer.ln_ff, lc.res2, lc.ln2c);
        x = lc.ln2_out;
    }
    cache.enc_out = x;

    cache.dec_x0.resize(static_cast<Eigen::Index>(dec_in.size()), d);
    for (std::size_t i = 0; i < dec_in.size(); ++i) {
        cache.dec_x0.row(static_cast<Eigen::Index>(i)) =
            m.embedding.row(dec_in[i]) + m.dec_positional.row(static_cast<Eigen::Index>(i));
    }
    cache.self_mask = build_self_mask(key_excluded);
    cache.dec.assign(m.decoder.size(), DecLayerCache{});
    nn::Mat y = cache.dec_x0;
    for (std::size_t l = 0; l < m.decoder.size(); ++l) {
        const DecoderLayer& layer = m.decoder[l];
        DecLayerCache& lc = cache.dec[l];
        lc.x_in = y;
        lc.self_out = attention_forward(layer.self_wq, layer.self_wk, layer.self_wv, layer.self_wo,
                                        y, y, &cache.self_mask, h, lc.self_att);
        lc.res_s = lc.x_in + lc.self_out;
        lc.ln_s_out = nn::layernorm_forward(layer.ln_self, lc.res_s, lc.ln_sc);
        lc.cross_out =
            attention_forward(layer.cross_wq, layer.cross_wk, layer.cross_wv, layer.cross_wo,
                              lc.ln_s_out, cache.enc_out, nullptr, h, lc.cross_att);
        lc.res_c = lc.ln_s_out + lc.cross_out;
        lc.ln_c_out = nn::layernorm_forward(layer.ln_cross, lc.res_c, lc.ln_cc);
        lc.ff_pre = nn::linear_forward(layer.ff1, lc.ln_c_out);
        lc.ff_act = nn::gelu(lc.ff_pre);
        lc.ff_out = nn::linear_forward(layer.ff2, lc.ff_act);
        lc.res_f = lc.ln_c_out + lc.ff_out;
        lc.ln_f_out = nn::layernorm_forward(layer.ln_ff, lc.res_f, lc.ln_fc);
        y = lc.ln_f_out;
    }
    cache.dec_out = y;
    if (m.config.tie_output)
        cache.logits = (y * m.embedding.transpose()).rowwise() + m.out_proj.b.transpose();
    else
        cache.logits = nn::linear_forward(m.out_proj, y);
}

// Backpropagates d(loss)/d(logits) through decoder and encoder, scattering
// every parameter gradient — embeddings and positional tables included —
// into *grads.
void run_backward(const Model& m, const ForwardCache& cache, const std::vector<int>& src,
                  const std::vector<int>& dec_in, const nn::Mat& dlogits, Model* grads) {
    const int d = m.config.d_model;
    const int h = m.config.n_heads;
    const int v = m.config.vocab_size;
    const Eigen::Index n_dec = cache.dec_x0.rows();
    const Eigen::Index n_enc = cache.enc_x0.rows();

    nn::Mat dy;
    if (m.config.tie_output) {
        dy = dlogits * m.embedding;
        grads->embedding += dlogits.transpose() * cache.dec_out;
        grads->out_proj.b += dlogits.colwise().sum().transpose();
    } else {
        nn::LinearGrad g_out{nn::Mat::Zero(d, v), nn::Vec::Zero(v)};
        dy = nn::linear_backward(m.out_proj, cache.dec_out, dlogits, &g_out);
        grads->out_proj.W += g_out.W;
        grads->out_proj.b += g_out.b;
    }

    nn::Mat denc = nn::Mat::Zero(n_enc, d);
    for (std::size_t li = m.decoder.size(); li-- > 0;) {
        const DecoderLayer& layer = m.decoder[li];
        const DecLayerCache& lc = cache.dec[li];
        DecoderLayer& lg = grads->decoder[li];

        nn::LayerNormGrad g_lnf{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres_f = nn::layernorm_backward(layer.ln_ff, lc.ln_fc, dy, &g_lnf);
        lg.ln_ff.gamma += g_lnf.gamma;
        lg.ln_ff.beta += g_lnf.beta;

        nn::LinearGrad g_ff2{nn::Mat::Zero(m.config.d_ff, d), nn::Vec::Zero(d)};
        nn::Mat dff_act = nn::linear_backward(layer.ff2, lc.ff_act, dres_f, &g_ff2);
        lg.ff2.W += g_ff2.W;
        lg.ff2.b += g_ff2.b;
        nn::Mat dff_pre = nn::gelu_backward(lc.ff_pre, dff_act);
        nn::LinearGrad g_ff1{nn::Mat::Zero(d, m.config.d_ff), nn::Vec::Zero(m.config.d_ff)};
        nn::Mat dln_c = dres_f + nn::linear_backward(layer.ff1, lc.ln_c_out, dff_pre, &g_ff1);
        lg.ff1.W += g_ff1.W;
        lg.ff1.b += g_ff1.b;

        nn::LayerNormGrad g_lnc{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres_c = nn::layernorm_backward(layer.ln_cross, lc.ln_cc, dln_c, &g_lnc);
        lg.ln_cross.gamma += g_lnc.gamma;
        lg.ln_cross.beta += g_lnc.beta;

        nn::Mat dln_s = dres_c; // residual shortcut
        attention_backward(layer.cross_wq, layer.cross_wk, layer.cross_wv, layer.cross_wo,
                           lc.cross_att, lc.ln_s_out, cache.enc_out, dres_c, h, dln_s, denc,
                           &lg.cross_wq, &lg.cross_wk, &lg.cross_wv, &lg.cross_wo);

        nn::LayerNormGrad g_lns{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres_s = nn::layernorm_backward(layer.ln_self, lc.ln_sc, dln_s, &g_lns);
        lg.ln_self.gamma += g_lns.gamma;
        lg.ln_self.beta += g_lns.beta;

        nn::Mat dx_in = dres_s; // residual shortcut
        attention_backward(layer.self_wq, layer.self_wk, layer.self_wv, layer.self_wo, lc.self_att,
                           lc.x_in, lc.x_in, dres_s, h, dx_in, dx_in, &lg.self_wq, &lg.self_wk,
                           &lg.self_wv, &lg.self_wo);
        // dx_in accumulated the attention input gradient on top of the
        // residual shortcut, but the shortcut itself was counted once at
        // initialization; both query and key/value flow added their parts.
        dy = dx_in;
    }
    for (Eigen::Index i = 0; i < n_dec; ++i) {
        grads->embedding.row(dec_in[static_cast<std::size_t>(i)]) += dy.row(i);
        grads->dec_positional.row(i) += dy.row(i);
    }

    for (std::size_t li = m.encoder.size(); li-- > 0;) {
        const EncoderLayer& layer = m.encoder[li];
        const EncLayerCache& lc = cache.enc[li];
        EncoderLayer& lg = grads->encoder[li];

        nn::LayerNormGrad g_ln2{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres2 = nn::layernorm_backward(layer.ln_ff, lc.ln2c, denc, &g_ln2);
        lg.ln_ff.gamma += g_ln2.gamma;
        lg.ln_ff.beta += g_ln2.beta;

        nn::LinearGrad g_ff2{nn::Mat::Zero(m.config.d_ff, d), nn::Vec::Zero(d)};
        nn::Mat dff_act = nn::linear_backward(layer.ff2, lc.ff_act, dres2, &g_ff2);
        lg.ff2.W += g_ff2.W;
        lg.ff2.b += g_ff2.b;
        nn::Mat dff_pre = nn::gelu_backward(lc.ff_pre, dff_act);
        nn::LinearGrad g_ff1{nn::Mat::Zero(d, m.config.d_ff), nn::Vec::Zero(m.config.d_ff)};
        nn::Mat dln1 = dres2 + nn::linear_backward(layer.ff1, lc.ln1_out, dff_pre, &g_ff1);
        lg.ff1.W += g_ff1.W;
        lg.ff1.b += g_ff1.b;

        nn::LayerNormGrad g_ln1{nn::Vec::Zero(d), nn::Vec::Zero(d)};
        nn::Mat dres1 = nn::layernorm_backward(layer.ln_att, lc.ln1c, dln1, &g_ln1);
        lg.ln_att.gamma += g_ln1.gamma;
        lg.ln_att.beta += g_ln1.beta;

        nn::Mat dx_in = dres1;
        attention_backward(layer.wq, layer.wk, layer.wv, layer.wo, lc.att, lc.x_in, lc.x_in, dres1,
                           h, dx_in, dx_in, &lg.wq, &lg.wk, &lg.wv, &lg.wo);
        denc = dx_in;
    }
    for (Eigen::Index i = 0; i < n_enc; ++i) {
        grads->embedding.row(src[static_cast<std::size_t>(i)]) += denc.row(i);
        grads->enc_positional.row(i) += denc.row(i);
    }
}

// Stable log-softmax cross-entropy of one logits row against a gold id;
// adds the softmax-minus-onehot gradient into drow when non-null.
double cross_entropy_row(const nn::Mat& logits, Eigen::Index row, int gold, nn::Mat* dlogits) {
    const auto r = logits.row(row);
    const double mx = r.maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < r.size(); ++c)
        sum += std::exp(r(c) - mx);
    const double lse = mx + std::log(sum);
    if (dlogits != nullptr) {
        for (Eigen::Index c = 0; c < r.size(); ++c)
            (*dlogits)(row, c) += std::exp(r(c) - lse);
        (*dlogits)(row, gold) -= 1.0;
    }
    return lse - r(gold);
}

const std::array<int, 5> kSuppressedAtDecode = {
    bpe::Tokenizer::kCls, bpe::Tokenizer::kMaskClf, bpe::Tokenizer::kMaskMt, bpe::Tokenizer::kPad,
    bpe::Tokenizer::kUnk};

constexpr std::string_view kMtMagic = "FFMT1\n";

} // namespace

MtExample make_example(std::vector<int> src, std::vector<int> tgt) {
    MtExample ex;
    ex.masked.resize(tgt.size());
    for (std::size_t t = 0; t < tgt.size(); ++t)
        ex.masked[t] = tgt[t] == bpe::Tokenizer::kMaskMt ? 1 : 0;
    ex.src = std::move(src);
    ex.tgt = std::move(tgt);
    return ex;
}

Model zero_gradients(const Config& config) {
    validate_config(config, /*from_file=*/false, "");
    Model g = make_shell(config);
    visit_tensors(g, [](auto& t) { t.setZero(); });
    return g;
}

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
        const double stddev = std::sqrt(2.0 / static_cast<double>(lin.W.rows() + lin.W.cols()));
        fill_normal(lin.W, stddev);
        lin.b.setZero();
    };
    fill_normal(m.embedding, 0.02);
    fill_normal(m.enc_positional, 0.02);
    fill_normal(m.dec_positional, 0.02);
    for (auto& layer : m.encoder) {
        fill_linear(layer.wq);
        fill_linear(layer.wk);
        fill_linear(layer.wv);
        fill_linear(layer.wo);
        fill_linear(layer.ff1);
        fill_linear(layer.ff2);
    }
    for (auto& layer : m.decoder) {
        fill_linear(layer.self_wq);
        fill_linear(layer.self_wk);
        fill_linear(layer.self_wv);
        fill_linear(layer.self_wo);
        fill_linear(layer.cross_wq);
        fill_linear(layer.cross_wk);
        fill_linear(layer.cross_wv);
        fill_linear(layer.cross_wo);
        fill_linear(layer.ff1);
        fill_linear(layer.ff2);
    }
    fill_linear(m.out_proj);
    return m;
}

namespace {

// Shared by the plain-text and pre-tokenized corpus builders; only the way
// target lines become ids differs.
template <typename TargetIdsFn>
std::vector<MtExample> build_examples(const std::vector<corpus::ParallelPair>& pairs,
                                      const bpe::Tokenizer& tokenizer, const Config& config,
                                      std::size_t* truncated, TargetIdsFn&& target_ids) {
    validate_config(config, /*from_file=*/false, "");
    std::vector<MtExample> out;
    out.reserve(pairs.size());
    std::size_t n_truncated = 0;
    const std::size_t src_budget = static_cast<std::size_t>(config.max_len);
    const std::size_t tgt_budget = static_cast<std::size_t>(config.max_len) - 1;
    for (const corpus::ParallelPair& pair : pairs) {
        std::vector<int> src = tokenizer.encode(pair.source).ids;
        std::vector<int> tgt = target_ids(pair.target);
        bool cut = false;
        if (src.size() > src_budget) {
            src.resize(src_budget);
            cut = true;
        }
        if (tgt.size() > tgt_budget) {
            tgt.resize(tgt_budget);
            cut = true;
        }
        if (cut)
            ++n_truncated;
        out.push_back(make_example(std::move(src), std::move(tgt)));
    }
    if (truncated != nullptr)
        *truncated = n_truncated;
    return out;
}

} // namespace

std::vector<MtExample> prepare_corpus(const std::vector<corpus::ParallelPair>& pairs,
                                      const bpe::Tokenizer& tokenizer, const Config& config,
                                      std::size_t* truncated) {
    return build_examples(pairs, tokenizer, config, truncated, [&](const std::string& line) {
        return tokenizer.encode(line).ids;
    });
}

std::vector<MtExample> prepare_tokenized_corpus(const std::vector<corpus::ParallelPair>& pairs,
                                                const bpe::Tokenizer& tokenizer,
                                                const Config& config, std::size_t* truncated) {
    return build_examples(pairs, tokenizer, config, truncated, [&](const std::string& line) {
        return tokenizer.ids_from_tokenized(line);
    });
}

LossStats sequence_loss(const Model& model, const MtExample& ex, Model* grads) {
    const TeacherForcing tf = plan_teacher_forcing(model, ex);
    ForwardCache cache;
    run_forward(model, ex.src, tf.dec_in, tf.key_excluded, cache);
    LossStats stats;
    nn::Mat dlogits;
    if (grads != nullptr)
        dlogits = nn::Mat::Zero(cache.logits.rows(), cache.logits.cols());
    for (std::size_t t = 0; t < tf.gold.size(); ++t) {
        if (!tf.scored[t])
            continue;
        stats.loss_sum += cross_entropy_row(cache.logits, static_cast<Eigen::Index>(t), tf.gold[t],
                                            grads != nullptr ? &dlogits : nullptr);
        ++stats.tokens;
    }
    if (grads != nullptr)
        run_backward(model, cache, ex.src, tf.dec_in, dlogits, grads);
    return stats;
}

nn::Mat decoder_logits(const Model& model, const MtExample& ex) {
    const TeacherForcing tf = plan_teacher_forcing(model, ex);
    ForwardCache cache;
    run_forward(model, ex.src, tf.dec_in, tf.key_excluded, cache);
    return cache.logits;
}

TrainTrace train(Model& model, const std::vector<MtExample>& train_set,
                 const std::vector<MtExample>& dev_set, const TrainOptions& opts) {
    if (train_set.empty())
        throw DataError("training set is empty");
    if (opts.epochs < 0 || opts.batch_size <= 0 || !(opts.lr > 0.0) || opts.warmup_steps < 0)
        throw UsageError("invalid training options: epochs must be >= 0, batch size and "
                         "learning rate positive, warmup steps >= 0");
    if (opts.epochs > 0 && dev_set.empty())
        throw DataError("development set is empty: per-epoch loss needs at least one example");

    TrainTrace trace;
    rng::Engine eng(opts.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        rng::shuffle(order, eng);
        double epoch_loss_sum = 0.0;
        std::int64_t epoch_tokens = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opts.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
            Model grads = zero_like(model);
            double batch_loss_sum = 0.0;
            std::int64_t batch_tokens = 0;
            for (std::size_t bi = start; bi < end; ++bi) {
                const LossStats s = sequence_loss(model, train_set[order[bi]], &grads);
                batch_loss_sum += s.loss_sum;
                batch_tokens += s.tokens;
            }
            if (!std::isfinite(batch_loss_sum)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch starting at example " +
                                   std::to_string(start));
            }
            ++step;
            const double warm =
                opts.warmup_steps > 0
                    ? std::min(1.0,
                               static_cast<double>(step) / static_cast<double>(opts.warmup_steps))
                    : 1.0;
            // Every example contributes at least the end-symbol step, so
            // batch_tokens is positive.
            const double lr_t = opts.lr * warm / static_cast<double>(batch_tokens);
            visit_tensor_pairs(model, grads,
                               [lr_t](auto& param, const auto& grad) { param -= lr_t * grad; });
            epoch_loss_sum += batch_loss_sum;
            epoch_tokens += batch_tokens;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss_sum / static_cast<double>(epoch_tokens);
        stats.dev_loss = evaluate_loss(model, dev_set);
        trace.epochs.push_back(stats);
    }
    return trace;
}

double evaluate_loss(const Model& model, const std::vector<MtExample>& examples) {
    if (examples.empty())
        throw DataError("cannot evaluate loss on an empty dataset");
    double loss_sum = 0.0;
    std::int64_t tokens = 0;
    for (const MtExample& ex : examples) {
        const LossStats s = sequence_loss(model, ex, nullptr);
        loss_sum += s.loss_sum;
        tokens += s.tokens;
    }
    return loss_sum / static_cast<double>(tokens);
}

double token_accuracy(const Model& model, const std::vector<MtExample>& examples) {
    if (examples.empty())
        throw DataError("cannot evaluate accuracy on an empty dataset");
    std::int64_t correct = 0;
    std::int64_t total = 0;
    for (const MtExample& ex : examples) {
        const TeacherForcing tf = plan_teacher_forcing(model, ex);
        const nn::Mat logits = decoder_logits(model, ex);
        for (std::size_t t = 0; t < tf.gold.size(); ++t) {
            if (!tf.scored[t])
                continue;
            Eigen::Index best = 0;
            logits.row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
            if (static_cast<int>(best) == tf.gold[t])
                ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

TranslateResult translate(const Model& model, const bpe::Tokenizer& tokenizer,
                          const std::string& source, int beam) {
    if (beam < 1)
        throw UsageError("beam width must be at least 1, got " + std::to_string(beam));
    TranslateResult result;
    std::vector<int> src = tokenizer.encode(source).ids;
    if (src.empty())
        throw DataError("source sentence produced no tokens");
    if (src.size() > static_cast<std::size_t>(model.config.max_len)) {
        src.resize(static_cast<std::size_t>(model.config.max_len));
        result.truncated = true;
    }
    for (std::size_t i = 0; i < src.size(); ++i)
        check_id(model, src[i], "source", i);

    struct Beam {
        std::vector<int> emitted;
        double logp = 0.0;
        bool done = false;
    };
    const std::size_t max_emitted = static_cast<std::size_t>(model.config.max_len) - 1;
    std::vector<Beam> beams{Beam{}};
    std::vector<unsigned char> no_exclusion;
    for (std::size_t step_i = 0; step_i < max_emitted; ++step_i) {
        bool any_open = false;
        for (const Beam& b : beams)
            any_open = any_open || !b.done;
        if (!any_open)
            break;
        // (score, parent index, token; token -1 carries a finished beam)
        std::vector<std::tuple<double, std::size_t, int>> candidates;
        for (std::size_t bi = 0; bi < beams.size(); ++bi) {
            const Beam& b = beams[bi];
            if (b.done) {
                candidates.emplace_back(b.logp, bi, -1);
                continue;
            }
            std::vector<int> dec_in;
            dec_in.reserve(b.emitted.size() + 1);
            dec_in.push_back(bpe::Tokenizer::kCls);
            dec_in.insert(dec_in.end(), b.emitted.begin(), b.emitted.end());
            no_exclusion.assign(dec_in.size(), 0);
            ForwardCache cache;
            run_forward(model, src, dec_in, no_exclusion, cache);
            nn::Vec row = cache.logits.row(cache.logits.rows() - 1).transpose();
            for (int id : kSuppressedAtDecode)
                row(id) = kNegInf;
            const double mx = row.maxCoeff();
            double sum = 0.0;
            for (Eigen::Index c = 0; c < row.size(); ++c)
                if (row(c) != kNegInf)
                    sum += std::exp(row(c) - mx);
            const double lse = mx + std::log(sum);
            // This beam's best continuations, ties broken to the lowest
            // token id.
            std::vector<std::pair<double, int>> scored;
            scored.reserve(static_cast<std::size_t>(row.size()));
            for (Eigen::Index c = 0; c < row.size(); ++c)
                if (row(c) != kNegInf)
                    scored.emplace_back(row(c) - lse, static_cast<int>(c));
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b2) {
                if (a.first != b2.first)
                    return a.first > b2.first;
                return a.second < b2.second;
            });
            const std::size_t keep = std::min(scored.size(), static_cast<std::size_t>(beam));
            for (std::size_t c = 0; c < keep; ++c)
                candidates.emplace_back(b.logp + scored[c].first, bi, scored[c].second);
        }
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b2) {
            if (std::get<0>(a) != std::get<0>(b2))
                return std::get<0>(a) > std::get<0>(b2);
            if (std::get<1>(a) != std::get<1>(b2))
                return std::get<1>(a) < std::get<1>(b2);
            return std::get<2>(a) < std::get<2>(b2);
        });
        std::vector<Beam> next;
        for (const auto& [score, parent, tok] : candidates) {
            if (next.size() == static_cast<std::size_t>(beam))
                break;
            Beam nb = beams[parent];
            nb.logp = score;
            if (tok == bpe::Tokenizer::kSep)
                nb.done = true;
            else if (tok >= 0)
                nb.emitted.push_back(tok);
            next.push_back(std::move(nb));
        }
        beams = std::move(next);
    }

    const Beam* chosen = nullptr;
    for (const Beam& b : beams) {
        if (!b.done)
            continue;
        if (chosen == nullptr || b.logp > chosen->logp)
            chosen = &b;
    }
    if (chosen == nullptr) {
        result.truncated = true;
        for (const Beam& b : beams)
            if (chosen == nullptr || b.logp > chosen->logp)
                chosen = &b;
    }
    result.ids = chosen->emitted;
    result.text = tokenizer.decode(result.ids);
    return result;
}

void save_checkpoint(const Model& model, const std::string& path) {
    io::BinWriter w;
    w.bytes(kMtMagic);
    w.i64(model.config.d_model);
    w.i64(model.config.n_heads);
    w.i64(model.config.n_enc_layers);
    w.i64(model.config.n_dec_layers);
    w.i64(model.config.d_ff);
    w.i64(model.config.max_len);
    w.i64(model.config.vocab_size);
    w.i64(model.config.tie_output ? 1 : 0);
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
    if (r.bytes(kMtMagic.size()) != kMtMagic)
        throw DataError(path + ": not a translation checkpoint (bad magic)");
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
    config.n_enc_layers = read_dim("n_enc_layers");
    config.n_dec_layers = read_dim("n_dec_layers");
    config.d_ff = read_dim("d_ff");
    config.max_len = read_dim("max_len");
    config.vocab_size = read_dim("vocab_size");
    const std::int64_t tie = r.i64();
    if (tie != 0 && tie != 1)
        throw DataError(path + ": tie-output flag must be 0 or 1, got " + std::to_string(tie));
    config.tie_output = tie == 1;
    validate_config(config, /*from_file=*/true, path);
    Model m = make_shell(config);
    visit_tensors(m, [&r, &path](auto& t) {
        for (Eigen::Index row = 0; row < t.rows(); ++row)
            for (Eigen::Index col = 0; col < t.cols(); ++col) {
                const double v2 = r.f64();
                if (!std::isfinite(v2))
                    throw DataError(path + ": non-finite parameter value in checkpoint");
                t(row, col) = v2;
            }
    });
    if (!r.at_end())
        throw DataError(path + ": trailing bytes after parameter tensors (" +
                        std::to_string(r.remaining()) + " extra)");
    return m;
}

} // namespace fluencyforge::mt
