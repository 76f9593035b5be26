#include "fluencyforge/mask.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"

#include <json.hpp>

#include <cstdio>

namespace fluencyforge::mask {

namespace {

std::string join_surface(const TokenSequence& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i > 0)
            out += ' ';
        out += seq.surface[i];
    }
    return out;
}

// Saliency placeholder for a sentence the classifier cannot score: all
// norms zero, nothing selected.
noise::SaliencyReport placeholder_report(const TokenSequence& wrapped) {
    noise::SaliencyReport r;
    r.tokens = wrapped.surface;
    r.flags = wrapped.flags;
    r.candidate = noise::candidate_set(wrapped);
    r.grad_norm.assign(wrapped.size(), 0.0);
    r.noise.assign(wrapped.size(), false);
    r.threshold = 0.0;
    r.likelihood_bilingual = 0.0;
    return r;
}

} // namespace

MaskedCorpus mask_corpus(const clf::Model& model, const std::vector<corpus::ParallelPair>& pairs,
                         const bpe::Tokenizer& tokenizer, const pos::LexiconTagger& tagger,
                         const MaskPolicy& policy) {
    if (!(policy.gamma >= 0.0 && policy.gamma <= 1.0))
        throw UsageError("mask threshold gamma must lie in [0, 1], got " +
                         std::to_string(policy.gamma));

    const std::string& mask_literal = bpe::Tokenizer::specials()[bpe::Tokenizer::kMaskMt];

    MaskedCorpus mc;
    mc.policy = policy;
    mc.n_sentences = pairs.size();
    mc.pairs.reserve(pairs.size());
    mc.previews.reserve(pairs.size());
    mc.reports.reserve(pairs.size());
    mc.replaced_per_sentence.reserve(pairs.size());

    for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
        TokenSequence seq = tokenizer.encode(pairs[idx].target);
        tagger.tag_sequence(seq);
        for (std::size_t i = 0; i < seq.size(); ++i)
            if (!seq.symbol(i))
                ++mc.n_target_tokens;

        TokenSequence wrapped = clf::wrap_sequence(seq);
        std::size_t replaced = 0;
        if (wrapped.size() > static_cast<std::size_t>(model.config.max_len)) {
            mc.skipped.push_back(idx);
            mc.reports.push_back(placeholder_report(wrapped));
        } else {
            noise::SaliencyReport report = noise::extract_noise(model, wrapped);
            if (report.likelihood_bilingual > policy.gamma) {
                // Body position i in the wrapped sequence is i-1 in `seq`.
                for (std::size_t i = 1; i + 1 < wrapped.size(); ++i) {
                    if (!report.noise[i])
                        continue;
                    if (policy.exclude_num && wrapped.flags[i].pos == PosTag::Num)
                        continue;
                    const std::size_t body = i - 1;
                    seq.ids[body] = bpe::Tokenizer::kMaskMt;
                    seq.surface[body] = mask_literal;
                    seq.flags[body] = {WordClass::Symbol, PosTag::Symbol};
                    ++replaced;
                }
            }
            mc.reports.push_back(std::move(report));
        }

        corpus::ParallelPair out;
        out.source = pairs[idx].source;
        out.target = join_surface(seq);
        mc.pairs.push_back(std::move(out));
        mc.previews.push_back(tokenizer.decode(seq.ids));
        mc.replaced_per_sentence.push_back(replaced);
        mc.n_replaced += replaced;
        if (replaced > 0)
            ++mc.n_masked_sentences;
    }

    mc.sentence_mask_ratio =
        mc.n_sentences == 0
            ? 0.0
            : static_cast<double>(mc.n_masked_sentences) / static_cast<double>(mc.n_sentences);
    mc.token_mask_ratio =
        mc.n_target_tokens == 0
            ? 0.0
            : static_cast<double>(mc.n_replaced) / static_cast<double>(mc.n_target_tokens);
    return mc;
}

MaskRatioReport mask_ratio_report(const MaskedCorpus& mc) {
    MaskRatioReport r;
    r.gamma = mc.policy.gamma;
    r.sentence_ratio = mc.sentence_mask_ratio;
    r.token_ratio = mc.token_mask_ratio;
    r.n_sentences = mc.n_sentences;
    r.n_tokens = mc.n_target_tokens;
    r.n_replaced = mc.n_replaced;
    r.n_masked_sentences = mc.n_masked_sentences;
    r.n_skipped = mc.skipped.size();
    for (std::size_t count : mc.replaced_per_sentence)
        ++r.histogram[count];
    return r;
}

std::string format_ratios(const MaskRatioReport& r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%% / %.1f%%", r.sentence_ratio * 100.0,
                  r.token_ratio * 100.0);
    return buf;
}

std::string ratio_report_json(const MaskedCorpus& mc) {
    nlohmann::json obj;
    obj["gamma"] = mc.policy.gamma;
    obj["sentence_ratio"] = mc.sentence_mask_ratio;
    obj["token_ratio"] = mc.token_mask_ratio;
    obj["n_sentences"] = mc.n_sentences;
    obj["n_tokens"] = mc.n_target_tokens;
    return obj.dump(2) + "\n";
}

namespace {
std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}
} // namespace

void write_masked_targets(const std::string& path, const MaskedCorpus& mc) {
    std::vector<std::string> lines;
    lines.reserve(mc.pairs.size());
    for (const auto& p : mc.pairs)
        lines.push_back(p.target);
    io::write_file_atomic(path, join_lines(lines));
}

void write_previews(const std::string& path, const MaskedCorpus& mc) {
    io::write_file_atomic(path, join_lines(mc.previews));
}

void write_ratio_json(const std::string& path, const MaskedCorpus& mc) {
    io::write_file_atomic(path, ratio_report_json(mc));
}

} // namespace fluencyforge::mask
