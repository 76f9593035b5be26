#include "fluencyforge/mask.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace fluencyforge;

namespace {

const std::vector<std::string>& fixture_sentences() {
    static const std::vector<std::string> sents = {
        "the cat sat on the mat",
        "a dog ran to the house",
        "the bird sang of the sun and the sky",
        "the 5 cats sat on a mat",
        "a cat and a dog ran",
        "the sun sat on the sky",
    };
    return sents;
}

bpe::Tokenizer fixture_tokenizer() {
    std::vector<std::string> corpus;
    for (int rep = 0; rep < 4; ++rep)
        for (const auto& s : fixture_sentences())
            corpus.push_back(s);
    return bpe::Tokenizer::learn(corpus, 120);
}

clf::Config fixture_config(const bpe::Tokenizer& tok) {
    clf::Config c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 16;
    c.max_len = 16;
    c.vocab_size = static_cast<int>(tok.vocab_size());
    return c;
}

// likelihood ≈ σ(10) for every sentence, and zero input-dependence: every
// gradient norm is 0, so all candidates tie and the whole candidate set is
// selected once the gate opens.
clf::Model always_confident_model(const clf::Config& c) {
    clf::Model m = clf::init_model(c, 91);
    m.out_proj.W.setZero();
    m.out_proj.b << 0.0, 10.0;
    return m;
}

clf::Model never_confident_model(const clf::Config& c) {
    clf::Model m = clf::init_model(c, 92);
    m.out_proj.W.setZero();
    m.out_proj.b << 10.0, 0.0;
    return m;
}

std::vector<corpus::ParallelPair> fixture_pairs() {
    std::vector<corpus::ParallelPair> pairs;
    int n = 0;
    for (const auto& s : fixture_sentences()) {
        corpus::ParallelPair p;
        p.source = "source line " + std::to_string(n++);
        p.target = s;
        pairs.push_back(p);
    }
    return pairs;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "ff_mask_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < line.size()) {
        std::size_t end = line.find(' ', start);
        if (end == std::string::npos)
            end = line.size();
        if (end > start)
            out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

} // namespace

TEST_SUITE("mask") {

TEST_CASE("gamma outside the unit interval is rejected") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = -0.1;
    CHECK_THROWS_AS(mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy), UsageError);
    policy.gamma = 1.5;
    CHECK_THROWS_AS(mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy), UsageError);
}

TEST_CASE("gamma 1.0 is the identity transformation") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 1.0;
    mask::MaskedCorpus mc = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);

    CHECK(mc.sentence_mask_ratio == 0.0);
    CHECK(mc.token_mask_ratio == 0.0);
    CHECK(mc.n_replaced == 0);
    for (std::size_t i = 0; i < mc.pairs.size(); ++i) {
        TokenSequence seq = tok.encode(fixture_sentences()[i]);
        std::string joined;
        for (std::size_t t = 0; t < seq.size(); ++t) {
            if (t > 0)
                joined += ' ';
            joined += seq.surface[t];
        }
        CHECK(mc.pairs[i].target == joined);
        CHECK(mc.pairs[i].target.find("<mask>") == std::string::npos);
        // The preview detokenizes back to the input sentence.
        CHECK(mc.previews[i] == fixture_sentences()[i]);
    }
}

TEST_CASE("a fully confident flat-saliency model masks every function subword") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 0.5;
    auto pairs = fixture_pairs();
    mask::MaskedCorpus mc = mask::mask_corpus(m, pairs, tok, tagger, policy);

    // Independent oracle: count function vs non-symbol tokens by tagging
    // each target directly.
    std::size_t function_tokens = 0, non_symbol_tokens = 0;
    for (const auto& p : pairs) {
        TokenSequence seq = tok.encode(p.target);
        tagger.tag_sequence(seq);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (seq.function(i))
                ++function_tokens;
            if (!seq.symbol(i))
                ++non_symbol_tokens;
        }
    }
    REQUIRE(function_tokens > 0);

    CHECK(mc.n_replaced == function_tokens);
    CHECK(mc.n_target_tokens == non_symbol_tokens);
    CHECK(mc.token_mask_ratio ==
          doctest::Approx(static_cast<double>(function_tokens) /
                          static_cast<double>(non_symbol_tokens)));
    // Every fixture sentence contains a determiner, so all are masked.
    CHECK(mc.sentence_mask_ratio == 1.0);

    // Sources never change; replaced positions are exactly the FUNCTION
    // positions; CONTENT subwords survive verbatim.
    for (std::size_t i = 0; i < mc.pairs.size(); ++i) {
        CHECK(mc.pairs[i].source == pairs[i].source);
        TokenSequence orig = tok.encode(pairs[i].target);
        tagger.tag_sequence(orig);
        auto masked_tokens = split_tokens(mc.pairs[i].target);
        REQUIRE(masked_tokens.size() == orig.size());
        for (std::size_t t = 0; t < orig.size(); ++t) {
            if (orig.function(t)) {
                CHECK(masked_tokens[t] == "<mask>");
            } else {
                CHECK(masked_tokens[t] == orig.surface[t]);
            }
        }
    }
}

TEST_CASE("an unconfident model masks nothing") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = never_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 0.5;
    mask::MaskedCorpus mc = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);
    CHECK(mc.n_replaced == 0);
    CHECK(mc.sentence_mask_ratio == 0.0);
    CHECK(mc.token_mask_ratio == 0.0);
    mask::MaskRatioReport r = mask::mask_ratio_report(mc);
    CHECK(r.histogram.size() == 1);
    CHECK(r.histogram.at(0) == fixture_sentences().size());
}

TEST_CASE("the confidence gate is strictly greater-than") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    const double lik = clf::likelihood_from_logits(0.0, 10.0); // every sentence's score

    mask::MaskPolicy policy;
    policy.gamma = lik; // equality must NOT mask
    mask::MaskedCorpus at = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);
    CHECK(at.n_replaced == 0);

    policy.gamma = lik - 1e-9; // strictly below the likelihood → masks
    mask::MaskedCorpus below = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);
    CHECK(below.n_replaced > 0);
}

TEST_CASE("masked sentence sets shrink monotonically in gamma") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    // A plain random-init model: likelihoods hover near 0.5 and differ per
    // sentence, so successive thresholds cut real subsets.
    clf::Model m = clf::init_model(fixture_config(tok), 2001);
    pos::LexiconTagger tagger2 = pos::LexiconTagger::english();

    const std::vector<double> gammas = {0.0, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<std::set<std::size_t>> masked_sets;
    std::vector<double> sent_ratios, tok_ratios;
    for (double g : gammas) {
        mask::MaskPolicy policy;
        policy.gamma = g;
        mask::MaskedCorpus mc = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);
        std::set<std::size_t> masked;
        for (std::size_t i = 0; i < mc.replaced_per_sentence.size(); ++i)
            if (mc.replaced_per_sentence[i] > 0)
                masked.insert(i);
        masked_sets.push_back(std::move(masked));
        sent_ratios.push_back(mc.sentence_mask_ratio);
        tok_ratios.push_back(mc.token_mask_ratio);
    }
    for (std::size_t k = 1; k < gammas.size(); ++k) {
        // Nested: every sentence masked at the higher γ is masked at the
        // lower γ too.
        for (std::size_t idx : masked_sets[k])
            CHECK(masked_sets[k - 1].count(idx) == 1);
        CHECK(sent_ratios[k] <= sent_ratios[k - 1]);
        CHECK(tok_ratios[k] <= tok_ratios[k - 1]);
    }
    CHECK(sent_ratios.back() == 0.0); // γ = 1.0 row
    CHECK(tok_ratios.back() == 0.0);
    // γ = 0 gates everything through (likelihood > 0 always).
    CHECK(masked_sets.front().size() == fixture_sentences().size());
}

TEST_CASE("numeral exclusion preserves NUM subwords while masking the rest") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));

    std::vector<corpus::ParallelPair> pairs;
    corpus::ParallelPair p;
    p.source = "s";
    p.target = "the 5 cats sat";
    pairs.push_back(p);

    mask::MaskPolicy with_num;
    with_num.gamma = 0.5;
    with_num.exclude_num = false;
    mask::MaskedCorpus all = mask::mask_corpus(m, pairs, tok, tagger, with_num);
    CHECK(all.pairs[0].target.find('5') == std::string::npos); // numeral masked

    mask::MaskPolicy no_num;
    no_num.gamma = 0.5;
    no_num.exclude_num = true;
    mask::MaskedCorpus kept = mask::mask_corpus(m, pairs, tok, tagger, no_num);
    auto tokens = split_tokens(kept.pairs[0].target);
    bool has_five = false, has_mask = false;
    for (const auto& t : tokens) {
        has_five = has_five || t == "5";
        has_mask = has_mask || t == "<mask>";
    }
    CHECK(has_five);  // NUM survives
    CHECK(has_mask);  // "the" is still masked
    CHECK(kept.n_replaced < all.n_replaced);
}

TEST_CASE("over-length sentences pass through unmasked and are counted") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok)); // max_len 16

    std::vector<corpus::ParallelPair> pairs = fixture_pairs();
    corpus::ParallelPair long_pair;
    long_pair.source = "long";
    long_pair.target = "the cat sat on the mat and the dog ran to the house and the bird sang";
    pairs.push_back(long_pair);

    mask::MaskPolicy policy;
    policy.gamma = 0.5;
    mask::MaskedCorpus mc = mask::mask_corpus(m, pairs, tok, tagger, policy);

    REQUIRE(mc.skipped.size() == 1);
    const std::size_t li = mc.skipped[0];
    CHECK(li == pairs.size() - 1);
    CHECK(mc.pairs[li].target.find("<mask>") == std::string::npos);
    CHECK(mc.replaced_per_sentence[li] == 0);
    // Its tokens still count in the denominator.
    TokenSequence seq = tok.encode(long_pair.target);
    tagger.tag_sequence(seq);
    std::size_t non_sym = 0;
    for (std::size_t i = 0; i < seq.size(); ++i)
        non_sym += seq.symbol(i) ? 0 : 1;
    std::size_t others = 0;
    for (const auto& s : fixture_sentences()) {
        TokenSequence q = tok.encode(s);
        tagger.tag_sequence(q);
        for (std::size_t i = 0; i < q.size(); ++i)
            others += q.symbol(i) ? 0 : 1;
    }
    CHECK(mc.n_target_tokens == non_sym + others);
    // The skipped sentence's report is a placeholder with no selection.
    CHECK(mc.reports[li].noise_indices().empty());
    CHECK(mc.reports[li].threshold == 0.0);
}

TEST_CASE("re-masking an already fully masked corpus changes nothing") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 0.5;

    auto pairs = fixture_pairs();
    mask::MaskedCorpus first = mask::mask_corpus(m, pairs, tok, tagger, policy);

    // Precondition for feeding targets back in as raw text: no subword in
    // this fixture splits, so the tokenized targets are plain sentences.
    for (const auto& p : first.pairs)
        CHECK(p.target.find("@@") == std::string::npos);

    mask::MaskedCorpus second = mask::mask_corpus(m, first.pairs, tok, tagger, policy);
    CHECK(second.n_replaced == 0); // every candidate already became SYMBOL
    for (std::size_t i = 0; i < first.pairs.size(); ++i) {
        CHECK(second.pairs[i].target == first.pairs[i].target);
        CHECK(second.pairs[i].source == first.pairs[i].source);
    }
}

TEST_CASE("ratio report reproduces the worked arithmetic example") {
    // 10 sentences, 2 of them masked, 100 countable tokens, 3 replaced.
    mask::MaskedCorpus mc;
    mc.policy.gamma = 0.8;
    mc.n_sentences = 10;
    mc.n_masked_sentences = 2;
    mc.n_target_tokens = 100;
    mc.n_replaced = 3;
    mc.sentence_mask_ratio = 0.2;
    mc.token_mask_ratio = 0.03;
    mc.replaced_per_sentence = {2, 0, 0, 0, 1, 0, 0, 0, 0, 0};

    mask::MaskRatioReport r = mask::mask_ratio_report(mc);
    CHECK(r.gamma == 0.8);
    CHECK(r.sentence_ratio == doctest::Approx(0.2));
    CHECK(r.token_ratio == doctest::Approx(0.03));
    CHECK(mask::format_ratios(r) == "20.0% / 3.0%");
    CHECK(r.histogram.at(0) == 8);
    CHECK(r.histogram.at(1) == 1);
    CHECK(r.histogram.at(2) == 1);

    mask::MaskedCorpus empty;
    mask::MaskRatioReport er = mask::mask_ratio_report(empty);
    CHECK(er.sentence_ratio == 0.0);
    CHECK(er.token_ratio == 0.0);
    CHECK(mask::format_ratios(er) == "0.0% / 0.0%");
}

TEST_CASE("ratio JSON carries exactly the declared fields") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 0.5;
    mask::MaskedCorpus mc = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);

    auto obj = nlohmann::json::parse(mask::ratio_report_json(mc));
    REQUIRE(obj.is_object());
    CHECK(obj.size() == 5);
    CHECK(obj.at("gamma").get<double>() == 0.5);
    CHECK(obj.at("sentence_ratio").get<double>() == doctest::Approx(mc.sentence_mask_ratio));
    CHECK(obj.at("token_ratio").get<double>() == doctest::Approx(mc.token_mask_ratio));
    CHECK(obj.at("n_sentences").get<std::size_t>() == mc.n_sentences);
    CHECK(obj.at("n_tokens").get<std::size_t>() == mc.n_target_tokens);
}

TEST_CASE("output files stay line-aligned with the corpus") {
    bpe::Tokenizer tok = fixture_tokenizer();
    pos::LexiconTagger tagger = pos::LexiconTagger::english();
    clf::Model m = always_confident_model(fixture_config(tok));
    mask::MaskPolicy policy;
    policy.gamma = 0.5;
    mask::MaskedCorpus mc = mask::mask_corpus(m, fixture_pairs(), tok, tagger, policy);

    const auto dir = temp_dir();
    const auto masked_path = (dir / "out.tgt.masked").string();
    const auto preview_path = (dir / "out.tgt.preview").string();
    const auto json_path = (dir / "ratios.json").string();
    mask::write_masked_targets(masked_path, mc);
    mask::write_previews(preview_path, mc);
    mask::write_ratio_json(json_path, mc);

    auto masked_lines = io::read_lines(masked_path);
    auto preview_lines = io::read_lines(preview_path);
    REQUIRE(masked_lines.size() == fixture_sentences().size());
    REQUIRE(preview_lines.size() == fixture_sentences().size());
    for (std::size_t i = 0; i < masked_lines.size(); ++i) {
        CHECK(masked_lines[i] == mc.pairs[i].target);
        CHECK(preview_lines[i] == mc.previews[i]);
        CHECK(masked_lines[i].find("<mask>") != std::string::npos);
        CHECK(preview_lines[i].find("<mask>") != std::string::npos);
    }
    CHECK_NOTHROW(nlohmann::json::parse(io::read_file(json_path)));
    for (const auto& p : {masked_path, preview_path, json_path})
        std::filesystem::remove(p);
}

} // TEST_SUITE
