#include "fluencyforge/noise.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

using namespace fluencyforge;

namespace {

clf::Config noise_config() {
    clf::Config c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 2;
    c.d_ff = 16;
    c.max_len = 12;
    c.vocab_size = 32;
    return c;
}

TokenSequence make_seq(const std::vector<int>& ids, const std::vector<WordClass>& classes,
                       const std::vector<PosTag>& tags) {
    TokenSequence s;
    for (std::size_t i = 0; i < ids.size(); ++i)
        s.push_back(ids[i], "t" + std::to_string(i), {classes[i], tags[i]});
    return s;
}

// [CLS] the(F) cat(C) runs(C) [SEP] shaped sequence, with ids only.
TokenSequence wrapped_mixed() {
    TokenSequence body = make_seq({10, 20, 21}, {WordClass::Function, WordClass::Content,
                                                 WordClass::Content},
                                  {PosTag::Det, PosTag::Noun, PosTag::Verb});
    return clf::wrap_sequence(body);
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "ff_noise_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("noise") {

TEST_CASE("candidates are exactly the FUNCTION positions") {
    TokenSequence seq = wrapped_mixed();
    auto cand = noise::candidate_set(seq);
    REQUIRE(cand.size() == 5);
    CHECK_FALSE(cand[0]); // [CLS]
    CHECK(cand[1]);       // the
    CHECK_FALSE(cand[2]); // cat
    CHECK_FALSE(cand[3]); // runs
    CHECK_FALSE(cand[4]); // [SEP]

    TokenSequence all_content =
        make_seq({20, 21}, {WordClass::Content, WordClass::Content}, {PosTag::Noun, PosTag::Verb});
    auto none = noise::candidate_set(all_content);
    CHECK(std::none_of(none.begin(), none.end(), [](bool b) { return b; }));

    // "of , and" — every token function-class (preposition, punctuation,
    // conjunction).
    TokenSequence funcs =
        make_seq({10, 11, 12}, {WordClass::Function, WordClass::Function, WordClass::Function},
                 {PosTag::Prep, PosTag::Punct, PosTag::Conj});
    auto all = noise::candidate_set(funcs);
    CHECK(std::all_of(all.begin(), all.end(), [](bool b) { return b; }));
}

TEST_CASE("mean-threshold selection matches hand arithmetic") {
    std::vector<bool> noise_flags;

    // Norms 0.5/1.5/2.5/3.5 → mean 2.0 → the top two selected.
    double thr = noise::select_noise({0.5, 1.5, 2.5, 3.5}, {true, true, true, true}, noise_flags);
    CHECK(thr == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(noise_flags == std::vector<bool>{false, false, true, true});

    // All equal: inclusive comparison keeps every candidate.
    thr = noise::select_noise({0.7, 0.7, 0.7}, {true, true, true}, noise_flags);
    CHECK(thr == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(noise_flags == std::vector<bool>{true, true, true});

    // A single candidate always equals the mean, hence always selected.
    thr = noise::select_noise({0.1, 9.9}, {false, true}, noise_flags);
    CHECK(thr == doctest::Approx(9.9));
    CHECK(noise_flags == std::vector<bool>{false, true});

    // Non-candidates are ignored both in the mean and in the selection,
    // however large their norms.
    thr = noise::select_noise({100.0, 1.0, 2.0, 3.0}, {false, true, true, true}, noise_flags);
    CHECK(thr == doctest::Approx(2.0));
    CHECK(noise_flags == std::vector<bool>{false, false, true, true});

    // No candidates: empty selection, threshold recorded as zero.
    thr = noise::select_noise({5.0, 6.0}, {false, false}, noise_flags);
    CHECK(thr == 0.0);
    CHECK(noise_flags == std::vector<bool>{false, false});

    CHECK_THROWS_AS(noise::select_noise({1.0}, {true, false}, noise_flags), DataError);
}

TEST_CASE("selection invariants hold on random inputs") {
    rng::Engine eng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng::below(eng, 12);
        std::vector<double> norms(n);
        std::vector<bool> cand(n);
        for (std::size_t i = 0; i < n; ++i) {
            norms[i] = rng::uniform01(eng) * 3.0;
            cand[i] = rng::below(eng, 3) != 0;
        }
        std::vector<bool> sel;
        const double thr = noise::select_noise(norms, cand, sel);

        std::size_t n_cand = 0, n_sel = 0;
        long double sum = 0.0L;
        bool all_equal = true;
        double first = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (sel[i])
                CHECK(cand[i]); // noise ⊆ candidate
            if (cand[i]) {
                if (n_cand == 0)
                    first = norms[i];
                all_equal = all_equal && norms[i] == first;
                ++n_cand;
                sum += norms[i];
            }
            n_sel += sel[i] ? 1 : 0;
        }
        if (n_cand == 0) {
            CHECK(thr == 0.0);
            CHECK(n_sel == 0);
        } else {
            CHECK(n_sel >= 1); // non-emptiness: max ≥ mean
            CHECK(n_sel <= n_cand);
            if (n_sel == n_cand)
                CHECK(all_equal); // |F| = |G| only when all norms tie
            const double mean = static_cast<double>(sum / n_cand);
            CHECK(thr == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("extract_noise assembles a coherent report") {
    clf::Model m = clf::init_model(noise_config(), 21);
    TokenSequence seq = wrapped_mixed();
    noise::SaliencyReport r = noise::extract_noise(m, seq);

    REQUIRE(r.size() == seq.size());
    CHECK(r.tokens == seq.surface);
    CHECK(r.candidate == noise::candidate_set(seq));
    for (double g : r.grad_norm) {
        CHECK(std::isfinite(g));
        CHECK(g >= 0.0);
    }
    // Single candidate ("the") → it is the noise set, threshold its norm.
    CHECK(r.noise == std::vector<bool>{false, true, false, false, false});
    CHECK(r.threshold == doctest::Approx(r.grad_norm[1]));
    CHECK(r.likelihood_bilingual > 0.0);
    CHECK(r.likelihood_bilingual < 1.0);
    CHECK(r.likelihood_bilingual ==
          doctest::Approx(clf::predict_likelihood(m, seq, true)).epsilon(1e-15));
    CHECK(r.noise_indices() == std::vector<std::size_t>{1});
}

TEST_CASE("an all-content sentence yields an empty noise set with zero threshold") {
    clf::Model m = clf::init_model(noise_config(), 22);
    TokenSequence body = make_seq({20, 21, 22}, {WordClass::Content, WordClass::Content,
                                                 WordClass::Content},
                                  {PosTag::Noun, PosTag::Verb, PosTag::Noun});
    noise::SaliencyReport r = noise::extract_noise(m, clf::wrap_sequence(body));
    CHECK(r.threshold == 0.0);
    CHECK(r.noise_indices().empty());
    // Gradient norms still exist for every position — only candidacy is
    // empty.
    CHECK(r.grad_norm.size() == 5);
}

TEST_CASE("scaling the bilingual output row scales norms but not the noise set") {
    clf::Model m = clf::init_model(noise_config(), 23);
    TokenSequence body = make_seq(
        {10, 11, 20, 12}, {WordClass::Function, WordClass::Function, WordClass::Content,
                           WordClass::Function},
        {PosTag::Det, PosTag::Prep, PosTag::Noun, PosTag::Conj});
    TokenSequence seq = clf::wrap_sequence(body);

    noise::SaliencyReport base = noise::extract_noise(m, seq);
    clf::Model scaled = m;
    const double k = 3.0;
    scaled.out_proj.W.col(1) *= k;
    noise::SaliencyReport boosted = noise::extract_noise(scaled, seq);

    REQUIRE(boosted.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(boosted.grad_norm[i] == doctest::Approx(k * base.grad_norm[i]).epsilon(1e-12));
    CHECK(boosted.threshold == doctest::Approx(k * base.threshold).epsilon(1e-12));
    CHECK(boosted.noise == base.noise);
}

TEST_CASE("content identity never affects the report") {
    clf::Model m = clf::init_model(noise_config(), 24);
    TokenSequence seq = wrapped_mixed();
    noise::SaliencyReport a = noise::extract_noise(m, seq);

    TokenSequence altered = seq;
    REQUIRE(altered.content(2));
    altered.ids[2] = 29; // different content word
    noise::SaliencyReport b = noise::extract_noise(m, altered);

    CHECK(a.grad_norm == b.grad_norm); // bitwise: content-mask idempotence
    CHECK(a.threshold == b.threshold);
    CHECK(a.noise == b.noise);
    CHECK(a.likelihood_bilingual == b.likelihood_bilingual);
}

TEST_CASE("saliency reports round-trip through JSON lines") {
    clf::Model m = clf::init_model(noise_config(), 25);
    std::vector<noise::SaliencyReport> reports;
    reports.push_back(noise::extract_noise(m, wrapped_mixed()));
    reports.push_back(noise::extract_noise(
        m, clf::wrap_sequence(make_seq(
               {10, 11, 12}, {WordClass::Function, WordClass::Function, WordClass::Function},
               {PosTag::Prep, PosTag::Punct, PosTag::Conj}))));

    const auto path = (temp_dir() / "saliency.jsonl").string();
    noise::write_jsonl(path, reports);
    auto loaded = noise::read_jsonl(path);
    std::filesystem::remove(path);

    REQUIRE(loaded.size() == reports.size());
    for (std::size_t r = 0; r < reports.size(); ++r) {
        CHECK(loaded[r].tokens == reports[r].tokens);
        CHECK(loaded[r].noise == reports[r].noise);
        CHECK(loaded[r].candidate == reports[r].candidate);
        CHECK(loaded[r].threshold == reports[r].threshold);
        CHECK(loaded[r].likelihood_bilingual == reports[r].likelihood_bilingual);
        REQUIRE(loaded[r].flags.size() == reports[r].flags.size());
        for (std::size_t i = 0; i < reports[r].flags.size(); ++i) {
            CHECK(loaded[r].flags[i].word_class == reports[r].flags[i].word_class);
            CHECK(loaded[r].flags[i].pos == reports[r].flags[i].pos);
        }
        // Norms pass through a 6-significant-digit rendering.
        for (std::size_t i = 0; i < reports[r].grad_norm.size(); ++i) {
            const double expect =
                std::strtod(io::format_sig(reports[r].grad_norm[i], 6).c_str(), nullptr);
            CHECK(loaded[r].grad_norm[i] == expect);
        }
    }
}

TEST_CASE("grad norms serialize with six significant digits") {
    noise::SaliencyReport r;
    r.tokens = {"of"};
    r.flags = {{WordClass::Function, PosTag::Prep}};
    r.grad_norm = {0.123456789};
    r.candidate = {true};
    r.noise = {true};
    r.threshold = 0.123456789;
    r.likelihood_bilingual = 0.5;
    const std::string line = noise::to_jsonl_line(r);
    CHECK(line.find("0.123457") != std::string::npos);  // rounded norm
    CHECK(line.find("0.123456789") != std::string::npos); // threshold at full precision
    CHECK(line.find("\"FUNCTION/PREP\"") != std::string::npos);
}

TEST_CASE("malformed saliency lines are rejected with location") {
    auto parse = [](const std::string& text) {
        return noise::parse_jsonl(text, "sal.jsonl");
    };
    CHECK_THROWS_WITH_AS(parse("not json"), doctest::Contains("sal.jsonl:1"), DataError);
    CHECK_THROWS_WITH_AS(parse("[1,2]"), doctest::Contains("expected a JSON object"), DataError);
    CHECK_THROWS_WITH_AS(parse(R"({"tokens": ["a"]})"), doctest::Contains("missing field"),
                         DataError);

    const std::string base =
        R"({"tokens": ["a", "b"], "flags": ["FUNCTION/DET", "CONTENT/NOUN"], )"
        R"("grad_norms": [1.0, 2.0], "threshold": 1.0, "noise_indices": [%], "likelihood": 0.5})";
    auto with_indices = [&base](const std::string& idx) {
        std::string s = base;
        s.replace(s.find('%'), 1, idx);
        return s;
    };
    CHECK_NOTHROW(parse(with_indices("0")));
    CHECK_THROWS_WITH_AS(parse(with_indices("5")), doctest::Contains("out of range"), DataError);
    CHECK_THROWS_WITH_AS(parse(with_indices("1")), doctest::Contains("non-FUNCTION"), DataError);
    CHECK_THROWS_WITH_AS(parse(with_indices("0, 0")), doctest::Contains("strictly ascending"),
                         DataError);

    // Length mismatch between tokens and norms.
    CHECK_THROWS_WITH_AS(
        parse(R"({"tokens": ["a"], "flags": ["FUNCTION/DET"], "grad_norms": [1.0, 2.0], )"
              R"("threshold": 1.0, "noise_indices": [], "likelihood": 0.5})"),
        doctest::Contains("equal length"), DataError);

    // Bad flag spellings.
    CHECK_THROWS_WITH_AS(
        parse(R"({"tokens": ["a"], "flags": ["DET"], "grad_norms": [1.0], )"
              R"("threshold": 1.0, "noise_indices": [], "likelihood": 0.5})"),
        doctest::Contains("CLASS/POS"), DataError);
    CHECK_THROWS_WITH_AS(
        parse(R"({"tokens": ["a"], "flags": ["FUNCTION/XYZ"], "grad_norms": [1.0], )"
              R"("threshold": 1.0, "noise_indices": [], "likelihood": 0.5})"),
        doctest::Contains("unknown POS tag"), DataError);

    // Line numbers advance; blank lines are skipped.
    const std::string two =
        with_indices("0") + "\n\n" + "broken";
    CHECK_THROWS_WITH_AS(parse(two), doctest::Contains("sal.jsonl:3"), DataError);
}

} // TEST_SUITE
