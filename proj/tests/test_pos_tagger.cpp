#include "fluencyforge/pos_tagger.hpp"

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/errors.hpp"
#include "fluencyforge/rng.hpp"

#include <doctest.h>

#include <map>
#include <string>

using namespace fluencyforge;
using pos::LexiconTagger;

TEST_SUITE("pos_tagger") {

TEST_CASE("closed-class, punctuation, and suffix classification") {
    LexiconTagger t = LexiconTagger::english();

    auto check = [&](const char* word, WordClass cls, PosTag tag) {
        CAPTURE(word);
        TokenAnnotation ann = t.classify_token(word);
        CHECK(ann.word_class == cls);
        CHECK(ann.pos == tag);
    };

    check("the", WordClass::Function, PosTag::Det);
    check("The", WordClass::Function, PosTag::Det); // case-insensitive
    check("THE", WordClass::Function, PosTag::Det);
    check("of", WordClass::Function, PosTag::Prep);
    check("and", WordClass::Function, PosTag::Conj);
    check("they", WordClass::Function, PosTag::Pron);
    check("is", WordClass::Function, PosTag::Aux);
    check("not", WordClass::Function, PosTag::Part);
    check("there", WordClass::Function, PosTag::OtherFunc);
    check("five", WordClass::Function, PosTag::Num);

    check("–", WordClass::Function, PosTag::Punct); // – en dash
    check("«", WordClass::Function, PosTag::Punct); // «
    check("»", WordClass::Function, PosTag::Punct); // »
    check(",", WordClass::Function, PosTag::Punct);
    check("...", WordClass::Function, PosTag::Punct);

    check("5", WordClass::Function, PosTag::Num);
    check("3.5", WordClass::Function, PosTag::Num);
    check("1,000", WordClass::Function, PosTag::Num);
    check("2020/21", WordClass::Function, PosTag::Num);
    check("50%", WordClass::Function, PosTag::Num);

    check("running", WordClass::Content, PosTag::Verb);
    check("walked", WordClass::Content, PosTag::Verb);
    check("quickly", WordClass::Content, PosTag::Adv);
    check("lowest", WordClass::Content, PosTag::Adj);
    check("beautiful", WordClass::Content, PosTag::Adj);
    check("kindness", WordClass::Content, PosTag::Noun);
    check("stories", WordClass::Content, PosTag::Noun);
    check("reader", WordClass::Content, PosTag::Noun);

    check("dog", WordClass::Content, PosTag::Noun);  // default
    check("orem", WordClass::Content, PosTag::Noun); // unknown default
}

TEST_CASE("unknown words are always content") {
    LexiconTagger t = LexiconTagger::english();
    rng::Engine eng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::string w;
        std::size_t len = 1 + rng::below(eng, 10);
        for (std::size_t i = 0; i < len; ++i)
            w += static_cast<char>('a' + rng::below(eng, 26));
        CAPTURE(w);
        TokenAnnotation ann = t.classify_token(w);
        // Closed-class hits are FUNCTION; everything else must be CONTENT.
        if (ann.word_class == WordClass::Function)
            CHECK(pos::word_class_of(ann.pos) == WordClass::Function);
        else
            CHECK(ann.word_class == WordClass::Content);
        CHECK(ann.word_class != WordClass::Symbol);
    }
}

TEST_CASE("tag_sequence shares one tag across a word's subwords") {
    bpe::Tokenizer tok = bpe::Tokenizer::learn({"low lower lows low lower lows"}, 20);
    LexiconTagger t = LexiconTagger::english();
    TokenSequence seq = tok.encode("lower");
    REQUIRE(seq.size() >= 2); // forced split at this vocab size
    t.tag_sequence(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq.flags[i].word_class == seq.flags[0].word_class);
        CHECK(seq.flags[i].pos == seq.flags[0].pos);
    }
    CHECK(seq.content(0));
}

TEST_CASE("reserved tokens are flagged SYMBOL, words around them normally") {
    bpe::Tokenizer tok =
        bpe::Tokenizer::learn({"the cat sat", "the cat ran", "a cat the cats"}, 60);
    LexiconTagger t = LexiconTagger::english();
    TokenSequence seq = tok.encode("[CLS] the cat [SEP]");
    t.tag_sequence(seq);
    REQUIRE(seq.size() == 4);
    CHECK(seq.flags[0].word_class == WordClass::Symbol);
    CHECK(seq.flags[1].word_class == WordClass::Function);
    CHECK(seq.flags[1].pos == PosTag::Det);
    CHECK(seq.flags[2].word_class == WordClass::Content);
    CHECK(seq.flags[3].word_class == WordClass::Symbol);

    TokenSequence masked = tok.encode("the <mask> sat");
    t.tag_sequence(masked);
    CHECK(masked.flags[1].word_class == WordClass::Symbol);
}

TEST_CASE("an all-function sentence has zero content flags") {
    bpe::Tokenizer tok = bpe::Tokenizer::learn({"of the and of the and"}, 40);
    LexiconTagger t = LexiconTagger::english();
    TokenSequence seq = tok.encode("of the and");
    t.tag_sequence(seq);
    for (std::size_t i = 0; i < seq.size(); ++i)
        CHECK_FALSE(seq.content(i));
}

TEST_CASE("every subword gets exactly one of the three classes") {
    bpe::Tokenizer tok = bpe::Tokenizer::learn(
        {"the quick brown fox jumps over the lazy dog", "a dog barks loudly at night 42 times"},
        70);
    LexiconTagger t = LexiconTagger::english();
    TokenSequence seq = tok.encode("[CLS] the quick dog barks 42 times <mask> [SEP]");
    t.tag_sequence(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        int classes = (seq.content(i) ? 1 : 0) + (seq.function(i) ? 1 : 0) + (seq.symbol(i) ? 1 : 0);
        CHECK(classes == 1);
        CHECK(pos::word_class_of(seq.flags[i].pos) == seq.flags[i].word_class);
    }
}

TEST_CASE("custom tagger files load and validate") {
    LexiconTagger t = LexiconTagger::from_text("bork\tDET\n# comment\nzap\tAUX\n",
                                               "oo\tVERB\n", "lex.mem", "suf.mem");
    CHECK(t.classify_token("bork").pos == PosTag::Det);
    CHECK(t.classify_token("ZAP").pos == PosTag::Aux);
    CHECK(t.classify_token("kazoo").pos == PosTag::Verb);
    CHECK(t.classify_token("kazoo").word_class == WordClass::Content);
    // Suffix match requires the word to be strictly longer than the suffix.
    CHECK(t.classify_token("oo").pos == PosTag::Noun);

    CHECK_THROWS_AS(LexiconTagger::from_text("x\tWRONG\n", "", "l", "s"), DataError);
    CHECK_THROWS_AS(LexiconTagger::from_text("x DET\n", "", "l", "s"), DataError);
    CHECK_THROWS_AS(LexiconTagger::from_text("x\tNOUN\n", "", "l", "s"), DataError); // content in lexicon
    CHECK_THROWS_AS(LexiconTagger::from_text("", "ing\tDET\n", "l", "s"), DataError); // function in suffixes
}

} // TEST_SUITE
