// fluency-forge: command-line front end for the corpus-curation toolkit.
//
// Subcommands cover the whole flow: learn a BPE tokenizer, build origin-
// classification data, train/evaluate the origin classifier, extract
// per-sentence fluency-noise reports, gamma-gated corpus masking, POS-
// abstracted n-gram analytics, MT training and decoding, BLEU scoring,
// ISO 9 transliteration, and an end-to-end `pipeline`.
//
// Conventions:
//   * logs go to stderr; primary results go to stdout
//   * exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
//   * artifact-writing subcommands take --out-dir; every such run writes
//     <subcommand>.resolved.cfg — the effective configuration after merging
//     the --config file and command-line flags — and gives each artifact a
//     <name>.prov sidecar naming the configuration hash, so artifacts are
//     traceable and runs are byte-reproducible
//   * --config FILE supplies values in INI form with [subcommand] sections;
//     command-line flags override file values

#include "fluencyforge/bleu.hpp"
#include "fluencyforge/bpe.hpp"
#include "fluencyforge/classifier.hpp"
#include "fluencyforge/corpus_io.hpp"
#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/mask.hpp"
#include "fluencyforge/mt.hpp"
#include "fluencyforge/ngram.hpp"
#include "fluencyforge/noise.hpp"
#include "fluencyforge/pos_tagger.hpp"
#include "fluencyforge/token_sequence.hpp"
#include "fluencyforge/translit.hpp"
#include "fluencyforge/unicode.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ff = fluencyforge;
namespace fs = std::filesystem;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string fmt6(double v) { return ff::io::format_sig(v, 6); }

// Stable rendering of a gamma value for file names and report lines.
std::string gamma_tag(double g) { return ff::io::format_sig(g, 6); }

// Per-run state shared by every subcommand: the resolved configuration and
// its hash, plus helpers that stamp artifacts with provenance sidecars.
struct RunContext {
    std::string name;     // active subcommand
    std::string resolved; // "[name]" section with every effective value
    std::string hash;     // fnv1a64 of `resolved`, hex
    std::string out_dir;

    // Creates the output directory and records the resolved configuration.
    void open_dir(const std::string& dir) {
        out_dir = dir;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec)
            throw ff::DataError("cannot create output directory '" + dir + "': " + ec.message());
        ff::io::write_file_atomic(path(name + ".resolved.cfg"), resolved);
    }

    std::string path(const std::string& base) const {
        return (fs::path(out_dir) / base).string();
    }

    void sidecar(const std::string& artifact) const {
        ff::io::write_file_atomic(artifact + ".prov", "config_hash=" + hash +
                                                          "\ntool=fluency-forge " + name + "\n");
    }

    void artifact(const std::string& p, std::string_view content) const {
        ff::io::write_file_atomic(p, content);
        sidecar(p);
    }
};

std::ostream& log(const RunContext& ctx) { return std::cerr << "[" << ctx.name << "] "; }

ff::bpe::Tokenizer load_tokenizer(const std::string& merges, const std::string& vocab) {
    return ff::bpe::Tokenizer::load(merges, vocab);
}

// Both files or neither; the built-in English tagger is the default.
ff::pos::LexiconTagger make_tagger(const std::string& lexicon, const std::string& suffix) {
    if (lexicon.empty() != suffix.empty())
        throw ff::UsageError("--lexicon and --suffix must be given together");
    return lexicon.empty() ? ff::pos::LexiconTagger::english()
                           : ff::pos::LexiconTagger::from_files(lexicon, suffix);
}

// Sentences -> wrapped classifier inputs, truncating over-length bodies the
// same way the training-data preparation does.
std::vector<ff::TokenSequence> wrap_for_classifier(const std::vector<std::string>& sentences,
                                                   const ff::bpe::Tokenizer& tok,
                                                   const ff::pos::LexiconTagger& tagger,
                                                   int max_len, std::size_t* truncated) {
    const std::size_t body_budget = static_cast<std::size_t>(max_len) - 2;
    std::vector<ff::TokenSequence> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        ff::TokenSequence seq = tok.encode(s);
        tagger.tag_sequence(seq);
        if (seq.size() > body_budget) {
            seq.ids.resize(body_budget);
            seq.surface.resize(body_budget);
            seq.flags.resize(body_budget);
            ++*truncated;
        }
        out.push_back(ff::clf::wrap_sequence(seq));
    }
    return out;
}

// Deterministic tail split for MT dev sets: `dev_n` == 0 picks
// min(200, max(1, n/10)).
std::size_t mt_dev_count(std::size_t n, int dev_n) {
    if (dev_n < 0)
        throw ff::UsageError("--dev-n must be >= 0");
    std::size_t want = dev_n > 0 ? static_cast<std::size_t>(dev_n)
                                 : std::min<std::size_t>(200, std::max<std::size_t>(1, n / 10));
    if (want >= n)
        throw ff::DataError("corpus of " + std::to_string(n) +
                            " pairs is too small for a dev split of " + std::to_string(want));
    return want;
}

using Runner = std::function<void(RunContext&)>;
using Runners = std::vector<std::pair<CLI::App*, Runner>>;

// ---------------------------------------------------------------------------
// learn-bpe
// ---------------------------------------------------------------------------

void setup_learn_bpe(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand("learn-bpe", "Learn a BPE tokenizer from corpus files");
    sub->configurable();
    struct Opts {
        std::vector<std::string> inputs;
        std::size_t vocab_size = 400;
        std::string out_dir;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->inputs, "corpus files, one sentence per line")->required();
    sub->add_option("--vocab-size", o->vocab_size, "target vocabulary size");
    sub->add_option("--out-dir", o->out_dir, "directory for bpe.merges / bpe.vocab")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        std::vector<std::string> sentences;
        for (const auto& p : o->inputs) {
            ff::corpus::LoadReport rep;
            auto c = ff::corpus::load_corpus(p, ff::corpus::Origin::Monolingual, &rep);
            log(ctx) << p << ": " << rep.kept << " sentences (" << rep.dropped_blank
                     << " blank dropped)\n";
            sentences.insert(sentences.end(), c.sentences.begin(), c.sentences.end());
        }
        auto tok = ff::bpe::Tokenizer::learn(sentences, o->vocab_size);
        ctx.open_dir(o->out_dir);
        tok.save(ctx.path("bpe.merges"), ctx.path("bpe.vocab"));
        ctx.sidecar(ctx.path("bpe.merges"));
        ctx.sidecar(ctx.path("bpe.vocab"));
        std::cout << "vocab_size=" << tok.vocab_size() << "\nmerges=" << tok.merge_count()
                  << "\n";
    });
}

// ---------------------------------------------------------------------------
// build-clf-data
// ---------------------------------------------------------------------------

void setup_build_clf_data(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand(
        "build-clf-data", "Build balanced origin-classification splits (TSV) from two corpora");
    sub->configurable();
    struct Opts {
        std::string bilingual, mono, merges, vocab, out_dir;
        std::size_t dev_n = 100, test_n = 100;
        std::uint64_t seed = 1;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--bilingual", o->bilingual, "target side of the parallel corpus")
        ->required();
    sub->add_option("--mono", o->mono, "human monolingual corpus")->required();
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--dev-n", o->dev_n, "per-class dev sentences");
    sub->add_option("--test-n", o->test_n, "per-class test sentences");
    sub->add_option("--seed", o->seed, "sampling and shuffling seed");
    sub->add_option("--out-dir", o->out_dir, "directory for clf.{train,dev,test}.tsv")
        ->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto bil =
            ff::corpus::load_corpus(o->bilingual, ff::corpus::Origin::BilingualTarget);
        auto mono = ff::corpus::load_corpus(o->mono, ff::corpus::Origin::Monolingual);
        log(ctx) << "bilingual=" << bil.size() << " mono=" << mono.size() << "\n";
        ff::corpus::SampleReport srep;
        auto sampled = ff::corpus::sample_length_matched(
            mono, bil, [&tok](const std::string& s) { return tok.encoded_length(s); }, o->seed,
            &srep);
        auto splits =
            ff::corpus::build_classification_dataset(bil, sampled, o->dev_n, o->test_n, o->seed);
        ctx.open_dir(o->out_dir);
        ff::corpus::write_tsv(ctx.path("clf.train.tsv"), splits.train);
        ctx.sidecar(ctx.path("clf.train.tsv"));
        ff::corpus::write_tsv(ctx.path("clf.dev.tsv"), splits.dev);
        ctx.sidecar(ctx.path("clf.dev.tsv"));
        ff::corpus::write_tsv(ctx.path("clf.test.tsv"), splits.test);
        ctx.sidecar(ctx.path("clf.test.tsv"));
        std::cout << "train=" << splits.train.size() << " dev=" << splits.dev.size()
                  << " test=" << splits.test.size() << "\n"
                  << "length_match_rate=" << fmt6(srep.exact_match_rate) << "\n";
    });
}

// ---------------------------------------------------------------------------
// train-classifier
// ---------------------------------------------------------------------------

struct ClfHyper {
    int d_model = 64, n_heads = 4, n_layers = 2, d_ff = 128, max_len = 64;
};

void add_clf_hyper(CLI::App* sub, ClfHyper& h) {
    sub->add_option("--d-model", h.d_model, "model width");
    sub->add_option("--n-heads", h.n_heads, "attention heads");
    sub->add_option("--n-layers", h.n_layers, "encoder layers");
    sub->add_option("--d-ff", h.d_ff, "feed-forward width");
    sub->add_option("--max-len", h.max_len, "sequence budget incl. wrapper tokens");
}

void setup_train_classifier(CLI::App& app, Runners& runners) {
    auto* sub =
        app.add_subcommand("train-classifier", "Train the corpus-origin classifier on TSV data");
    sub->configurable();
    struct Opts {
        std::string train, dev, test, merges, vocab, lexicon, suffix, out_dir;
        ClfHyper hyper;
        int epochs = 10, batch_size = 16, warmup = 50;
        double lr = 1e-3;
        std::uint64_t seed = 1;
        bool no_content_mask = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--train", o->train, "training TSV (LABEL<TAB>text)")->required();
    sub->add_option("--dev", o->dev, "development TSV")->required();
    sub->add_option("--test", o->test, "optional held-out TSV scored after training");
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    add_clf_hyper(sub, o->hyper);
    sub->add_option("--epochs", o->epochs, "training epochs");
    sub->add_option("--batch-size", o->batch_size, "minibatch size");
    sub->add_option("--lr", o->lr, "learning rate");
    sub->add_option("--warmup", o->warmup, "linear warmup steps");
    sub->add_option("--seed", o->seed, "init and shuffling seed");
    sub->add_flag("--no-content-mask", o->no_content_mask,
                  "train on raw ids instead of content-masked input");
    sub->add_option("--out-dir", o->out_dir, "directory for classifier.ckpt")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto tagger = make_tagger(o->lexicon, o->suffix);
        auto train_pairs = ff::corpus::read_tsv(o->train);
        auto dev_pairs = ff::corpus::read_tsv(o->dev);
        std::size_t truncated = 0;
        auto train_ex =
            ff::clf::prepare_examples(train_pairs, tok, tagger, o->hyper.max_len, &truncated);
        auto dev_ex =
            ff::clf::prepare_examples(dev_pairs, tok, tagger, o->hyper.max_len, &truncated);
        log(ctx) << "train=" << train_ex.size() << " dev=" << dev_ex.size()
                 << " truncated=" << truncated << "\n";
        ff::clf::Config cfg;
        cfg.d_model = o->hyper.d_model;
        cfg.n_heads = o->hyper.n_heads;
        cfg.n_layers = o->hyper.n_layers;
        cfg.d_ff = o->hyper.d_ff;
        cfg.max_len = o->hyper.max_len;
        cfg.vocab_size = static_cast<int>(tok.vocab_size());
        auto model = ff::clf::init_model(cfg, o->seed);
        ff::clf::TrainOptions topt;
        topt.epochs = o->epochs;
        topt.batch_size = o->batch_size;
        topt.lr = o->lr;
        topt.warmup_steps = o->warmup;
        topt.mask_content = !o->no_content_mask;
        topt.seed = o->seed;
        auto trace = ff::clf::train(model, train_ex, dev_ex, topt);
        for (const auto& e : trace.epochs)
            log(ctx) << "epoch=" << e.epoch << " train_loss=" << fmt6(e.train_loss)
                     << " dev_accuracy=" << fmt6(e.dev_accuracy) << "\n";
        ctx.open_dir(o->out_dir);
        ff::clf::save_checkpoint(model, ctx.path("classifier.ckpt"));
        ctx.sidecar(ctx.path("classifier.ckpt"));
        double dev_acc = trace.epochs.empty()
                             ? ff::clf::evaluate_accuracy(model, dev_ex, topt.mask_content)
                             : trace.epochs.back().dev_accuracy;
        std::cout << "dev_accuracy=" << fmt6(dev_acc) << "\n";
        if (!o->test.empty()) {
            auto test_ex = ff::clf::prepare_examples(ff::corpus::read_tsv(o->test), tok, tagger,
                                                     o->hyper.max_len);
            std::cout << "test_accuracy="
                      << fmt6(ff::clf::evaluate_accuracy(model, test_ex, topt.mask_content))
                      << "\n";
        }
    });
}

// ---------------------------------------------------------------------------
// eval-classifier
// ---------------------------------------------------------------------------

void setup_eval_classifier(CLI::App& app, Runners& runners) {
    auto* sub =
        app.add_subcommand("eval-classifier", "Score a classifier checkpoint on a TSV dataset");
    sub->configurable();
    struct Opts {
        std::string data, checkpoint, merges, vocab, lexicon, suffix;
        bool no_content_mask = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "TSV dataset to score")->required();
    sub->add_option("--checkpoint", o->checkpoint, "classifier checkpoint")->required();
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    sub->add_flag("--no-content-mask", o->no_content_mask, "score on raw ids");
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto tagger = make_tagger(o->lexicon, o->suffix);
        auto model = ff::clf::load_checkpoint(o->checkpoint);
        auto pairs = ff::corpus::read_tsv(o->data);
        std::size_t truncated = 0;
        auto ex =
            ff::clf::prepare_examples(pairs, tok, tagger, model.config.max_len, &truncated);
        if (truncated)
            log(ctx) << truncated << " sentences truncated to the model window\n";
        std::cout << "n=" << ex.size() << "\naccuracy="
                  << fmt6(ff::clf::evaluate_accuracy(model, ex, !o->no_content_mask)) << "\n";
    });
}

// ---------------------------------------------------------------------------
// extract-noise
// ---------------------------------------------------------------------------

void setup_extract_noise(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand(
        "extract-noise", "Write per-sentence saliency / fluency-noise reports as JSON lines");
    sub->configurable();
    struct Opts {
        std::string input, checkpoint, merges, vocab, lexicon, suffix, out_dir;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "sentences to analyze, one per line")->required();
    sub->add_option("--checkpoint", o->checkpoint, "classifier checkpoint")->required();
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    sub->add_option("--out-dir", o->out_dir, "directory for noise.jsonl")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto tagger = make_tagger(o->lexicon, o->suffix);
        auto model = ff::clf::load_checkpoint(o->checkpoint);
        auto corp = ff::corpus::load_corpus(o->input, ff::corpus::Origin::BilingualTarget);
        std::size_t truncated = 0;
        auto wrapped =
            wrap_for_classifier(corp.sentences, tok, tagger, model.config.max_len, &truncated);
        if (truncated)
            log(ctx) << truncated << " sentences truncated to the model window\n";
        std::vector<ff::noise::SaliencyReport> reports;
        reports.reserve(wrapped.size());
        for (const auto& seq : wrapped)
            reports.push_back(ff::noise::extract_noise(model, seq));
        ctx.open_dir(o->out_dir);
        ff::noise::write_jsonl(ctx.path("noise.jsonl"), reports);
        ctx.sidecar(ctx.path("noise.jsonl"));
        std::size_t noise_total = 0;
        for (const auto& r : reports)
            noise_total += r.noise_indices().size();
        std::cout << "sentences=" << reports.size() << "\nnoise_tokens=" << noise_total << "\n";
    });
}

// ---------------------------------------------------------------------------
// mask-corpus
// ---------------------------------------------------------------------------

void setup_mask_corpus(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand(
        "mask-corpus", "Mask salient function words on the target side, one file per gamma");
    sub->configurable();
    struct Opts {
        std::string src, tgt, checkpoint, merges, vocab, lexicon, suffix, out_dir;
        std::string prefix = "masked";
        std::vector<double> gammas{0.5, 0.7, 0.8, 0.9, 1.0};
        bool exclude_num = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--src", o->src, "source side of the parallel corpus")->required();
    sub->add_option("--tgt", o->tgt, "target side of the parallel corpus")->required();
    sub->add_option("--checkpoint", o->checkpoint, "classifier checkpoint")->required();
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    sub->add_option("--gammas", o->gammas, "confidence gates, comma-separated")->delimiter(',');
    sub->add_flag("--exclude-num", o->exclude_num, "never mask numeral subwords");
    sub->add_option("--prefix", o->prefix, "artifact base name");
    sub->add_option("--out-dir", o->out_dir, "directory for masked corpora")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        if (o->gammas.empty())
            throw ff::UsageError("--gammas needs at least one value");
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto tagger = make_tagger(o->lexicon, o->suffix);
        auto model = ff::clf::load_checkpoint(o->checkpoint);
        ff::corpus::ParallelLoadReport rep;
        auto pairs = ff::corpus::load_parallel(o->src, o->tgt, &rep);
        log(ctx) << rep.kept << " pairs (" << rep.dropped_incomplete << " incomplete dropped)\n";
        ctx.open_dir(o->out_dir);
        std::vector<std::string> sources, originals;
        for (const auto& p : pairs) {
            sources.push_back(p.source);
            originals.push_back(p.target);
        }
        ctx.artifact(ctx.path(o->prefix + ".src"), join_lines(sources));
        ctx.artifact(ctx.path(o->prefix + ".orig.tgt"), join_lines(originals));
        for (double g : o->gammas) {
            ff::mask::MaskPolicy policy;
            policy.gamma = g;
            policy.exclude_num = o->exclude_num;
            auto mc = ff::mask::mask_corpus(model, pairs, tok, tagger, policy);
            const std::string tag = gamma_tag(g);
            const std::string base = ctx.path(o->prefix + ".gamma" + tag);
            ff::mask::write_masked_targets(base + ".tgt", mc);
            ctx.sidecar(base + ".tgt");
            ff::mask::write_previews(base + ".preview", mc);
            ctx.sidecar(base + ".preview");
            ff::mask::write_ratio_json(base + ".ratio.json", mc);
            ctx.sidecar(base + ".ratio.json");
            auto report = ff::mask::mask_ratio_report(mc);
            if (!mc.skipped.empty())
                log(ctx) << "gamma=" << tag << ": " << mc.skipped.size()
                         << " over-length sentences passed through unmasked\n";
            std::cout << "gamma=" << tag << " masked: " << ff::mask::format_ratios(report)
                      << "\n";
        }
    });
}

// ---------------------------------------------------------------------------
// ngram-stats
// ---------------------------------------------------------------------------

void setup_ngram_stats(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand(
        "ngram-stats", "Rank POS-abstracted n-grams by corpus importance, optionally joined "
                       "with masking decisions");
    sub->configurable();
    struct Opts {
        std::vector<std::string> corpora; // id=path
        std::string focus, lexicon, suffix, out_dir;
        std::string original_tgt, masked_tgt, merges, vocab;
        int n = 2;
        std::int64_t min_count = 2;
        std::size_t top_k = 0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--corpus", o->corpora, "corpus as id=path; repeatable")->required();
    sub->add_option("--focus", o->focus, "corpus id the importance scores target")->required();
    sub->add_option("--n", o->n, "n-gram order");
    sub->add_option("--min-count", o->min_count, "drop patterns rarer than this (pooled)");
    sub->add_option("--top-k", o->top_k, "keep only the top k patterns (0 = all)");
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    sub->add_option("--original-tgt", o->original_tgt,
                    "pre-masking target lines for the mask-ratio join");
    sub->add_option("--masked-tgt", o->masked_tgt, "aligned tokenized masked target lines");
    sub->add_option("--merges", o->merges, "BPE merges file (mask-ratio join)");
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file (mask-ratio join)");
    sub->add_option("--out-dir", o->out_dir, "directory for ngrams.tsv")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tagger = make_tagger(o->lexicon, o->suffix);
        ff::ngram::AbstractCorpora corpora;
        for (const auto& spec : o->corpora) {
            auto eq = spec.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
                throw ff::UsageError("--corpus expects id=path, got '" + spec + "'");
            std::string id = spec.substr(0, eq);
            if (corpora.count(id))
                throw ff::UsageError("duplicate corpus id '" + id + "'");
            auto corp = ff::corpus::load_corpus(spec.substr(eq + 1),
                                                ff::corpus::Origin::Monolingual);
            auto& sink = corpora[id];
            sink.reserve(corp.size());
            for (const auto& s : corp.sentences)
                sink.push_back(ff::ngram::abstract_sentence(s, tagger));
            log(ctx) << id << ": " << sink.size() << " sentences\n";
        }
        if (!corpora.count(o->focus))
            throw ff::UsageError("--focus '" + o->focus + "' is not among the --corpus ids");
        auto counts = ff::ngram::count_ngrams(corpora, o->n, o->min_count);
        auto records = ff::ngram::rank_ngrams(counts, o->focus, o->top_k);
        const bool join = !o->original_tgt.empty() || !o->masked_tgt.empty();
        if (join) {
            if (o->original_tgt.empty() || o->masked_tgt.empty() || o->merges.empty() ||
                o->vocab.empty())
                throw ff::UsageError("the mask-ratio join needs --original-tgt, --masked-tgt, "
                                     "--merges, and --vocab together");
            auto tok = load_tokenizer(o->merges, o->vocab);
            ff::ngram::join_mask_ratios(records, ff::io::read_lines(o->original_tgt),
                                        ff::io::read_lines(o->masked_tgt), tok, tagger);
        }
        ctx.open_dir(o->out_dir);
        ff::ngram::write_tsv(ctx.path("ngrams.tsv"), records, o->focus);
        ctx.sidecar(ctx.path("ngrams.tsv"));
        auto lines = ff::io::split_lines(ff::ngram::to_tsv(records, o->focus));
        const std::size_t show = std::min<std::size_t>(lines.size(), 11); // header + top 10
        for (std::size_t i = 0; i < show; ++i)
            std::cout << lines[i] << "\n";
    });
}

// ---------------------------------------------------------------------------
// train-mt
// ---------------------------------------------------------------------------

struct MtHyper {
    int d_model = 64, n_heads = 4, enc_layers = 2, dec_layers = 2, d_ff = 128, max_len = 64;
    bool tie_output = false;
};

void add_mt_hyper(CLI::App* sub, MtHyper& h, const std::string& prefix = "") {
    sub->add_option("--" + prefix + "d-model", h.d_model, "model width");
    sub->add_option("--" + prefix + "n-heads", h.n_heads, "attention heads");
    sub->add_option("--" + prefix + "enc-layers", h.enc_layers, "encoder layers");
    sub->add_option("--" + prefix + "dec-layers", h.dec_layers, "decoder layers");
    sub->add_option("--" + prefix + "d-ff", h.d_ff, "feed-forward width");
    sub->add_option("--" + prefix + "max-len", h.max_len, "sequence budget per side");
    sub->add_flag("--" + prefix + "tie-output", h.tie_output,
                  "tie the output projection to the embedding table");
}

ff::mt::Config mt_config(const MtHyper& h, int vocab_size) {
    ff::mt::Config cfg;
    cfg.d_model = h.d_model;
    cfg.n_heads = h.n_heads;
    cfg.n_enc_layers = h.enc_layers;
    cfg.n_dec_layers = h.dec_layers;
    cfg.d_ff = h.d_ff;
    cfg.max_len = h.max_len;
    cfg.vocab_size = vocab_size;
    cfg.tie_output = h.tie_output;
    return cfg;
}

void setup_train_mt(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand("train-mt", "Train the translation model on a parallel corpus");
    sub->configurable();
    struct Opts {
        std::string src, tgt, merges, vocab, out_dir;
        bool tokenized_targets = false;
        int dev_n = 0;
        MtHyper hyper;
        int epochs = 10, batch_size = 16, warmup = 50;
        double lr = 1e-3;
        std::uint64_t seed = 1;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--src", o->src, "source side, one sentence per line")->required();
    sub->add_option("--tgt", o->tgt, "target side, aligned")->required();
    sub->add_flag("--tokenized-targets", o->tokenized_targets,
                  "target lines are BPE surfaces with inline <mask> (mask-corpus output)");
    sub->add_option("--dev-n", o->dev_n, "pairs held out from the tail as dev (0 = auto)");
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    add_mt_hyper(sub, o->hyper);
    sub->add_option("--epochs", o->epochs, "training epochs");
    sub->add_option("--batch-size", o->batch_size, "minibatch size");
    sub->add_option("--lr", o->lr, "learning rate");
    sub->add_option("--warmup", o->warmup, "linear warmup steps");
    sub->add_option("--seed", o->seed, "init and shuffling seed");
    sub->add_option("--out-dir", o->out_dir, "directory for mt.ckpt")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        ff::corpus::ParallelLoadReport rep;
        auto pairs = ff::corpus::load_parallel(o->src, o->tgt, &rep);
        log(ctx) << rep.kept << " pairs (" << rep.dropped_incomplete << " incomplete dropped)\n";
        auto cfg = mt_config(o->hyper, static_cast<int>(tok.vocab_size()));
        std::size_t truncated = 0;
        auto all = o->tokenized_targets
                       ? ff::mt::prepare_tokenized_corpus(pairs, tok, cfg, &truncated)
                       : ff::mt::prepare_corpus(pairs, tok, cfg, &truncated);
        if (truncated)
            log(ctx) << truncated << " pairs truncated to the model window\n";
        const std::size_t dev_n = mt_dev_count(all.size(), o->dev_n);
        std::vector<ff::mt::MtExample> dev_set(all.end() - static_cast<std::ptrdiff_t>(dev_n),
                                               all.end());
        all.resize(all.size() - dev_n);
        log(ctx) << "train=" << all.size() << " dev=" << dev_set.size() << "\n";
        auto model = ff::mt::init_model(cfg, o->seed);
        ff::mt::TrainOptions topt;
        topt.epochs = o->epochs;
        topt.batch_size = o->batch_size;
        topt.lr = o->lr;
        topt.warmup_steps = o->warmup;
        topt.seed = o->seed;
        auto trace = ff::mt::train(model, all, dev_set, topt);
        for (const auto& e : trace.epochs)
            log(ctx) << "epoch=" << e.epoch << " train_loss=" << fmt6(e.train_loss)
                     << " dev_loss=" << fmt6(e.dev_loss) << "\n";
        ctx.open_dir(o->out_dir);
        ff::mt::save_checkpoint(model, ctx.path("mt.ckpt"));
        ctx.sidecar(ctx.path("mt.ckpt"));
        double train_loss = trace.epochs.empty() ? ff::mt::evaluate_loss(model, all)
                                                 : trace.epochs.back().train_loss;
        double dev_loss = trace.epochs.empty() ? ff::mt::evaluate_loss(model, dev_set)
                                               : trace.epochs.back().dev_loss;
        std::cout << "train_loss=" << fmt6(train_loss) << "\ndev_loss=" << fmt6(dev_loss)
                  << "\n";
    });
}

// ---------------------------------------------------------------------------
// translate
// ---------------------------------------------------------------------------

void setup_translate(CLI::App& app, Runners& runners) {
    auto* sub =
        app.add_subcommand("translate", "Decode sentences with a trained translation model");
    sub->configurable();
    struct Opts {
        std::string input, checkpoint, merges, vocab, out_dir;
        int beam = 1;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "source sentences, one per line")->required();
    sub->add_option("--checkpoint", o->checkpoint, "translation checkpoint")->required();
    sub->add_option("--merges", o->merges, "BPE merges file")->required();
    sub->add_option("--vocab", o->vocab, "BPE vocabulary file")->required();
    sub->add_option("--beam", o->beam, "beam width (1 = greedy)");
    sub->add_option("--out-dir", o->out_dir, "optional directory for hyp.txt");
    runners.emplace_back(sub, [o](RunContext& ctx) {
        auto tok = load_tokenizer(o->merges, o->vocab);
        auto model = ff::mt::load_checkpoint(o->checkpoint);
        auto lines = ff::io::read_lines(o->input);
        std::vector<std::string> hyps;
        hyps.reserve(lines.size());
        std::size_t truncated = 0, empty = 0;
        for (const auto& line : lines) {
            if (ff::unicode::normalize_whitespace(line).empty()) {
                ++empty;
                hyps.emplace_back();
                continue;
            }
            auto r = ff::mt::translate(model, tok, line, o->beam);
            if (r.truncated)
                ++truncated;
            hyps.push_back(r.text);
        }
        log(ctx) << "translated " << hyps.size() << " lines (" << truncated << " truncated, "
                 << empty << " empty)\n";
        for (const auto& h : hyps)
            std::cout << h << "\n";
        if (!o->out_dir.empty()) {
            ctx.open_dir(o->out_dir);
            ctx.artifact(ctx.path("hyp.txt"), join_lines(hyps));
        }
    });
}

// ---------------------------------------------------------------------------
// score-bleu
// ---------------------------------------------------------------------------

void setup_score_bleu(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand("score-bleu", "Corpus BLEU of a hypothesis file against a "
                                                 "reference file (signature " +
                                                     std::string(ff::bleu::kSignature) + ")");
    sub->configurable();
    struct Opts {
        std::string hyp, ref;
        bool breakdown = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--hyp", o->hyp, "hypothesis file, one sentence per line")->required();
    sub->add_option("--ref", o->ref, "reference file, aligned")->required();
    sub->add_flag("--breakdown", o->breakdown, "also print per-order precisions and lengths");
    runners.emplace_back(sub, [o](RunContext&) {
        auto b = ff::bleu::corpus_bleu(ff::io::read_lines(o->hyp), ff::io::read_lines(o->ref));
        std::cout << ff::bleu::format_score(b.score) << "\n";
        if (o->breakdown) {
            std::cout << "signature=" << ff::bleu::kSignature << "\n"
                      << "bp=" << fmt6(b.brevity_penalty) << "\n"
                      << "lengths=" << b.hyp_len << ":" << b.ref_len << "\n";
            std::cout << "precisions=";
            for (int k = 0; k < ff::bleu::kMaxOrder; ++k)
                std::cout << (k ? "/" : "") << fmt6(b.precision[static_cast<std::size_t>(k)]);
            std::cout << "\nmatched=";
            for (int k = 0; k < ff::bleu::kMaxOrder; ++k)
                std::cout << (k ? "/" : "") << b.matched[static_cast<std::size_t>(k)];
            std::cout << "\ntotal=";
            for (int k = 0; k < ff::bleu::kMaxOrder; ++k)
                std::cout << (k ? "/" : "") << b.total[static_cast<std::size_t>(k)];
            std::cout << "\n";
        }
    });
}

// ---------------------------------------------------------------------------
// transliterate
// ---------------------------------------------------------------------------

void setup_transliterate(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand("transliterate",
                                   "ISO 9 transliteration of Cyrillic text (system A)");
    sub->configurable();
    struct Opts {
        std::string input, out_dir;
        bool inverse = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "text file to transliterate")->required();
    sub->add_flag("--inverse", o->inverse, "map Latin back to Cyrillic");
    sub->add_option("--out-dir", o->out_dir, "optional directory for translit.txt");
    runners.emplace_back(sub, [o](RunContext& ctx) {
        const std::string text = ff::io::read_file(o->input);
        std::string out;
        if (o->inverse) {
            out = ff::translit::iso9_inverse(text);
        } else {
            ff::translit::Iso9Stats stats;
            out = ff::translit::iso9(text, &stats);
            log(ctx) << stats.mapped << " code points mapped, " << stats.unmapped_cyrillic
                     << " Cyrillic passed through\n";
        }
        std::cout << out;
        if (!o->out_dir.empty()) {
            ctx.open_dir(o->out_dir);
            ctx.artifact(ctx.path("translit.txt"), out);
        }
    });
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

void setup_pipeline(CLI::App& app, Runners& runners) {
    auto* sub = app.add_subcommand(
        "pipeline", "End-to-end run: learn BPE, build classification data, train the origin "
                    "classifier, mask the corpus per gamma, rank n-grams, train MT on the "
                    "masked corpus, translate the test set, and score BLEU");
    sub->configurable();
    struct Opts {
        std::string train_src, train_tgt, mono, test_src, test_ref, lexicon, suffix, out_dir;
        std::size_t bpe_vocab_size = 400;
        std::size_t dev_n = 50, test_n = 50;
        ClfHyper clf{32, 4, 1, 64, 48};
        int clf_epochs = 5, clf_batch_size = 16, clf_warmup = 20;
        double clf_lr = 3e-3;
        std::vector<double> gammas{0.5, 0.7, 0.8, 0.9, 1.0};
        double mt_gamma = 0.9;
        bool exclude_num = false;
        int ngram_n = 2;
        std::int64_t min_count = 2;
        std::size_t top_k = 50;
        MtHyper mt{32, 4, 1, 1, 64, 48, false};
        int mt_epochs = 8, mt_batch_size = 16, mt_warmup = 10, mt_dev_n = 0;
        double mt_lr = 1e-2;
        int beam = 1;
        std::uint64_t seed = 1;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--train-src", o->train_src, "training source corpus")->required();
    sub->add_option("--train-tgt", o->train_tgt, "training target corpus")->required();
    sub->add_option("--mono", o->mono, "human monolingual target-language corpus")->required();
    sub->add_option("--test-src", o->test_src, "test source corpus")->required();
    sub->add_option("--test-ref", o->test_ref, "test reference corpus")->required();
    sub->add_option("--lexicon", o->lexicon, "closed-class lexicon file (default: built-in)");
    sub->add_option("--suffix", o->suffix, "suffix-rule file (default: built-in)");
    sub->add_option("--bpe-vocab-size", o->bpe_vocab_size, "BPE target vocabulary size");
    sub->add_option("--dev-n", o->dev_n, "classifier per-class dev sentences");
    sub->add_option("--test-n", o->test_n, "classifier per-class test sentences");
    sub->add_option("--clf-d-model", o->clf.d_model, "classifier width");
    sub->add_option("--clf-n-heads", o->clf.n_heads, "classifier attention heads");
    sub->add_option("--clf-n-layers", o->clf.n_layers, "classifier layers");
    sub->add_option("--clf-d-ff", o->clf.d_ff, "classifier feed-forward width");
    sub->add_option("--clf-max-len", o->clf.max_len, "classifier sequence budget");
    sub->add_option("--clf-epochs", o->clf_epochs, "classifier epochs");
    sub->add_option("--clf-batch-size", o->clf_batch_size, "classifier minibatch size");
    sub->add_option("--clf-lr", o->clf_lr, "classifier learning rate");
    sub->add_option("--clf-warmup", o->clf_warmup, "classifier warmup steps");
    sub->add_option("--gammas", o->gammas, "confidence gates, comma-separated")->delimiter(',');
    sub->add_option("--mt-gamma", o->mt_gamma,
                    "gamma whose masked corpus feeds MT training (must be in --gammas)");
    sub->add_flag("--exclude-num", o->exclude_num, "never mask numeral subwords");
    sub->add_option("--ngram-n", o->ngram_n, "n-gram order");
    sub->add_option("--min-count", o->min_count, "n-gram pooled count floor");
    sub->add_option("--top-k", o->top_k, "n-gram report size (0 = all)");
    add_mt_hyper(sub, o->mt, "mt-");
    sub->add_option("--mt-epochs", o->mt_epochs, "MT epochs");
    sub->add_option("--mt-batch-size", o->mt_batch_size, "MT minibatch size");
    sub->add_option("--mt-lr", o->mt_lr, "MT learning rate");
    sub->add_option("--mt-warmup", o->mt_warmup, "MT warmup steps");
    sub->add_option("--mt-dev-n", o->mt_dev_n, "MT dev pairs from the tail (0 = auto)");
    sub->add_option("--beam", o->beam, "decoding beam width");
    sub->add_option("--seed", o->seed, "global seed");
    sub->add_option("--out-dir", o->out_dir, "directory for all artifacts")->required();
    runners.emplace_back(sub, [o](RunContext& ctx) {
        const bool gamma_listed =
            std::find(o->gammas.begin(), o->gammas.end(), o->mt_gamma) != o->gammas.end();
        if (o->gammas.empty() || !gamma_listed)
            throw ff::UsageError("--mt-gamma must be one of the --gammas values");
        ctx.open_dir(o->out_dir);

        // [1/8] tokenizer over every text the run touches.
        log(ctx) << "1/8 learn-bpe\n";
        ff::corpus::ParallelLoadReport prep;
        auto pairs = ff::corpus::load_parallel(o->train_src, o->train_tgt, &prep);
        if (prep.dropped_incomplete)
            log(ctx) << prep.dropped_incomplete << " incomplete pairs dropped\n";
        auto mono = ff::corpus::load_corpus(o->mono, ff::corpus::Origin::Monolingual);
        std::vector<std::string> learn_corpus;
        learn_corpus.reserve(2 * pairs.size() + mono.size());
        for (const auto& p : pairs) {
            learn_corpus.push_back(p.source);
            learn_corpus.push_back(p.target);
        }
        learn_corpus.insert(learn_corpus.end(), mono.sentences.begin(), mono.sentences.end());
        auto tok = ff::bpe::Tokenizer::learn(learn_corpus, o->bpe_vocab_size);
        tok.save(ctx.path("bpe.merges"), ctx.path("bpe.vocab"));
        ctx.sidecar(ctx.path("bpe.merges"));
        ctx.sidecar(ctx.path("bpe.vocab"));
        log(ctx) << "vocab=" << tok.vocab_size() << " merges=" << tok.merge_count() << "\n";

        // [2/8] balanced classification splits.
        log(ctx) << "2/8 build-clf-data\n";
        auto targets = ff::ngram::target_lines(pairs);
        auto bil = ff::corpus::corpus_from_lines(targets, ff::corpus::Origin::BilingualTarget,
                                                 o->train_tgt);
        ff::corpus::SampleReport srep;
        auto sampled = ff::corpus::sample_length_matched(
            mono, bil, [&tok](const std::string& s) { return tok.encoded_length(s); }, o->seed,
            &srep);
        auto splits = ff::corpus::build_classification_dataset(bil, sampled, o->dev_n,
                                                               o->test_n, o->seed);
        ff::corpus::write_tsv(ctx.path("clf.train.tsv"), splits.train);
        ctx.sidecar(ctx.path("clf.train.tsv"));
        ff::corpus::write_tsv(ctx.path("clf.dev.tsv"), splits.dev);
        ctx.sidecar(ctx.path("clf.dev.tsv"));
        ff::corpus::write_tsv(ctx.path("clf.test.tsv"), splits.test);
        ctx.sidecar(ctx.path("clf.test.tsv"));
        log(ctx) << "train=" << splits.train.size() << " dev=" << splits.dev.size()
                 << " test=" << splits.test.size()
                 << " length_match_rate=" << fmt6(srep.exact_match_rate) << "\n";

        // [3/8] origin classifier.
        log(ctx) << "3/8 train-classifier\n";
        auto tagger = make_tagger(o->lexicon, o->suffix);
        std::size_t clf_truncated = 0;
        auto train_ex = ff::clf::prepare_examples(splits.train, tok, tagger, o->clf.max_len,
                                                  &clf_truncated);
        auto dev_ex =
            ff::clf::prepare_examples(splits.dev, tok, tagger, o->clf.max_len, &clf_truncated);
        auto test_ex =
            ff::clf::prepare_examples(splits.test, tok, tagger, o->clf.max_len, &clf_truncated);
        if (clf_truncated)
            log(ctx) << clf_truncated << " sentences truncated to the classifier window\n";
        ff::clf::Config ccfg;
        ccfg.d_model = o->clf.d_model;
        ccfg.n_heads = o->clf.n_heads;
        ccfg.n_layers = o->clf.n_layers;
        ccfg.d_ff = o->clf.d_ff;
        ccfg.max_len = o->clf.max_len;
        ccfg.vocab_size = static_cast<int>(tok.vocab_size());
        auto clf_model = ff::clf::init_model(ccfg, o->seed);
        ff::clf::TrainOptions copt;
        copt.epochs = o->clf_epochs;
        copt.batch_size = o->clf_batch_size;
        copt.lr = o->clf_lr;
        copt.warmup_steps = o->clf_warmup;
        copt.seed = o->seed;
        auto ctrace = ff::clf::train(clf_model, train_ex, dev_ex, copt);
        for (const auto& e : ctrace.epochs)
            log(ctx) << "epoch=" << e.epoch << " train_loss=" << fmt6(e.train_loss)
                     << " dev_accuracy=" << fmt6(e.dev_accuracy) << "\n";
        ff::clf::save_checkpoint(clf_model, ctx.path("classifier.ckpt"));
        ctx.sidecar(ctx.path("classifier.ckpt"));
        double dev_acc = ctrace.epochs.empty()
                             ? ff::clf::evaluate_accuracy(clf_model, dev_ex, true)
                             : ctrace.epochs.back().dev_accuracy;
        std::cout << "classifier_dev_accuracy=" << fmt6(dev_acc) << "\n"
                  << "classifier_test_accuracy="
                  << fmt6(ff::clf::evaluate_accuracy(clf_model, test_ex, true)) << "\n";

        // [4/8] gamma sweep over the training corpus.
        log(ctx) << "4/8 mask-corpus\n";
        std::vector<std::string> sources;
        for (const auto& p : pairs)
            sources.push_back(p.source);
        ctx.artifact(ctx.path("masked.src"), join_lines(sources));
        ctx.artifact(ctx.path("masked.orig.tgt"), join_lines(targets));
        ff::mask::MaskedCorpus mt_corpus;
        for (double g : o->gammas) {
            ff::mask::MaskPolicy policy;
            policy.gamma = g;
            policy.exclude_num = o->exclude_num;
            auto mc = ff::mask::mask_corpus(clf_model, pairs, tok, tagger, policy);
            const std::string tag = gamma_tag(g);
            const std::string base = ctx.path("masked.gamma" + tag);
            ff::mask::write_masked_targets(base + ".tgt", mc);
            ctx.sidecar(base + ".tgt");
            ff::mask::write_previews(base + ".preview", mc);
            ctx.sidecar(base + ".preview");
            ff::mask::write_ratio_json(base + ".ratio.json", mc);
            ctx.sidecar(base + ".ratio.json");
            std::cout << "gamma=" << tag
                      << " masked: " << ff::mask::format_ratios(ff::mask::mask_ratio_report(mc))
                      << "\n";
            if (g == o->mt_gamma)
                mt_corpus = std::move(mc);
        }

        // [5/8] n-gram importance, joined with the masking actually used.
        log(ctx) << "5/8 ngram-stats\n";
        ff::ngram::AbstractCorpora corpora;
        auto& bil_sink = corpora["bilingual"];
        bil_sink.reserve(targets.size());
        for (const auto& s : targets)
            bil_sink.push_back(ff::ngram::abstract_sentence(s, tagger));
        auto& mono_sink = corpora["mono"];
        mono_sink.reserve(mono.size());
        for (const auto& s : mono.sentences)
            mono_sink.push_back(ff::ngram::abstract_sentence(s, tagger));
        auto counts = ff::ngram::count_ngrams(corpora, o->ngram_n, o->min_count);
        auto records = ff::ngram::rank_ngrams(counts, "bilingual", o->top_k);
        ff::ngram::join_mask_ratios(records, targets, ff::ngram::target_lines(mt_corpus.pairs),
                                    tok, tagger);
        ff::ngram::write_tsv(ctx.path("ngrams.tsv"), records, "bilingual");
        ctx.sidecar(ctx.path("ngrams.tsv"));
        log(ctx) << records.size() << " patterns ranked\n";

        // [6/8] MT training on the masked corpus at --mt-gamma.
        log(ctx) << "6/8 train-mt (gamma=" << gamma_tag(o->mt_gamma) << ")\n";
        auto mcfg = mt_config(o->mt, static_cast<int>(tok.vocab_size()));
        std::size_t mt_truncated = 0;
        auto all = ff::mt::prepare_tokenized_corpus(mt_corpus.pairs, tok, mcfg, &mt_truncated);
        if (mt_truncated)
            log(ctx) << mt_truncated << " pairs truncated to the model window\n";
        const std::size_t dev_n = mt_dev_count(all.size(), o->mt_dev_n);
        std::vector<ff::mt::MtExample> dev_set(all.end() - static_cast<std::ptrdiff_t>(dev_n),
                                               all.end());
        all.resize(all.size() - dev_n);
        log(ctx) << "train=" << all.size() << " dev=" << dev_set.size() << "\n";
        auto mt_model = ff::mt::init_model(mcfg, o->seed);
        ff::mt::TrainOptions mopt;
        mopt.epochs = o->mt_epochs;
        mopt.batch_size = o->mt_batch_size;
        mopt.lr = o->mt_lr;
        mopt.warmup_steps = o->mt_warmup;
        mopt.seed = o->seed;
        auto mtrace = ff::mt::train(mt_model, all, dev_set, mopt);
        for (const auto& e : mtrace.epochs)
            log(ctx) << "epoch=" << e.epoch << " train_loss=" << fmt6(e.train_loss)
                     << " dev_loss=" << fmt6(e.dev_loss) << "\n";
        ff::mt::save_checkpoint(mt_model, ctx.path("mt.ckpt"));
        ctx.sidecar(ctx.path("mt.ckpt"));
        double mt_train_loss = mtrace.epochs.empty() ? ff::mt::evaluate_loss(mt_model, all)
                                                     : mtrace.epochs.back().train_loss;
        double mt_dev_loss = mtrace.epochs.empty() ? ff::mt::evaluate_loss(mt_model, dev_set)
                                                   : mtrace.epochs.back().dev_loss;
        std::cout << "mt_train_loss=" << fmt6(mt_train_loss) << "\n"
                  << "mt_dev_loss=" << fmt6(mt_dev_loss) << "\n";

        // [7/8] decode the test set.
        log(ctx) << "7/8 translate\n";
        auto test_pairs = ff::corpus::load_parallel(o->test_src, o->test_ref);
        std::vector<std::string> hyps, refs;
        hyps.reserve(test_pairs.size());
        std::size_t hyp_truncated = 0;
        for (const auto& p : test_pairs) {
            auto r = ff::mt::translate(mt_model, tok, p.source, o->beam);
            if (r.truncated)
                ++hyp_truncated;
            hyps.push_back(r.text);
            refs.push_back(p.target);
        }
        if (hyp_truncated)
            log(ctx) << hyp_truncated << " decodes hit the length cap\n";
        ctx.artifact(ctx.path("hyp.txt"), join_lines(hyps));

        // [8/8] score.
        log(ctx) << "8/8 score-bleu\n";
        auto b = ff::bleu::corpus_bleu(hyps, refs);
        const std::string bleu_line = ff::bleu::format_score(b.score);
        ctx.artifact(ctx.path("bleu.txt"), bleu_line + "\n");
        std::cout << "bleu=" << bleu_line << "\n";
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fluency-forge: corpus curation for MT — an origin classifier finds "
                 "non-native fluency noise on the target side and gamma-gated masking "
                 "removes it before translation training"};
    app.option_defaults()->always_capture_default(true);
    app.set_config("--config", "",
                   "INI config file with [subcommand] sections; flags override file values");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    Runners runners;
    setup_learn_bpe(app, runners);
    setup_build_clf_data(app, runners);
    setup_train_classifier(app, runners);
    setup_eval_classifier(app, runners);
    setup_extract_noise(app, runners);
    setup_mask_corpus(app, runners);
    setup_ngram_stats(app, runners);
    setup_train_mt(app, runners);
    setup_translate(app, runners);
    setup_score_bleu(app, runners);
    setup_transliterate(app, runners);
    setup_pipeline(app, runners);

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0)
                return app.exit(e); // --help family: text on stdout, exit 0
            std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
            return 1;
        }

        // A subcommand can be triggered both on the command line and from a
        // config-file section; dedupe so each runner fires exactly once.
        std::vector<CLI::App*> active;
        for (CLI::App* s : app.get_subcommands())
            if (std::find(active.begin(), active.end(), s) == active.end())
                active.push_back(s);
        if (active.size() != 1)
            throw ff::UsageError(
                "exactly one subcommand per run; the config file may only address the "
                "subcommand being run");

        RunContext ctx;
        ctx.name = active[0]->get_name();
        ctx.resolved = "[" + ctx.name + "]\n" + active[0]->config_to_str(true, false);
        ctx.hash = ff::io::hex64(ff::io::fnv1a64(ctx.resolved));
        for (auto& [sub, run] : runners) {
            if (sub == active[0]) {
                run(ctx);
                return 0;
            }
        }
        throw ff::UsageError("no runner for subcommand '" + ctx.name + "'");
    } catch (const ff::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ff::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ff::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 70;
    }
}
