#include "fluencyforge/corpus_io.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/rng.hpp"
#include "fluencyforge/unicode.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace fluencyforge::corpus {

const char* to_string(Origin o) {
    switch (o) {
    case Origin::Monolingual: return "monolingual";
    case Origin::BilingualTarget: return "bilingual-target";
    case Origin::BilingualSource: return "bilingual-source";
    case Origin::HumanTest: return "human-test";
    }
    return "?";
}

const char* to_string(PairLabel l) {
    switch (l) {
    case PairLabel::Mono: return "MONO";
    case PairLabel::Bilingual: return "BILINGUAL";
    }
    return "?";
}

namespace {

void require_utf8(const std::string& line, const std::string& source_name, std::size_t line_no) {
    std::size_t bad = unicode::find_invalid(line);
    if (bad != std::string::npos)
        throw DataError("invalid UTF-8 at " + source_name + ":" + std::to_string(line_no) +
                        " (byte offset " + std::to_string(bad) + ")");
}

} // namespace

RawCorpus corpus_from_lines(const std::vector<std::string>& lines, Origin origin,
                            const std::string& source_name, LoadReport* report) {
    RawCorpus out;
    out.origin = origin;
    out.sentences.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        require_utf8(lines[i], source_name, i + 1);
        std::string norm = unicode::normalize_whitespace(lines[i]);
        if (norm.empty()) {
            if (report)
                ++report->dropped_blank;
            continue;
        }
        out.sentences.push_back(std::move(norm));
    }
    if (report)
        report->kept = out.sentences.size();
    return out;
}

RawCorpus load_corpus(const std::string& path, Origin origin, LoadReport* report) {
    return corpus_from_lines(io::read_lines(path), origin, path, report);
}

std::vector<ParallelPair> load_parallel(const std::string& src_path, const std::string& tgt_path,
                                        ParallelLoadReport* report) {
    std::vector<std::string> src_lines = io::read_lines(src_path);
    std::vector<std::string> tgt_lines = io::read_lines(tgt_path);
    if (src_lines.size() != tgt_lines.size())
        throw DataError("parallel corpus line counts differ: " + src_path + " has " +
                        std::to_string(src_lines.size()) + " lines, " + tgt_path + " has " +
                        std::to_string(tgt_lines.size()));
    std::vector<ParallelPair> pairs;
    pairs.reserve(src_lines.size());
    for (std::size_t i = 0; i < src_lines.size(); ++i) {
        require_utf8(src_lines[i], src_path, i + 1);
        require_utf8(tgt_lines[i], tgt_path, i + 1);
        std::string src = unicode::normalize_whitespace(src_lines[i]);
        std::string tgt = unicode::normalize_whitespace(tgt_lines[i]);
        if (src.empty() || tgt.empty()) {
            if (report)
                ++report->dropped_incomplete;
            continue;
        }
        pairs.push_back({std::move(src), std::move(tgt)});
    }
    if (report)
        report->kept = pairs.size();
    return pairs;
}

RawCorpus sample_length_matched(const RawCorpus& mono, const RawCorpus& reference,
                                const TokenLengthFn& token_length, std::uint64_t seed,
                                SampleReport* report) {
    if (mono.empty())
        throw DataError("monolingual corpus is empty; nothing to sample from");
    if (mono.size() < reference.size())
        throw DataError("monolingual corpus exhausted: " + std::to_string(mono.size()) +
                        " sentences available, " + std::to_string(reference.size()) + " needed");

    // Bucket unused mono sentence indices by token length; shuffled buckets
    // make back()/pop_back() a uniform draw without replacement.
    std::map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < mono.size(); ++i)
        buckets[token_length(mono.sentences[i])].push_back(i);
    rng::Engine eng(seed);
    for (auto& [len, idxs] : buckets)
        rng::shuffle(idxs, eng);

    RawCorpus out;
    out.origin = Origin::Monolingual;
    out.sentences.reserve(reference.size());
    std::size_t n_exact = 0;
    for (const std::string& ref_sentence : reference.sentences) {
        std::size_t want = token_length(ref_sentence);
        auto it = buckets.find(want);
        if (it != buckets.end()) {
            ++n_exact;
        } else {
            // Nearest available length; on a distance tie take the shorter.
            auto above = buckets.lower_bound(want);
            if (above == buckets.end()) {
                it = std::prev(above);
            } else if (above == buckets.begin()) {
                it = above;
            } else {
                auto below_it = std::prev(above);
                std::size_t d_below = want - below_it->first;
                std::size_t d_above = above->first - want;
                it = (d_below <= d_above) ? below_it : above;
            }
        }
        out.sentences.push_back(mono.sentences[it->second.back()]);
        it->second.pop_back();
        if (it->second.empty())
            buckets.erase(it);
    }
    if (report) {
        report->n_total = reference.size();
        report->n_exact = n_exact;
        report->exact_match_rate =
            report->n_total == 0 ? 1.0
                                 : static_cast<double>(n_exact) / static_cast<double>(report->n_total);
    }
    return out;
}

ClassificationSplits build_classification_dataset(const RawCorpus& bilingual_targets,
                                                  const RawCorpus& mono_sampled,
                                                  std::size_t dev_n, std::size_t test_n,
                                                  std::uint64_t seed) {
    if (bilingual_targets.size() != mono_sampled.size())
        throw DataError("classification classes are unbalanced: " +
                        std::to_string(bilingual_targets.size()) + " bilingual vs " +
                        std::to_string(mono_sampled.size()) + " monolingual sentences");
    std::size_t n = bilingual_targets.size();
    if (dev_n + test_n >= n)
        throw DataError("insufficient sentences for requested split sizes: need more than " +
                        std::to_string(dev_n + test_n) + " per class, have " + std::to_string(n));

    rng::Engine eng(seed);
    std::vector<std::size_t> bi_idx(n), mo_idx(n);
    std::iota(bi_idx.begin(), bi_idx.end(), std::size_t{0});
    std::iota(mo_idx.begin(), mo_idx.end(), std::size_t{0});
    rng::shuffle(bi_idx, eng);
    rng::shuffle(mo_idx, eng);

    auto take = [&](std::size_t begin, std::size_t count) {
        std::vector<LabeledPair> split;
        split.reserve(2 * count);
        for (std::size_t k = begin; k < begin + count; ++k)
            split.push_back({bilingual_targets.sentences[bi_idx[k]], PairLabel::Bilingual});
        for (std::size_t k = begin; k < begin + count; ++k)
            split.push_back({mono_sampled.sentences[mo_idx[k]], PairLabel::Mono});
        rng::shuffle(split, eng);
        return split;
    };

    ClassificationSplits splits;
    splits.dev = take(0, dev_n);
    splits.test = take(dev_n, test_n);
    splits.train = take(dev_n + test_n, n - dev_n - test_n);
    return splits;
}

std::vector<ParallelPair> concat_backtranslation(const std::vector<ParallelPair>& original,
                                                 const std::vector<ParallelPair>& synthetic) {
    std::vector<ParallelPair> out;
    out.reserve(original.size() + synthetic.size());
    out.insert(out.end(), original.begin(), original.end());
    out.insert(out.end(), synthetic.begin(), synthetic.end());
    return out;
}

std::string to_tsv(const std::vector<LabeledPair>& pairs) {
    std::string out;
    for (const LabeledPair& p : pairs) {
        out += to_string(p.label);
        out += '\t';
        out += p.text;
        out += '\n';
    }
    return out;
}

std::vector<LabeledPair> parse_tsv(std::string_view tsv, const std::string& source_name) {
    std::vector<LabeledPair> pairs;
    std::vector<std::string> lines = io::split_lines(tsv);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty())
            continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("malformed labeled line (no tab) at " + source_name + ":" +
                            std::to_string(i + 1));
        std::string_view label(line.data(), tab);
        PairLabel parsed;
        if (label == "MONO")
            parsed = PairLabel::Mono;
        else if (label == "BILINGUAL")
            parsed = PairLabel::Bilingual;
        else
            throw DataError("unknown label '" + std::string(label) + "' at " + source_name + ":" +
                            std::to_string(i + 1));
        pairs.push_back({line.substr(tab + 1), parsed});
    }
    return pairs;
}

void write_tsv(const std::string& path, const std::vector<LabeledPair>& pairs) {
    io::write_file_atomic(path, to_tsv(pairs));
}

std::vector<LabeledPair> read_tsv(const std::string& path) {
    return parse_tsv(io::read_file(path), path);
}

} // namespace fluencyforge::corpus
