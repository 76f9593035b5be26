#include "fluencyforge/ngram.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/unicode.hpp"

#include <algorithm>
#include <cstdio>

namespace fluencyforge::ngram {

namespace {

std::int64_t sum_counts(const std::map<std::string, std::int64_t>& per_corpus) {
    std::int64_t total = 0;
    for (const auto& [corpus_id, count] : per_corpus)
        total += count;
    return total;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

std::vector<TaggedWord> tag_words(const std::string& sentence, const pos::LexiconTagger& tagger) {
    std::vector<TaggedWord> out;
    for (std::string& word : unicode::split_words(unicode::normalize_whitespace(sentence))) {
        TaggedWord tw;
        tw.ann = tagger.classify_token(word);
        tw.surface = std::move(word);
        out.push_back(std::move(tw));
    }
    return out;
}

std::vector<std::string> abstract_sequence(const std::vector<TaggedWord>& words) {
    std::vector<std::string> out;
    out.reserve(words.size());
    for (const TaggedWord& w : words) {
        if (w.ann.word_class == WordClass::Content)
            out.emplace_back(to_string(w.ann.pos));
        else
            out.push_back(w.surface);
    }
    return out;
}

std::vector<std::string> abstract_sentence(const std::string& sentence,
                                           const pos::LexiconTagger& tagger) {
    return abstract_sequence(tag_words(sentence, tagger));
}

std::string join_pattern(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0)
            out += ' ';
        out += items[i];
    }
    return out;
}

std::vector<std::string> split_pattern(const std::string& pattern) {
    return unicode::split_words(pattern);
}

std::int64_t NgramCounts::pooled_total() const {
    std::int64_t total = 0;
    for (const auto& [corpus_id, t] : corpus_totals)
        total += t;
    return total;
}

std::int64_t NgramCounts::pooled_count(const std::string& pattern) const {
    auto it = counts.find(pattern);
    return it == counts.end() ? 0 : sum_counts(it->second);
}

std::int64_t NgramCounts::corpus_count(const std::string& pattern,
                                       const std::string& corpus_id) const {
    auto it = counts.find(pattern);
    if (it == counts.end())
        return 0;
    auto cit = it->second.find(corpus_id);
    return cit == it->second.end() ? 0 : cit->second;
}

NgramCounts count_ngrams(const AbstractCorpora& corpora, int n, std::int64_t min_count) {
    if (n < 1)
        throw UsageError("n-gram order must be at least 1, got " + std::to_string(n));
    if (corpora.empty())
        throw UsageError("n-gram counting needs at least one corpus");

    NgramCounts out;
    out.n = n;
    out.min_count = min_count;

    const std::size_t width = static_cast<std::size_t>(n);
    for (const auto& [corpus_id, sentences] : corpora) {
        std::int64_t& total = out.corpus_totals[corpus_id];
        for (const std::vector<std::string>& items : sentences) {
            if (items.size() < width)
                continue;
            for (std::size_t w = 0; w + width <= items.size(); ++w) {
                std::string key = items[w];
                for (std::size_t j = 1; j < width; ++j) {
                    key += ' ';
                    key += items[w + j];
                }
                ++out.counts[key][corpus_id];
                ++total;
            }
        }
    }

    if (min_count > 1) {
        for (auto it = out.counts.begin(); it != out.counts.end();) {
            if (sum_counts(it->second) < min_count)
                it = out.counts.erase(it);
            else
                ++it;
        }
    }
    return out;
}

std::optional<ImportanceScore> importance(const NgramCounts& counts, const std::string& pattern,
                                          const std::string& corpus_id) {
    auto tit = counts.corpus_totals.find(corpus_id);
    if (tit == counts.corpus_totals.end())
        throw DataError("unknown corpus id '" + corpus_id + "' in importance lookup");
    if (tit->second <= 0)
        throw DataError("corpus '" + corpus_id + "' has no n-grams to normalize by");

    auto pit = counts.counts.find(pattern);
    if (pit == counts.counts.end())
        return std::nullopt;

    const std::int64_t pooled = sum_counts(pit->second);
    if (pooled <= 0)
        return std::nullopt;

    auto cit = pit->second.find(corpus_id);
    const std::int64_t in_corpus = cit == pit->second.end() ? 0 : cit->second;

    ImportanceScore score;
    score.p_given_c = static_cast<double>(in_corpus) / static_cast<double>(tit->second);
    score.prior = static_cast<double>(pooled) / static_cast<double>(counts.pooled_total());
    score.importance = score.p_given_c / score.prior;
    return score;
}

std::int64_t NgramRecord::pooled_count() const {
    return sum_counts(count_per_corpus);
}

std::int64_t NgramRecord::focus_count(const std::string& corpus_id) const {
    auto it = count_per_corpus.find(corpus_id);
    return it == count_per_corpus.end() ? 0 : it->second;
}

std::vector<NgramRecord> rank_ngrams(const NgramCounts& counts, const std::string& focus_corpus,
                                     std::size_t top_k) {
    std::vector<NgramRecord> records;
    records.reserve(counts.counts.size());
    for (const auto& [pattern, per_corpus] : counts.counts) {
        std::optional<ImportanceScore> score = importance(counts, pattern, focus_corpus);
        if (!score)
            continue;
        NgramRecord rec;
        rec.pattern = split_pattern(pattern);
        rec.n = counts.n;
        rec.count_per_corpus = per_corpus;
        rec.p_given_c = score->p_given_c;
        rec.prior = score->prior;
        rec.importance = score->importance;
        records.push_back(std::move(rec));
    }

    std::stable_sort(records.begin(), records.end(),
                     [](const NgramRecord& a, const NgramRecord& b) {
                         if (a.importance != b.importance)
                             return a.importance > b.importance;
                         const std::int64_t pa = a.pooled_count();
                         const std::int64_t pb = b.pooled_count();
                         if (pa != pb)
                             return pa > pb;
                         return a.pattern < b.pattern;
                     });

    if (top_k > 0 && records.size() > top_k)
        records.resize(top_k);
    return records;
}

std::vector<std::string> target_lines(const std::vector<corpus::ParallelPair>& pairs) {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const corpus::ParallelPair& p : pairs)
        out.push_back(p.target);
    return out;
}

namespace {

// One corpus sentence reduced to word slots: the abstracted item, whether
// the word is a function word, and whether masking replaced every one of
// its subwords.
struct JoinedSentence {
    std::vector<std::string> items;
    std::vector<char> is_function;
    std::vector<char> word_masked;
};

JoinedSentence join_sentence(const std::string& original, const std::string& masked_line,
                             const bpe::Tokenizer& tokenizer, const pos::LexiconTagger& tagger,
                             std::size_t sentence_index) {
    TokenSequence seq = tokenizer.encode(original);
    tagger.tag_sequence(seq);

    const std::vector<std::string> masked_tokens =
        unicode::split_words(unicode::normalize_whitespace(masked_line));
    const std::string where = "sentence " + std::to_string(sentence_index + 1);
    if (masked_tokens.size() != seq.size())
        throw DataError("masked corpus does not align with the original at " + where + ": " +
                        std::to_string(seq.size()) + " tokens expected, " +
                        std::to_string(masked_tokens.size()) + " found");

    const std::string& mask_literal = bpe::Tokenizer::specials()[bpe::Tokenizer::kMaskMt];
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (masked_tokens[i] != seq.surface[i] && masked_tokens[i] != mask_literal)
            throw DataError("masked corpus does not align with the original at " + where +
                            ", token " + std::to_string(i + 1) + ": '" + masked_tokens[i] +
                            "' is neither '" + seq.surface[i] + "' nor the mask token");
    }

    JoinedSentence js;
    for (const auto& span : word_spans(seq)) {
        const TokenAnnotation ann = seq.flags[span.first];
        std::string word = span_text(seq, span);
        if (ann.word_class == WordClass::Content)
            js.items.emplace_back(to_string(ann.pos));
        else
            js.items.push_back(std::move(word));
        js.is_function.push_back(ann.word_class == WordClass::Function ? 1 : 0);

        bool masked = true;
        for (std::size_t i = span.first; i < span.second; ++i)
            masked = masked && masked_tokens[i] == mask_literal && seq.surface[i] != mask_literal;
        js.word_masked.push_back(masked ? 1 : 0);
    }
    return js;
}

std::vector<JoinedSentence> join_corpus(const std::vector<std::string>& original_targets,
                                        const std::vector<std::string>& masked_targets,
                                        const bpe::Tokenizer& tokenizer,
                                        const pos::LexiconTagger& tagger) {
    if (original_targets.size() != masked_targets.size())
        throw DataError("masked corpus does not align with the original: " +
                        std::to_string(original_targets.size()) + " sentences vs " +
                        std::to_string(masked_targets.size()));
    std::vector<JoinedSentence> out;
    out.reserve(original_targets.size());
    for (std::size_t i = 0; i < original_targets.size(); ++i)
        out.push_back(join_sentence(original_targets[i], masked_targets[i], tokenizer, tagger, i));
    return out;
}

// Accumulates the pattern's function-slot tallies over one sentence.
void tally_pattern(const std::vector<std::string>& pattern, const JoinedSentence& js,
                   std::int64_t& masked_slots, std::int64_t& function_slots) {
    if (js.items.size() < pattern.size())
        return;
    for (std::size_t w = 0; w + pattern.size() <= js.items.size(); ++w) {
        bool match = true;
        for (std::size_t j = 0; j < pattern.size() && match; ++j)
            match = js.items[w + j] == pattern[j];
        if (!match)
            continue;
        for (std::size_t j = 0; j < pattern.size(); ++j) {
            if (!js.is_function[w + j])
                continue;
            ++function_slots;
            if (js.word_masked[w + j])
                ++masked_slots;
        }
    }
}

} // namespace

std::optional<double> phrase_mask_ratio(const std::vector<std::string>& pattern,
                                        const std::vector<std::string>& original_targets,
                                        const std::vector<std::string>& masked_targets,
                                        const bpe::Tokenizer& tokenizer,
                                        const pos::LexiconTagger& tagger) {
    if (pattern.empty())
        throw UsageError("phrase pattern must be non-empty");
    std::int64_t masked_slots = 0;
    std::int64_t function_slots = 0;
    for (const JoinedSentence& js :
         join_corpus(original_targets, masked_targets, tokenizer, tagger))
        tally_pattern(pattern, js, masked_slots, function_slots);
    if (function_slots == 0)
        return std::nullopt;
    return static_cast<double>(masked_slots) / static_cast<double>(function_slots);
}

void join_mask_ratios(std::vector<NgramRecord>& records,
                      const std::vector<std::string>& original_targets,
                      const std::vector<std::string>& masked_targets,
                      const bpe::Tokenizer& tokenizer, const pos::LexiconTagger& tagger) {
    const std::vector<JoinedSentence> joined =
        join_corpus(original_targets, masked_targets, tokenizer, tagger);
    for (NgramRecord& rec : records) {
        if (rec.pattern.empty())
            throw UsageError("phrase pattern must be non-empty");
        std::int64_t masked_slots = 0;
        std::int64_t function_slots = 0;
        for (const JoinedSentence& js : joined)
            tally_pattern(rec.pattern, js, masked_slots, function_slots);
        if (function_slots == 0)
            rec.mask_ratio = std::nullopt;
        else
            rec.mask_ratio =
                static_cast<double>(masked_slots) / static_cast<double>(function_slots);
    }
}

std::string to_tsv(const std::vector<NgramRecord>& records, const std::string& focus_corpus) {
    std::string out = "pattern\tn\tcount_C\tcount_pool\timportance\tmask_ratio\n";
    for (const NgramRecord& rec : records) {
        out += join_pattern(rec.pattern);
        out += '\t';
        out += std::to_string(rec.n);
        out += '\t';
        out += std::to_string(rec.focus_count(focus_corpus));
        out += '\t';
        out += std::to_string(rec.pooled_count());
        out += '\t';
        out += format_real(rec.importance);
        out += '\t';
        out += rec.mask_ratio ? format_real(*rec.mask_ratio) : std::string("-");
        out += '\n';
    }
    return out;
}

void write_tsv(const std::string& path, const std::vector<NgramRecord>& records,
               const std::string& focus_corpus) {
    io::write_file_atomic(path, to_tsv(records, focus_corpus));
}

} // namespace fluencyforge::ngram
