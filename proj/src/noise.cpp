#include "fluencyforge/noise.hpp"

#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/pos_tagger.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace fluencyforge::noise {

using nlohmann::json;

std::vector<std::size_t> SaliencyReport::noise_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < noise.size(); ++i)
        if (noise[i])
            out.push_back(i);
    return out;
}

std::vector<bool> candidate_set(const TokenSequence& x) {
    std::vector<bool> out(x.size(), false);
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x.function(i);
    return out;
}

double select_noise(const std::vector<double>& norms, const std::vector<bool>& candidate,
                    std::vector<bool>& noise_out) {
    if (norms.size() != candidate.size())
        throw DataError("saliency selection: " + std::to_string(norms.size()) +
                        " norms vs " + std::to_string(candidate.size()) + " candidate flags");
    noise_out.assign(norms.size(), false);
    double sum = 0.0;
    double best = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < norms.size(); ++i) {
        if (!candidate[i])
            continue;
        sum += norms[i];
        best = count == 0 ? norms[i] : std::max(best, norms[i]);
        ++count;
    }
    if (count == 0)
        return 0.0;
    // The inclusive mean threshold, clamped to the best candidate norm so
    // floating-point summation can never push the mean above every value
    // (e.g. three equal norms whose rounded mean lands a ulp high).
    const double threshold = std::min(sum / static_cast<double>(count), best);
    for (std::size_t i = 0; i < norms.size(); ++i)
        noise_out[i] = candidate[i] && norms[i] >= threshold;
    return threshold;
}

SaliencyReport extract_noise(const clf::Model& model, const TokenSequence& x) {
    SaliencyReport r;
    r.tokens = x.surface;
    r.flags = x.flags;
    r.candidate = candidate_set(x);
    clf::Output out;
    nn::Mat grad = clf::grad_embeddings(model, x, /*mask_content=*/true, &out);
    r.grad_norm.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        r.grad_norm[i] = grad.row(static_cast<Eigen::Index>(i)).norm();
    r.threshold = select_noise(r.grad_norm, r.candidate, r.noise);
    r.likelihood_bilingual = out.likelihood_bilingual;
    return r;
}

namespace {

std::string flag_string(const TokenAnnotation& ann) {
    return std::string(to_string(ann.word_class)) + "/" + to_string(ann.pos);
}

TokenAnnotation parse_flag(const std::string& text, const std::string& where) {
    const std::size_t slash = text.find('/');
    if (slash == std::string::npos)
        throw DataError(where + ": flag '" + text + "' is not of the form CLASS/POS");
    const std::string cls = text.substr(0, slash);
    const std::string tag_text = text.substr(slash + 1);
    auto tag = pos::parse_tag(tag_text);
    if (!tag.has_value())
        throw DataError(where + ": unknown POS tag '" + tag_text + "'");
    TokenAnnotation ann;
    ann.pos = *tag;
    if (cls == "CONTENT")
        ann.word_class = WordClass::Content;
    else if (cls == "FUNCTION")
        ann.word_class = WordClass::Function;
    else if (cls == "SYMBOL")
        ann.word_class = WordClass::Symbol;
    else
        throw DataError(where + ": unknown word class '" + cls + "'");
    return ann;
}

// Rounds through the 6-significant-digit decimal rendering so the emitted
// JSON number is exactly the declared precision.
double round_sig6(double v) {
    return std::strtod(io::format_sig(v, 6).c_str(), nullptr);
}

} // namespace

std::string to_jsonl_line(const SaliencyReport& report) {
    json obj;
    obj["tokens"] = report.tokens;
    json flags = json::array();
    for (const auto& ann : report.flags)
        flags.push_back(flag_string(ann));
    obj["flags"] = std::move(flags);
    json norms = json::array();
    for (double g : report.grad_norm)
        norms.push_back(round_sig6(g));
    obj["grad_norms"] = std::move(norms);
    obj["threshold"] = report.threshold;
    obj["noise_indices"] = report.noise_indices();
    obj["likelihood"] = report.likelihood_bilingual;
    return obj.dump();
}

std::string to_jsonl(const std::vector<SaliencyReport>& reports) {
    std::string out;
    for (const auto& r : reports) {
        out += to_jsonl_line(r);
        out += '\n';
    }
    return out;
}

SaliencyReport parse_jsonl_line(std::string_view line, const std::string& source_name,
                                std::size_t lineno) {
    const std::string where = source_name + ":" + std::to_string(lineno);
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object())
        throw DataError(where + ": expected a JSON object per line");
    for (const char* key : {"tokens", "flags", "grad_norms", "threshold", "noise_indices",
                            "likelihood"}) {
        if (!obj.contains(key))
            throw DataError(where + ": missing field '" + key + "'");
    }

    SaliencyReport r;
    try {
        r.tokens = obj["tokens"].get<std::vector<std::string>>();
        const auto flag_texts = obj["flags"].get<std::vector<std::string>>();
        for (const auto& f : flag_texts)
            r.flags.push_back(parse_flag(f, where));
        r.grad_norm = obj["grad_norms"].get<std::vector<double>>();
        r.threshold = obj["threshold"].get<double>();
        r.likelihood_bilingual = obj["likelihood"].get<double>();
        const auto indices = obj["noise_indices"].get<std::vector<std::size_t>>();
        r.noise.assign(r.tokens.size(), false);
        std::size_t prev = 0;
        bool first = true;
        for (std::size_t idx : indices) {
            if (idx >= r.tokens.size())
                throw DataError(where + ": noise index " + std::to_string(idx) +
                                " out of range for " + std::to_string(r.tokens.size()) +
                                " tokens");
            if (!first && idx <= prev)
                throw DataError(where + ": noise indices must be strictly ascending");
            r.noise[idx] = true;
            prev = idx;
            first = false;
        }
    } catch (const json::exception& e) {
        throw DataError(where + ": malformed field (" + std::string(e.what()) + ")");
    }
    if (r.flags.size() != r.tokens.size() || r.grad_norm.size() != r.tokens.size())
        throw DataError(where + ": tokens, flags, and grad_norms must have equal length");
    r.candidate.assign(r.tokens.size(), false);
    for (std::size_t i = 0; i < r.flags.size(); ++i)
        r.candidate[i] = r.flags[i].word_class == WordClass::Function;
    for (std::size_t i = 0; i < r.noise.size(); ++i)
        if (r.noise[i] && !r.candidate[i])
            throw DataError(where + ": noise index " + std::to_string(i) +
                            " points at a non-FUNCTION position");
    return r;
}

std::vector<SaliencyReport> parse_jsonl(std::string_view text, const std::string& source_name) {
    std::vector<SaliencyReport> out;
    std::size_t lineno = 0;
    for (const std::string& line : io::split_lines(text)) {
        ++lineno;
        if (line.empty())
            continue;
        out.push_back(parse_jsonl_line(line, source_name, lineno));
    }
    return out;
}

void write_jsonl(const std::string& path, const std::vector<SaliencyReport>& reports) {
    io::write_file_atomic(path, to_jsonl(reports));
}

std::vector<SaliencyReport> read_jsonl(const std::string& path) {
    return parse_jsonl(io::read_file(path), path);
}

} // namespace fluencyforge::noise
