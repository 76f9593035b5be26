#include "fluencyforge/unicode.hpp"

namespace fluencyforge::unicode {

namespace {

inline bool is_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

// Decodes at pos without advancing; returns length consumed, 0 on error.
std::size_t decode_at(std::string_view s, std::size_t pos, char32_t& cp) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(s.data());
    const std::size_t n = s.size();
    unsigned char b0 = bytes[pos];
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    if ((b0 & 0xE0) == 0xC0) {
        if (pos + 1 >= n || !is_continuation(bytes[pos + 1])) return 0;
        cp = (char32_t(b0 & 0x1F) << 6) | (bytes[pos + 1] & 0x3F);
        return cp >= 0x80 ? 2 : 0; // reject overlong
    }
    if ((b0 & 0xF0) == 0xE0) {
        if (pos + 2 >= n || !is_continuation(bytes[pos + 1]) || !is_continuation(bytes[pos + 2]))
            return 0;
        cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(bytes[pos + 1] & 0x3F) << 6) |
             (bytes[pos + 2] & 0x3F);
        if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
        return 3;
    }
    if ((b0 & 0xF8) == 0xF0) {
        if (pos + 3 >= n || !is_continuation(bytes[pos + 1]) || !is_continuation(bytes[pos + 2]) ||
            !is_continuation(bytes[pos + 3]))
            return 0;
        cp = (char32_t(b0 & 0x07) << 18) | (char32_t(bytes[pos + 1] & 0x3F) << 12) |
             (char32_t(bytes[pos + 2] & 0x3F) << 6) | (bytes[pos + 3] & 0x3F);
        if (cp < 0x10000 || cp > 0x10FFFF) return 0;
        return 4;
    }
    return 0;
}

} // namespace

char32_t decode_next(std::string_view s, std::size_t& pos) {
    char32_t cp = kReplacement;
    std::size_t len = decode_at(s, pos, cp);
    pos += len == 0 ? 1 : len;
    return len == 0 ? kReplacement : cp;
}

std::size_t find_invalid(std::string_view s) {
    std::size_t pos = 0;
    while (pos < s.size()) {
        char32_t cp;
        std::size_t len = decode_at(s, pos, cp);
        if (len == 0) return pos;
        pos += len;
    }
    return std::string_view::npos;
}

std::string encode(char32_t cp) {
    std::string out;
    append(out, cp);
    return out;
}

void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(char(cp));
    } else if (cp < 0x800) {
        out.push_back(char(0xC0 | (cp >> 6)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(char(0xE0 | (cp >> 12)));
        out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(char(0xF0 | (cp >> 18)));
        out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(char(0x80 | (cp & 0x3F)));
    }
}

std::vector<std::string> codepoints(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t start = pos;
        decode_next(s, pos);
        out.emplace_back(s.substr(start, pos - start));
    }
    return out;
}

std::size_t codepoint_count(std::string_view s) {
    std::size_t pos = 0, n = 0;
    while (pos < s.size()) {
        decode_next(s, pos);
        ++n;
    }
    return n;
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\r' || cp == U'\n' || cp == U'\f' ||
           cp == U'\v' || cp == 0x00A0 || cp == 0x2028 || cp == 0x2029;
}

bool is_punct_or_symbol(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    if (cp == 0x00AB || cp == 0x00BB) return true;               // guillemets
    if (cp >= 0x00A1 && cp <= 0x00BF) return true;               // Latin-1 punctuation/signs
    if (cp >= 0x2000 && cp <= 0x206F) return true;               // general punctuation (dashes, quotes)
    if (cp >= 0x20A0 && cp <= 0x20CF) return true;               // currency symbols
    if (cp == 0x2212 || cp == 0x00D7 || cp == 0x00F7) return true;
    return false;
}

bool is_cyrillic(char32_t cp) {
    return (cp >= 0x0400 && cp <= 0x04FF) || (cp >= 0x0500 && cp <= 0x052F) ||
           (cp >= 0x2DE0 && cp <= 0x2DFF) || (cp >= 0xA640 && cp <= 0xA69F);
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t start = pos;
        char32_t cp = decode_next(s, pos);
        if (is_space(cp)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.append(s.substr(start, pos - start));
        }
    }
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::string cur;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t start = pos;
        char32_t cp = decode_next(s, pos);
        if (is_space(cp)) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.append(s.substr(start, pos - start));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

} // namespace fluencyforge::unicode
