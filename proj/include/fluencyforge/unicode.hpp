#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fluencyforge::unicode {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one UTF-8 code point starting at s[pos]. Advances pos past the
// sequence. Returns kReplacement (and advances by one byte) on malformed
// input; use validate() when malformed bytes must be rejected instead.
char32_t decode_next(std::string_view s, std::size_t& pos);

// Byte offset of the first malformed UTF-8 sequence, or npos if valid.
std::size_t find_invalid(std::string_view s);

std::string encode(char32_t cp);
void append(std::string& out, char32_t cp);

// Splits into one string per code point (used as initial BPE symbols).
std::vector<std::string> codepoints(std::string_view s);

std::size_t codepoint_count(std::string_view s);

bool is_space(char32_t cp);

// Punctuation or symbol character in the sense of the word tagger: ASCII
// punctuation plus the common non-ASCII marks (general punctuation block,
// guillemets, section signs, currency, dashes and curly quotes).
bool is_punct_or_symbol(char32_t cp);

bool is_cyrillic(char32_t cp);

// Collapses every whitespace run to a single space and trims the ends.
std::string normalize_whitespace(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

} // namespace fluencyforge::unicode
