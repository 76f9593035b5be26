#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fluencyforge::translit {

struct Iso9Stats {
    std::size_t mapped = 0;            // Cyrillic code points replaced
    std::size_t unmapped_cyrillic = 0; // Cyrillic code points passed through
};

// ISO 9:1995 (system A) transliteration of Cyrillic to Latin, one code point
// to one code point. Non-Cyrillic input passes through unchanged. Cyrillic
// code points outside the table pass through and are counted in
// `stats->unmapped_cyrillic` so callers can warn.
//
// The table is restricted to mappings whose Latin side is a single
// precomposed code point, and is injective: uppercase Ъ/Ь are left unmapped
// because the standard sends both cases to the caseless modifier letters
// U+02BA/U+02B9, which would make the hard/soft signs unrecoverable.
std::string iso9(std::string_view text, Iso9Stats* stats = nullptr);

// Inverse of the iso9 table (Latin targets back to Cyrillic); characters
// outside the table pass through. iso9_inverse(iso9(s)) == s whenever s
// contains no Latin characters that collide with table targets — in
// particular for all Cyrillic-only input.
std::string iso9_inverse(std::string_view text);

} // namespace fluencyforge::translit
