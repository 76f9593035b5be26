#include "fluencyforge/translit.hpp"

#include "fluencyforge/unicode.hpp"

#include <unordered_map>
#include <utility>
#include <vector>

namespace fluencyforge::translit {

namespace {

// ISO 9:1995 system A pairs (Cyrillic, Latin), both cases listed explicitly.
// Only mappings with a single precomposed Latin code point appear; letters
// whose transliteration needs a combining mark (Ґ, Љ, Њ, Џ, Ѳ, ...) pass
// through and are counted as unmapped. Uppercase Ъ/Ь are omitted to keep
// the table injective (see header).
constexpr std::pair<char32_t, char32_t> kIso9Pairs[] = {
    {U'А', U'A'},      {U'а', U'a'},
    {U'Б', U'B'},      {U'б', U'b'},
    {U'В', U'V'},      {U'в', U'v'},
    {U'Г', U'G'},      {U'г', U'g'},
    {U'Д', U'D'},      {U'д', U'd'},
    {U'Е', U'E'},      {U'е', U'e'},
    {U'Ё', U'Ë'}, {U'ё', U'ë'}, // Ë ë
    {U'Ж', U'Ž'}, {U'ж', U'ž'}, // Ž ž
    {U'З', U'Z'},      {U'з', U'z'},
    {U'И', U'I'},      {U'и', U'i'},
    {U'Й', U'J'},      {U'й', U'j'},
    {U'К', U'K'},      {U'к', U'k'},
    {U'Л', U'L'},      {U'л', U'l'},
    {U'М', U'M'},      {U'м', U'm'},
    {U'Н', U'N'},      {U'н', U'n'},
    {U'О', U'O'},      {U'о', U'o'},
    {U'П', U'P'},      {U'п', U'p'},
    {U'Р', U'R'},      {U'р', U'r'},
    {U'С', U'S'},      {U'с', U's'},
    {U'Т', U'T'},      {U'т', U't'},
    {U'У', U'U'},      {U'у', U'u'},
    {U'Ф', U'F'},      {U'ф', U'f'},
    {U'Х', U'H'},      {U'х', U'h'},
    {U'Ц', U'C'},      {U'ц', U'c'},
    {U'Ч', U'Č'}, {U'ч', U'č'}, // Č č
    {U'Ш', U'Š'}, {U'ш', U'š'}, // Š š
    {U'Щ', U'Ŝ'}, {U'щ', U'ŝ'}, // Ŝ ŝ
    {U'ъ', U'ʺ'},                    // ʺ (modifier double prime)
    {U'Ы', U'Y'},      {U'ы', U'y'},
    {U'ь', U'ʹ'},                    // ʹ (modifier prime)
    {U'Э', U'È'}, {U'э', U'è'}, // È è
    {U'Ю', U'Û'}, {U'ю', U'û'}, // Û û
    {U'Я', U'Â'}, {U'я', U'â'}, // Â â
    // Non-Russian Cyrillic with precomposed targets.
    {U'Ђ', U'Đ'}, {U'ђ', U'đ'}, // Đ đ
    {U'Ѓ', U'Ǵ'}, {U'ѓ', U'ǵ'}, // Ǵ ǵ
    {U'Є', U'Ê'}, {U'є', U'ê'}, // Ê ê
    {U'Ѕ', U'Ẑ'}, {U'ѕ', U'ẑ'}, // Ẑ ẑ
    {U'І', U'Ì'}, {U'і', U'ì'}, // Ì ì
    {U'Ї', U'Ï'}, {U'ї', U'ï'}, // Ï ï
    {U'Ћ', U'Ć'}, {U'ћ', U'ć'}, // Ć ć
    {U'Ќ', U'Ḱ'}, {U'ќ', U'ḱ'}, // Ḱ ḱ
    {U'Ў', U'Ŭ'}, {U'ў', U'ŭ'}, // Ŭ ŭ
    {U'Ѣ', U'Ě'}, {U'ѣ', U'ě'}, // Ě ě
    {U'Ѵ', U'Ỳ'}, {U'ѵ', U'ỳ'}, // Ỳ ỳ
};

const std::unordered_map<char32_t, char32_t>& forward_table() {
    static const std::unordered_map<char32_t, char32_t> table = [] {
        std::unordered_map<char32_t, char32_t> m;
        for (auto [cyr, lat] : kIso9Pairs)
            m.emplace(cyr, lat);
        return m;
    }();
    return table;
}

const std::unordered_map<char32_t, char32_t>& inverse_table() {
    static const std::unordered_map<char32_t, char32_t> table = [] {
        std::unordered_map<char32_t, char32_t> m;
        for (auto [cyr, lat] : kIso9Pairs)
            m.emplace(lat, cyr);
        return m;
    }();
    return table;
}

std::string map_codepoints(std::string_view text,
                           const std::unordered_map<char32_t, char32_t>& table,
                           Iso9Stats* stats) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = unicode::decode_next(text, pos);
        auto it = table.find(cp);
        if (it != table.end()) {
            if (stats)
                ++stats->mapped;
            unicode::append(out, it->second);
        } else {
            if (stats && unicode::is_cyrillic(cp))
                ++stats->unmapped_cyrillic;
            unicode::append(out, cp);
        }
    }
    return out;
}

} // namespace

std::string iso9(std::string_view text, Iso9Stats* stats) {
    return map_codepoints(text, forward_table(), stats);
}

std::string iso9_inverse(std::string_view text) {
    return map_codepoints(text, inverse_table(), nullptr);
}

} // namespace fluencyforge::translit
