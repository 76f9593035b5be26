#include "fluencyforge/pos_tagger.hpp"

#include "fluencyforge/bpe.hpp"
#include "fluencyforge/errors.hpp"
#include "fluencyforge/io_util.hpp"
#include "fluencyforge/unicode.hpp"

namespace fluencyforge::pos {

std::optional<PosTag> parse_tag(std::string_view text) {
    static const std::unordered_map<std::string_view, PosTag> map = {
        {"NOUN", PosTag::Noun},   {"VERB", PosTag::Verb},
        {"ADJ", PosTag::Adj},     {"ADV", PosTag::Adv},
        {"DET", PosTag::Det},     {"PREP", PosTag::Prep},
        {"PRON", PosTag::Pron},   {"CONJ", PosTag::Conj},
        {"AUX", PosTag::Aux},     {"PART", PosTag::Part},
        {"PUNCT", PosTag::Punct}, {"NUM", PosTag::Num},
        {"OTHER-FUNC", PosTag::OtherFunc},
        {"SYM", PosTag::Symbol},
    };
    auto it = map.find(text);
    return it == map.end() ? std::nullopt : std::optional<PosTag>(it->second);
}

WordClass word_class_of(PosTag tag) {
    switch (tag) {
    case PosTag::Noun:
    case PosTag::Verb:
    case PosTag::Adj:
    case PosTag::Adv:
        return WordClass::Content;
    case PosTag::Symbol:
        return WordClass::Symbol;
    default:
        return WordClass::Function;
    }
}

namespace {

// Closed-class English lexicon in the file format, one source for both the
// built-in tagger and the format documentation.
constexpr const char* kEnglishLexicon = R"(# determiners
the	DET
a	DET
an	DET
this	DET
that	DET
these	DET
those	DET
each	DET
every	DET
either	DET
neither	DET
some	DET
any	DET
no	DET
all	DET
both	DET
such	DET
what	DET
which	DET
whose	DET
another	DET
# prepositions
of	PREP
in	PREP
to	PREP
for	PREP
with	PREP
on	PREP
at	PREP
by	PREP
from	PREP
up	PREP
down	PREP
about	PREP
into	PREP
over	PREP
after	PREP
under	PREP
above	PREP
below	PREP
across	PREP
against	PREP
along	PREP
among	PREP
around	PREP
before	PREP
behind	PREP
between	PREP
beyond	PREP
during	PREP
except	PREP
inside	PREP
near	PREP
off	PREP
onto	PREP
out	PREP
outside	PREP
per	PREP
since	PREP
through	PREP
throughout	PREP
toward	PREP
towards	PREP
until	PREP
upon	PREP
via	PREP
within	PREP
without	PREP
despite	PREP
# pronouns
i	PRON
you	PRON
he	PRON
she	PRON
it	PRON
we	PRON
they	PRON
me	PRON
him	PRON
her	PRON
us	PRON
them	PRON
my	PRON
your	PRON
his	PRON
its	PRON
our	PRON
their	PRON
mine	PRON
yours	PRON
hers	PRON
ours	PRON
theirs	PRON
myself	PRON
yourself	PRON
himself	PRON
herself	PRON
itself	PRON
ourselves	PRON
yourselves	PRON
themselves	PRON
who	PRON
whom	PRON
whoever	PRON
someone	PRON
anyone	PRON
everyone	PRON
somebody	PRON
anybody	PRON
everybody	PRON
nobody	PRON
something	PRON
anything	PRON
everything	PRON
nothing	PRON
none	PRON
# conjunctions
and	CONJ
or	CONJ
but	CONJ
nor	CONJ
so	CONJ
yet	CONJ
if	CONJ
because	CONJ
although	CONJ
though	CONJ
while	CONJ
whereas	CONJ
unless	CONJ
whether	CONJ
than	CONJ
as	CONJ
when	CONJ
where	CONJ
why	CONJ
how	CONJ
once	CONJ
# auxiliaries
am	AUX
is	AUX
are	AUX
was	AUX
were	AUX
be	AUX
been	AUX
being	AUX
do	AUX
does	AUX
did	AUX
have	AUX
has	AUX
had	AUX
will	AUX
would	AUX
shall	AUX
should	AUX
can	AUX
could	AUX
may	AUX
might	AUX
must	AUX
ought	AUX
# particles
not	PART
# existential and fillers
there	OTHER-FUNC
etc	OTHER-FUNC
# closed-class number words
zero	NUM
one	NUM
two	NUM
three	NUM
four	NUM
five	NUM
six	NUM
seven	NUM
eight	NUM
nine	NUM
ten	NUM
eleven	NUM
twelve	NUM
twenty	NUM
thirty	NUM
forty	NUM
fifty	NUM
sixty	NUM
seventy	NUM
eighty	NUM
ninety	NUM
hundred	NUM
thousand	NUM
million	NUM
billion	NUM
)";

// Ordered: first match wins, so specific endings precede generic ones.
constexpr const char* kEnglishSuffixes = R"(tion	NOUN
sion	NOUN
ment	NOUN
ness	NOUN
ance	NOUN
ence	NOUN
ship	NOUN
hood	NOUN
ity	NOUN
ism	NOUN
able	ADJ
ible	ADJ
ful	ADJ
less	ADJ
ous	ADJ
ive	ADJ
ize	VERB
ise	VERB
ify	VERB
ing	VERB
ed	VERB
est	ADJ
ly	ADV
ic	ADJ
al	ADJ
ies	NOUN
ist	NOUN
er	NOUN
or	NOUN
s	NOUN
)";

std::string lowercase(std::string_view word) {
    std::string out;
    out.reserve(word.size());
    std::size_t pos = 0;
    while (pos < word.size()) {
        char32_t cp = unicode::decode_next(word, pos);
        if (cp >= U'A' && cp <= U'Z')
            cp += 0x20;
        else if (cp >= 0x0410 && cp <= 0x042F) // А..Я
            cp += 0x20;
        else if (cp == 0x0401) // Ё
            cp = 0x0451;
        unicode::append(out, cp);
    }
    return out;
}

bool all_punct_or_symbol(std::string_view word) {
    std::size_t pos = 0;
    bool any = false;
    while (pos < word.size()) {
        if (!unicode::is_punct_or_symbol(unicode::decode_next(word, pos)))
            return false;
        any = true;
    }
    return any;
}

// Digit-shaped: at least one ASCII digit and nothing but digits and the
// usual numeric separators ("3.5", "1,000", "2020/21", "50%").
bool numeral_shaped(std::string_view word) {
    std::size_t pos = 0;
    bool any_digit = false;
    while (pos < word.size()) {
        char32_t cp = unicode::decode_next(word, pos);
        if (cp >= U'0' && cp <= U'9') {
            any_digit = true;
        } else if (cp != U'.' && cp != U',' && cp != U':' && cp != U'/' && cp != U'-' &&
                   cp != U'%') {
            return false;
        }
    }
    return any_digit;
}

} // namespace

LexiconTagger LexiconTagger::english() {
    return from_text(kEnglishLexicon, kEnglishSuffixes, "<built-in lexicon>",
                     "<built-in suffixes>");
}

LexiconTagger LexiconTagger::from_files(const std::string& lexicon_path,
                                        const std::string& suffix_path) {
    return from_text(io::read_file(lexicon_path), io::read_file(suffix_path), lexicon_path,
                     suffix_path);
}

LexiconTagger LexiconTagger::from_text(std::string_view lexicon_text, std::string_view suffix_text,
                                       const std::string& lexicon_name,
                                       const std::string& suffix_name) {
    auto parse_line = [](const std::string& line, const std::string& name, std::size_t line_no)
        -> std::optional<std::pair<std::string, PosTag>> {
        if (line.empty() || line[0] == '#')
            return std::nullopt;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("malformed tagger line (no tab) at " + name + ":" +
                            std::to_string(line_no));
        std::string key = line.substr(0, tab);
        auto tag = parse_tag(line.substr(tab + 1));
        if (!tag)
            throw DataError("unknown tag '" + line.substr(tab + 1) + "' at " + name + ":" +
                            std::to_string(line_no));
        return std::make_pair(std::move(key), *tag);
    };

    LexiconTagger t;
    std::vector<std::string> lex_lines = io::split_lines(lexicon_text);
    for (std::size_t i = 0; i < lex_lines.size(); ++i) {
        auto entry = parse_line(lex_lines[i], lexicon_name, i + 1);
        if (!entry)
            continue;
        if (word_class_of(entry->second) != WordClass::Function)
            throw DataError("lexicon tag must be a function-word tag at " + lexicon_name + ":" +
                            std::to_string(i + 1));
        t.closed_class_[lowercase(entry->first)] = entry->second;
    }
    std::vector<std::string> suf_lines = io::split_lines(suffix_text);
    for (std::size_t i = 0; i < suf_lines.size(); ++i) {
        auto entry = parse_line(suf_lines[i], suffix_name, i + 1);
        if (!entry)
            continue;
        if (word_class_of(entry->second) != WordClass::Content)
            throw DataError("suffix tag must be NOUN, VERB, ADJ, or ADV at " + suffix_name + ":" +
                            std::to_string(i + 1));
        t.suffix_rules_.emplace_back(lowercase(entry->first), entry->second);
    }
    return t;
}

TokenAnnotation LexiconTagger::classify_token(std::string_view word) const {
    if (all_punct_or_symbol(word))
        return {WordClass::Function, PosTag::Punct};
    if (numeral_shaped(word))
        return {WordClass::Function, PosTag::Num};
    std::string lower = lowercase(word);
    auto it = closed_class_.find(lower);
    if (it != closed_class_.end())
        return {WordClass::Function, it->second};
    for (const auto& [suffix, tag] : suffix_rules_) {
        if (lower.size() > suffix.size() &&
            lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0)
            return {WordClass::Content, tag};
    }
    return {WordClass::Content, PosTag::Noun};
}

void LexiconTagger::tag_sequence(TokenSequence& seq) const {
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (bpe::Tokenizer::is_special_literal(seq.surface[i]))
            seq.flags[i] = {WordClass::Symbol, PosTag::Symbol};
    for (const auto& span : word_spans(seq)) {
        if (seq.symbol(span.first))
            continue;
        TokenAnnotation ann = classify_token(span_text(seq, span));
        for (std::size_t i = span.first; i < span.second; ++i)
            seq.flags[i] = ann;
    }
}

} // namespace fluencyforge::pos
