#include "oncopipe/text_preproc.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <json.hpp>

#include "oncopipe/errors.hpp"
#include "oncopipe/io.hpp"
#include "oncopipe/unicode.hpp"

namespace oncopipe::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }

// Closing punctuation that stays attached to the sentence end.
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// A character that can plausibly open a new sentence.
bool can_start_sentence(char c) {
    return is_upper(c) || is_digit(c) || c == '"' || c == '(' || c == '[' ||
           static_cast<unsigned char>(c) >= 0x80;
}

// Word (letters and internal dots) immediately before position i.
std::string preceding_token(std::string_view text, std::size_t i) {
    std::size_t b = i;
    while (b > 0 && (is_alpha(text[b - 1]) || text[b - 1] == '.')) --b;
    while (b < i && text[b] == '.') ++b;
    return std::string(text.substr(b, i - b));
}

}  // namespace

std::size_t RawCorpus::total_chars() const {
    std::size_t n = 0;
    for (const auto& doc : documents) n += scalar_count(doc.text);
    return n;
}

const std::set<std::string>& abbreviation_set() {
    static const std::set<std::string> abbrevs = {
        "al",  "approx", "ca",  "cf",   "dept", "dr",  "e.g", "ed",   "eds", "et",
        "etc", "fig",    "figs", "i.e", "inc",  "jr",  "mg",  "ml",   "mm",  "mr",
        "mrs", "ms",     "mt",  "no",   "nos",  "p",   "pp",  "prof", "sr",  "st",
        "vol", "vs",
    };
    return abbrevs;
}

const char* contraction_table_version() { return "contractions/v1"; }

const std::vector<std::pair<std::string, std::string>>& contraction_table() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"ain't", "is not"},        {"aren't", "are not"},      {"can't", "cannot"},
        {"couldn't", "could not"},  {"didn't", "did not"},      {"doesn't", "does not"},
        {"don't", "do not"},        {"hadn't", "had not"},      {"hasn't", "has not"},
        {"haven't", "have not"},    {"he'd", "he would"},       {"he'll", "he will"},
        {"he's", "he is"},          {"i'd", "i would"},         {"i'll", "i will"},
        {"i'm", "i am"},            {"i've", "i have"},         {"isn't", "is not"},
        {"it'll", "it will"},       {"it's", "it is"},          {"let's", "let us"},
        {"mightn't", "might not"},  {"mustn't", "must not"},    {"needn't", "need not"},
        {"shan't", "shall not"},    {"she'd", "she would"},     {"she'll", "she will"},
        {"she's", "she is"},        {"shouldn't", "should not"}, {"that's", "that is"},
        {"there's", "there is"},    {"they'd", "they would"},   {"they'll", "they will"},
        {"they're", "they are"},    {"they've", "they have"},   {"wasn't", "was not"},
        {"we'd", "we would"},       {"we'll", "we will"},       {"we're", "we are"},
        {"we've", "we have"},       {"weren't", "were not"},    {"what's", "what is"},
        {"who's", "who is"},        {"won't", "will not"},      {"wouldn't", "would not"},
        {"you'd", "you would"},     {"you'll", "you will"},     {"you're", "you are"},
        {"you've", "you have"},
    };
    return table;
}

namespace {

const std::map<std::string, std::string>& contraction_map() {
    static const std::map<std::string, std::string> m = [] {
        std::map<std::string, std::string> out;
        for (const auto& [k, v] : contraction_table()) out.emplace(k, v);
        return out;
    }();
    return m;
}

std::vector<Sentence> segment_document(const std::string& source_id, std::string_view text) {
    if (!valid_utf8(text)) {
        throw InputError("document is not valid UTF-8: " + source_id);
    }
    std::vector<Sentence> out;
    const std::size_t n = text.size();
    constexpr std::size_t npos = std::string_view::npos;

    auto flush = [&](std::size_t begin, std::size_t end) {
        while (end > begin && is_space(text[end - 1])) --end;
        if (end > begin) {
            out.push_back(Sentence{std::string(text.substr(begin, end - begin)), source_id,
                                   out.size(), 0});
        }
    };

    std::size_t start = npos;
    std::size_t i = 0;
    while (i < n) {
        const char c = text[i];
        if (start == npos) {
            if (is_space(c)) {
                ++i;
                continue;
            }
            start = i;
        }
        if (c == '!' || c == '?') {
            std::size_t end = i + 1;
            while (end < n && is_closer(text[end])) ++end;
            flush(start, end);
            start = npos;
            i = end;
            continue;
        }
        if (c == '.') {
            const bool decimal = i > 0 && i + 1 < n && is_digit(text[i - 1]) && is_digit(text[i + 1]);
            if (decimal) {
                ++i;
                continue;
            }
            const std::string tok = preceding_token(text, i);
            const bool abbrev = !tok.empty() && abbreviation_set().count(io::lower(tok)) > 0;
            const bool initial = tok.size() == 1 && is_upper(tok[0]);
            if (abbrev || initial) {
                ++i;
                continue;
            }
            std::size_t end = i + 1;
            while (end < n && is_closer(text[end])) ++end;
            std::size_t j = end;
            while (j < n && is_space(text[j])) ++j;
            if (j >= n || can_start_sentence(text[j])) {
                flush(start, end);
                start = npos;
                i = end;
                continue;
            }
            ++i;
            continue;
        }
        if (c == '\n') {
            std::size_t j = i;
            int newlines = 0;
            while (j < n && is_space(text[j])) {
                if (text[j] == '\n') ++newlines;
                ++j;
            }
            if (newlines >= 2) {
                flush(start, i);
                start = npos;
                i = j;
                continue;
            }
        }
        ++i;
    }
    if (start != npos) flush(start, n);
    return out;
}

// Expands one whitespace-delimited token, preserving leading/trailing
// punctuation and an initial capital.
std::string expand_token(std::string_view token) {
    std::size_t b = 0, e = token.size();
    auto is_word_char = [](char c) {
        return is_alpha(c) || is_digit(c) || c == '\'' || static_cast<unsigned char>(c) >= 0x80;
    };
    while (b < e && !is_word_char(token[b])) ++b;
    while (e > b && !is_word_char(token[e - 1])) --e;
    if (b >= e) return std::string(token);

    std::string core(token.substr(b, e - b));
    // canonicalize the typographic apostrophe for lookup
    std::string key;
    key.reserve(core.size());
    for (std::size_t i = 0; i < core.size();) {
        if (core.compare(i, 3, "\xE2\x80\x99") == 0) {
            key.push_back('\'');
            i += 3;
        } else {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(core[i]))));
            ++i;
        }
    }
    auto it = contraction_map().find(key);
    if (it == contraction_map().end()) return std::string(token);

    std::string expansion = it->second;
    if (is_upper(core[0])) {
        expansion[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(expansion[0])));
    }
    std::string out(token.substr(0, b));
    out += expansion;
    out += token.substr(e);
    return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
    const std::string plain = strip_accents(text);

    std::string out;
    out.reserve(plain.size());
    std::size_t i = 0;
    const std::size_t n = plain.size();
    while (i < n) {
        while (i < n && is_space(plain[i])) ++i;
        if (i >= n) break;
        std::size_t b = i;
        while (i < n && !is_space(plain[i])) ++i;
        if (!out.empty()) out.push_back(' ');
        out += expand_token(std::string_view(plain).substr(b, i - b));
    }
    return out;
}

Sentence normalize(Sentence s) {
    s.text = normalize_text(s.text);
    return s;
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto is_word_char = [](char c) {
        return is_alpha(c) || is_digit(c) || c == '-' || c == '\'' ||
               static_cast<unsigned char>(c) >= 0x80;
    };
    while (i < n) {
        while (i < n && !is_word_char(text[i])) ++i;
        std::size_t b = i;
        while (i < n && is_word_char(text[i])) ++i;
        if (i > b) tokens.emplace_back(text.substr(b, i - b));
    }
    return tokens;
}

LexiconNounTagger::LexiconNounTagger(std::set<std::string> words, bool use_suffix_heuristics)
    : words_(std::move(words)), use_suffixes_(use_suffix_heuristics) {}

bool LexiconNounTagger::is_noun(std::string_view token) const {
    std::string t = io::lower(token);
    if (words_.count(t)) return true;
    if (t.size() > 3 && t.back() == 's') {
        if (words_.count(t.substr(0, t.size() - 1))) return true;
        if (t.size() > 4 && t.compare(t.size() - 2, 2, "es") == 0 &&
            words_.count(t.substr(0, t.size() - 2)))
            return true;
    }
    if (!use_suffixes_) return false;
    static const char* suffixes[] = {
        "tion",  "sion",  "ment", "ness", "ity",   "omy",    "apy",  "oma",
        "itis",  "logy",  "emia", "osis", "iasis", "graphy", "gram", "ance",
        "ence",  "ship",  "hood", "ist",  "cyte",  "ectomy", "plasty",
    };
    auto has_suffix = [](const std::string& w, std::string_view suf) {
        return w.size() > suf.size() + 2 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
    };
    std::string stem = t;
    if (stem.size() > 3 && stem.back() == 's') stem.pop_back();
    for (const char* suf : suffixes) {
        if (has_suffix(t, suf) || has_suffix(stem, suf)) return true;
    }
    return false;
}

const NounTagger& default_noun_tagger() {
    static const LexiconNounTagger tagger(
        {
            "age",          "anemia",       "antibody",     "assay",       "benefit",
            "biomarker",    "biopsy",       "blood",        "bone",        "brain",
            "breast",       "cancer",       "care",         "carcinoma",   "cell",
            "chemotherapy", "clinic",       "count",        "cycle",       "data",
            "day",          "diagnosis",    "disease",      "doctor",      "dosage",
            "dose",         "drug",         "effect",       "evidence",    "factor",
            "fatigue",      "fever",        "gene",         "gland",       "grade",
            "guideline",    "harm",         "heart",        "histology",   "hormone",
            "hospital",     "imaging",      "infection",    "infusion",    "interval",
            "kidney",       "liver",        "lung",         "lymph",       "mammogram",
            "man",          "management",   "margin",       "marker",      "mastectomy",
            "menopause",    "metastasis",   "month",        "mutation",    "nausea",
            "node",         "number",       "oncologist",   "option",      "outcome",
            "pain",         "panel",        "pathology",    "patient",     "percent",
            "physician",    "plasma",       "pregnancy",    "prognosis",   "proportion",
            "protein",      "radiation",    "radiotherapy", "rate",        "receptor",
            "recommendation", "recurrence", "regimen",      "relapse",     "response",
            "result",       "risk",         "scan",         "schedule",    "screening",
            "serum",        "sign",         "skin",         "stage",       "status",
            "study",        "surgery",      "survival",     "symptom",     "tamoxifen",
            "test",         "therapy",      "tissue",       "toxicity",    "treatment",
            "trial",        "tumor",        "tumour",       "visit",       "week",
            "woman",        "women",        "year",
        },
        true);
    return tagger;
}

std::vector<Sentence> segment_sentences(const RawCorpus& corpus) {
    std::set<std::string> seen;
    for (const auto& doc : corpus.documents) {
        if (!seen.insert(doc.source_id).second) {
            throw InputError("duplicate source_id: " + doc.source_id);
        }
    }
    std::vector<Sentence> out;
    for (const auto& doc : corpus.documents) {
        auto sentences = segment_document(doc.source_id, doc.text);
        out.insert(out.end(), std::make_move_iterator(sentences.begin()),
                   std::make_move_iterator(sentences.end()));
    }
    return out;
}

std::size_t count_nouns(const Sentence& s, const NounTagger& tagger) {
    std::size_t count = 0;
    for (const auto& tok : word_tokens(s.text)) {
        if (tagger.is_noun(tok)) ++count;
    }
    return count;
}

std::vector<Sentence> filter_low_noun(std::vector<Sentence> sentences, std::size_t min_nouns) {
    std::vector<Sentence> out;
    out.reserve(sentences.size());
    for (auto& s : sentences) {
        if (s.noun_count >= min_nouns) out.push_back(std::move(s));
    }
    return out;
}

RawCorpus load_corpus_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw InputError("corpus directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
    RawCorpus corpus;
    for (const auto& f : files) {
        corpus.documents.push_back({f.filename().string(), io::read_file(f)});
    }
    return corpus;
}

std::vector<Sentence> preprocess_corpus(const RawCorpus& corpus, const NounTagger& tagger,
                                        std::size_t min_nouns) {
    auto sentences = segment_sentences(corpus);
    for (auto& s : sentences) {
        s = normalize(std::move(s));
        s.noun_count = count_nouns(s, tagger);
    }
    return filter_low_noun(std::move(sentences), min_nouns);
}

void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences) {
    std::vector<nlohmann::json> records;
    records.reserve(sentences.size());
    for (const auto& s : sentences) {
        records.push_back({{"text", s.text},
                           {"source_id", s.source_id},
                           {"index", s.index_in_source},
                           {"noun_count", s.noun_count}});
    }
    io::write_jsonl(path, records);
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path) {
    std::vector<Sentence> out;
    for (const auto& j : io::read_jsonl(path)) {
        Sentence s;
        s.text = j.at("text").get<std::string>();
        s.source_id = j.at("source_id").get<std::string>();
        s.index_in_source = j.at("index").get<std::size_t>();
        s.noun_count = j.at("noun_count").get<std::size_t>();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace oncopipe::text
