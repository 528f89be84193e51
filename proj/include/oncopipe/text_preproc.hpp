#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oncopipe::text {

struct RawDocument {
    std::string source_id;
    std::string text;
};

struct RawCorpus {
    std::vector<RawDocument> documents;
    // Unicode scalar values summed over all documents.
    std::size_t total_chars() const;
};

struct Sentence {
    std::string text;
    std::string source_id;
    std::size_t index_in_source = 0;
    std::size_t noun_count = 0;

    bool operator==(const Sentence&) const = default;
};

class NounTagger {
public:
    virtual ~NounTagger() = default;
    virtual bool is_noun(std::string_view token) const = 0;
};

/// Word-list tagger with optional suffix heuristics. Deterministic by
/// construction; the shipped default lexicon covers general and clinical
/// vocabulary, tests freeze their own small lexicons.
class LexiconNounTagger : public NounTagger {
public:
    LexiconNounTagger(std::set<std::string> words, bool use_suffix_heuristics = true);
    bool is_noun(std::string_view token) const override;

private:
    std::set<std::string> words_;
    bool use_suffixes_;
};

const NounTagger& default_noun_tagger();

// The fixed contraction lookup applied by normalize_text (version tag
// included); unknown apostrophe forms pass through unchanged.
const std::vector<std::pair<std::string, std::string>>& contraction_table();
const char* contraction_table_version();
const std::set<std::string>& abbreviation_set();

/// Rule-based splitter on terminal punctuation with an abbreviation
/// exception list, decimal-number guard and blank-line boundaries. Every
/// character of input lands in exactly one sentence or is discarded as
/// inter-sentence whitespace. Throws InputError for undecodable documents.
std::vector<Sentence> segment_sentences(const RawCorpus& corpus);

// Whitespace collapse + trim, accent stripping, contraction expansion.
// Total and idempotent.
std::string normalize_text(std::string_view text);
Sentence normalize(Sentence s);

std::vector<std::string> word_tokens(std::string_view text);
std::size_t count_nouns(const Sentence& s, const NounTagger& tagger);

std::vector<Sentence> filter_low_noun(std::vector<Sentence> sentences, std::size_t min_nouns = 2);

// One document per file, scanned in lexicographic filename order.
RawCorpus load_corpus_dir(const std::filesystem::path& dir);

std::vector<Sentence> preprocess_corpus(const RawCorpus& corpus, const NounTagger& tagger,
                                        std::size_t min_nouns = 2);

void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences);
std::vector<Sentence> read_sentences(const std::filesystem::path& path);

}  // namespace oncopipe::text
