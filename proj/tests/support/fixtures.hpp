#pragma once

// Shared fixture builders for the unit and acceptance suites. Everything
// here is deterministic: corpora are fixed text, tables are generated from
// our own RNG, and backend scripts are plain JSON values.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fixtures {

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

// --- guideline corpus ----------------------------------------------------

// Eleven pre-normalized sentences, each with at least two nouns the default
// tagger recognizes. These are the sentences that survive preprocessing of
// the corpus written by write_corpus_dir.
const std::vector<std::string>& guideline_sentences();

// Three documents holding the eleven sentences above plus one noun-poor
// sentence the filter must drop (doc order: a, b, c).
void write_corpus_dir(const std::filesystem::path& dir);

// --- chain backend scripts -------------------------------------------------

// "What does guideline item iNN state?"; the two-digit marker keys the
// verdict rules below.
std::string question_for(std::size_t index);

struct QaScriptSpec {
    std::vector<std::string> sentences;     // generation inputs, by index
    std::set<std::size_t> verify_no;        // verification answers "no"
    std::set<std::size_t> discard;          // retention answers "discard"
    std::uint64_t fail_after_requests = 0;  // 0 = never fail
    bool with_classifier_rules = false;     // temperature-gated rules for "... ->" prompts
    std::string finetune_model_id = "clf-scripted-1";
};

// Script with one generation rule per sentence ("Q: <question> A: <sentence>"),
// per-index verdict overrides, catch-all yes/retain rules, and optionally the
// classifier rules used by sweep stages (peak accuracy near T = 0.2).
nlohmann::json qa_script(const QaScriptSpec& spec);

// --- classification fixtures -------------------------------------------------

struct LabeledExample {
    std::string prompt;
    bool truth = false;
};

// n distinct prompts of the clinical "[...] ->" shape; the first `ones`
// carry true label 1.
std::vector<LabeledExample> classification_examples(std::size_t n, std::size_t ones);

// JSONL prompt/completion file with " 1"/" 0" completions.
void write_classification_file(const std::filesystem::path& path,
                               const std::vector<LabeledExample>& examples);

// Script answering examples[i] with predicted[i] via exact prompt matches.
nlohmann::json prediction_script(const std::vector<LabeledExample>& examples,
                                 const std::vector<bool>& predicted);

// --- synthetic clinical table -------------------------------------------------

struct CsvSpec {
    std::size_t rows = 922;
    std::size_t missing_rt = 0;     // leading rows with a blank adjuvant_radiation cell
    std::size_t missing_chemo = 0;  // following rows with a blank adjuvant_chemo cell
    std::size_t missing_both = 0;   // following rows with both target cells blank
    std::uint64_t seed = 90210;
};

// Header and rows matching the default clinical schema; every non-blanked
// cell parses cleanly.
std::string clinical_csv(const CsvSpec& spec);
void write_clinical_csv(const std::filesystem::path& path, const CsvSpec& spec);

}  // namespace fixtures
