#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oncopipe/llm_client.hpp"
#include "oncopipe/text_preproc.hpp"

namespace oncopipe::qa {

// Recorded-failure markers; a flagged pair is kept and reported, never
// silently dropped.
inline constexpr const char* flag_parse_failure = "parse_failure";
inline constexpr const char* flag_verdict_unrecognized = "verdict_unrecognized";
inline constexpr const char* flag_backend_error = "backend_error";

struct QAPair {
    std::string question;
    std::string answer;
    std::string source_id;
    std::size_t index_in_source = 0;
    std::optional<bool> verified;
    std::optional<bool> retained;  // may be true only when verified == true
    std::string raw_generation;
    std::vector<std::string> flags;

    bool has_flag(std::string_view flag) const;
};

struct QADataset {
    std::vector<QAPair> pairs;  // retained pairs only, in source order
    std::string created_from;   // corpus hash
    std::string chain_config_hash;
};

struct PipelineCounts {
    std::size_t sentences = 0;
    std::size_t generated = 0;
    std::size_t parsed = 0;
    std::size_t verified = 0;
    std::size_t retained = 0;
};

struct PipelineResult {
    QADataset dataset;
    PipelineCounts counts;
};

/// The three chain templates plus sampling settings. Templates are versioned
/// data: the embedded set is "qa-chains/v1", a directory of
/// generation.txt/verification.txt/retention.txt overrides it, and hash()
/// pins whichever set is active into every dataset built from it.
struct ChainConfig {
    std::string version;
    std::string model_id = "chat-default";
    double generation_temperature = 0.7;
    double verification_temperature = 0.0;
    double retention_temperature = 0.0;
    int generation_max_tokens = 256;
    int verdict_max_tokens = 8;
    std::string generation_template;    // {sentence}
    std::string verification_template;  // {question}, {answer}
    std::string retention_template;     // {question}, {answer}
    std::string prompt_separator = "\n\n###\n\n";
    std::string completion_end = " END";
    int workers = 4;
    std::filesystem::path journal;  // empty disables checkpointing

    static ChainConfig defaults();
    static ChainConfig with_templates_dir(const std::filesystem::path& dir);
    std::string hash() const;
};

// {name} placeholder substitution; unknown placeholders are left intact.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// Extracts the "Q: ... A: ..." structure; nullopt when either part is
// missing or empty.
std::optional<std::pair<std::string, std::string>> parse_qa_completion(std::string_view raw);

// Case-insensitive leading-word verdict ("yes"/"no", "retain"/"discard").
std::optional<bool> parse_verdict(std::string_view text, std::string_view positive,
                                  std::string_view negative);

std::string corpus_hash(std::span<const text::Sentence> sentences);

QAPair generate_qa(const text::Sentence& sentence, llm::LlmClient& client,
                   const ChainConfig& config);
QAPair verify_qa(QAPair pair, llm::LlmClient& client, const ChainConfig& config);
QAPair decide_retention(QAPair pair, llm::LlmClient& client, const ChainConfig& config);

/// Runs the three chains over every sentence (concurrently up to
/// config.workers), checkpointing per-sentence results to the journal so an
/// aborted run resumes by sentence index. The dataset carries exactly the
/// retained pairs in source order regardless of scheduling.
PipelineResult run_pipeline(const std::vector<text::Sentence>& sentences, llm::LlmClient& client,
                            const ChainConfig& config);

/// Uniform sample without replacement, source order preserved. k must not
/// exceed the pair count.
QADataset sample_subset(const QADataset& dataset, std::size_t k, std::uint64_t seed);

struct Split {
    QADataset train;
    QADataset validation;
    std::string warning;  // set when one side is empty
};

/// Disjoint cover with |train| = round(train_fraction * n), deterministic
/// per seed; both halves stay in source order.
Split split_dataset(const QADataset& dataset, double train_fraction, std::uint64_t seed);

// Full pair records (question/answer/source/flags/raw) with a metadata line.
void write_qa_pairs(const QADataset& dataset, const std::filesystem::path& path);
QADataset read_qa_pairs(const std::filesystem::path& path);

// prompt = question + separator, completion = answer + end token.
void write_finetune_file(const QADataset& dataset, const std::filesystem::path& path,
                         const ChainConfig& config);

}  // namespace oncopipe::qa
