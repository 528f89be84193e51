#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oncopipe::llm {

struct CompletionRequest {
    std::string model_id;
    std::string prompt;
    double temperature = 0.0;  // must lie in [0, 2]
    int max_tokens = 256;      // must be >= 1
    std::optional<std::string> stop;
};

enum class FinishReason { stop, length, error };
const char* to_string(FinishReason r);

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    std::optional<std::vector<std::pair<std::string, double>>> token_logprobs;
};

enum class JobStatus { pending, running, succeeded, failed };
const char* to_string(JobStatus s);

struct FineTuneJob {
    std::string job_id;
    std::string base_model;
    std::filesystem::path dataset_path;
    JobStatus status = JobStatus::pending;
    std::optional<std::string> result_model_id;  // present iff status == succeeded
    std::optional<std::string> failure_reason;
};

/// One model provider. Implementations raise RateLimitError/TransientError
/// for retryable failures and ProtocolError for malformed replies; the
/// retry loop lives in LlmClient, not here.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete_once(const CompletionRequest& request) = 0;
    virtual FineTuneJob submit_finetune(const std::string& dataset_sha256,
                                        const std::filesystem::path& dataset_path,
                                        const std::string& base_model) = 0;
    virtual FineTuneJob query_job(const std::string& job_id) = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    std::uint64_t jitter_seed = 0;
};

struct AuditEntry {
    std::uint64_t index = 0;
    std::string request_sha256;
    std::string model_id;
    double temperature = 0.0;
    int attempts = 0;
    std::string outcome;  // "ok" or "backend_error"
    std::string finish_reason;
    std::string response;
};

// Entries sorted by request index: the sequence of requests as issued,
// independent of how concurrent completions interleaved in the file.
std::vector<AuditEntry> replay_audit(const std::filesystem::path& path);

std::string request_sha256(const CompletionRequest& request);

class LlmClient {
public:
    struct Options {
        RetryPolicy retry;
        int max_in_flight = 8;
        std::filesystem::path audit_log;  // empty disables auditing
        // Injectable so tests do not sleep through the backoff schedule.
        std::function<void(std::chrono::milliseconds)> sleeper;
    };

    explicit LlmClient(Backend& backend);
    LlmClient(Backend& backend, Options options);
    ~LlmClient();

    /// Retries transient failures with exponential backoff and full jitter,
    /// records the outcome to the audit log, and enforces the request
    /// invariants (temperature in [0,2], max_tokens >= 1).
    CompletionResponse complete(const CompletionRequest& request);

    /// Validates the dataset file before any backend call; the idempotency
    /// key is the dataset's sha256, so resubmitting the same file returns
    /// the same job.
    FineTuneJob create_finetune_job(const std::filesystem::path& dataset_path,
                                    const std::string& base_model);

    FineTuneJob poll_job(const FineTuneJob& job);

    std::uint64_t requests_issued() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oncopipe::llm
