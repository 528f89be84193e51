#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "oncopipe/llm_client.hpp"

namespace oncopipe::llm {

/// HTTP backend speaking the usual completions/fine-tuning JSON dialect.
/// The API key is taken from the LLM_API_KEY environment variable only;
/// it is never read from, or written to, configuration files.
class RemoteBackend : public Backend {
  public:
    struct Options {
        std::string base_url;  // e.g. https://api.example.com
        std::string api_key;
        int timeout_seconds = 60;
    };

    /// Builds Options with the key from LLM_API_KEY; throws ConfigError when
    /// the variable is unset or empty.
    static Options options_from_env(std::string base_url);

    explicit RemoteBackend(Options options);
    ~RemoteBackend() override;

    CompletionResponse complete_once(const CompletionRequest& request) override;
    FineTuneJob submit_finetune(const std::string& dataset_sha256,
                                const std::filesystem::path& dataset_path,
                                const std::string& base_model) override;
    FineTuneJob query_job(const std::string& job_id) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Pure wire-format mapping, split out so it can be tested without a server.
nlohmann::json build_completion_body(const CompletionRequest& request);
CompletionResponse parse_completion_body(const nlohmann::json& body);
nlohmann::json build_finetune_body(const std::string& file_id, const std::string& base_model,
                                   const std::string& dataset_sha256);
FineTuneJob parse_job_body(const nlohmann::json& body);

/// Maps an HTTP status outside 2xx onto the error taxonomy:
/// 429 -> RateLimitError, 5xx -> TransientError, 401/403 -> BackendError
/// (not retryable), 404 -> NotFoundError, anything else -> ProtocolError.
void throw_for_status(int status, const std::string& body);

}  // namespace oncopipe::llm
