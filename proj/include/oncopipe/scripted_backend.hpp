#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "oncopipe/llm_client.hpp"

namespace oncopipe::llm {

/// Deterministic stand-in for a hosted LLM. Behaviour is fully described by a
/// JSON script: pattern rules map prompts (optionally gated by model id and a
/// temperature window) to canned completions, and may inject rate-limit or
/// transient failures for the first N matches. Fine-tune jobs advance
/// pending -> running -> succeeded across successive polls.
class ScriptedBackend : public Backend {
  public:
    explicit ScriptedBackend(const nlohmann::json& script);
    static ScriptedBackend from_file(const std::filesystem::path& path);

    CompletionResponse complete_once(const CompletionRequest& request) override;
    FineTuneJob submit_finetune(const std::string& dataset_sha256,
                                const std::filesystem::path& dataset_path,
                                const std::string& base_model) override;
    FineTuneJob query_job(const std::string& job_id) override;

    std::uint64_t requests_seen() const;
    std::map<std::string, std::uint64_t> rule_hits() const;

  private:
    struct Rule {
        std::string name;
        std::optional<std::string> prompt_equals;
        std::optional<std::string> prompt_contains;
        std::optional<std::regex> prompt_regex;
        std::optional<std::string> model;
        double temperature_min = 0.0;
        double temperature_max = 2.0;
        std::vector<std::string> responses;
        FinishReason finish_reason = FinishReason::stop;
        std::string fail_kind;       // "", "rate_limit", "transient"
        std::uint64_t fail_times = 0;  // remaining injected failures

        bool matches(const CompletionRequest& request) const;
    };

    struct JobState {
        FineTuneJob job;
        std::uint64_t polls = 0;
    };

    const Rule* find_rule(const CompletionRequest& request);

    mutable std::mutex mutex_;
    std::vector<Rule> rules_;
    std::string default_response_ = " 1";
    FinishReason default_finish_ = FinishReason::stop;
    std::uint64_t seed_ = 0;
    std::uint64_t fail_after_requests_ = 0;  // 0 = never
    std::uint64_t requests_ = 0;
    std::map<std::string, std::uint64_t> hits_;

    std::uint64_t polls_to_succeed_ = 3;
    bool finetune_fails_ = false;
    std::string failure_reason_;
    std::string result_model_id_;
    std::map<std::string, JobState> jobs_;          // job_id -> state
    std::map<std::string, std::string> by_dataset_;  // dataset sha256 -> job_id
};

}  // namespace oncopipe::llm
