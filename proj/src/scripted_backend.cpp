#include "oncopipe/scripted_backend.hpp"

#include <cmath>

#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"

namespace oncopipe::llm {

using nlohmann::json;

namespace {

FinishReason parse_finish(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    if (s == "error") return FinishReason::error;
    throw ConfigError("unknown finish_reason '" + s + "' in backend script");
}

}  // namespace

bool ScriptedBackend::Rule::matches(const CompletionRequest& request) const {
    if (model && *model != request.model_id) return false;
    if (request.temperature < temperature_min || request.temperature > temperature_max)
        return false;
    if (prompt_equals) return request.prompt == *prompt_equals;
    if (prompt_contains) return request.prompt.find(*prompt_contains) != std::string::npos;
    if (prompt_regex) return std::regex_search(request.prompt, *prompt_regex);
    return true;  // unconditional rule
}

ScriptedBackend::ScriptedBackend(const json& script) {
    try {
        seed_ = script.value("seed", 0ULL);
        fail_after_requests_ = script.value("fail_after_requests", 0ULL);
        if (script.contains("default")) {
            const auto& d = script["default"];
            default_response_ = d.value("response", default_response_);
            default_finish_ = parse_finish(d.value("finish_reason", "stop"));
        }
        for (const auto& jr : script.value("rules", json::array())) {
            Rule r;
            r.name = jr.value("name", "rule-" + std::to_string(rules_.size()));
            if (jr.contains("prompt_equals")) r.prompt_equals = jr["prompt_equals"].get<std::string>();
            if (jr.contains("prompt_contains"))
                r.prompt_contains = jr["prompt_contains"].get<std::string>();
            if (jr.contains("prompt_regex"))
                r.prompt_regex = std::regex(jr["prompt_regex"].get<std::string>());
            if (jr.contains("model")) r.model = jr["model"].get<std::string>();
            r.temperature_min = jr.value("temperature_min", 0.0);
            r.temperature_max = jr.value("temperature_max", 2.0);
            if (jr.contains("responses"))
                for (const auto& resp : jr["responses"]) r.responses.push_back(resp.get<std::string>());
            else if (jr.contains("response"))
                r.responses.push_back(jr["response"].get<std::string>());
            r.finish_reason = parse_finish(jr.value("finish_reason", "stop"));
            if (jr.contains("fail")) {
                const auto& jf = jr["fail"];
                r.fail_kind = jf.at("kind").get<std::string>();
                if (r.fail_kind != "rate_limit" && r.fail_kind != "transient")
                    throw ConfigError("rule '" + r.name + "': fail.kind must be rate_limit or transient");
                r.fail_times = jf.value("times", 1ULL);
            }
            if (r.responses.empty() && r.fail_kind.empty())
                throw ConfigError("rule '" + r.name + "' has neither a response nor a failure");
            rules_.push_back(std::move(r));
        }
        if (script.contains("finetune")) {
            const auto& jf = script["finetune"];
            polls_to_succeed_ = jf.value("polls_to_succeed", 3ULL);
            finetune_fails_ = jf.value("fail", false);
            failure_reason_ = jf.value("failure_reason", "training diverged");
            result_model_id_ = jf.value("result_model_id", "");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid backend script: ") + e.what());
    } catch (const std::regex_error& e) {
        throw ConfigError(std::string("invalid prompt_regex in backend script: ") + e.what());
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("could not parse backend script " + path.string() + ": " + e.what());
    }
    return ScriptedBackend(j);
}

const ScriptedBackend::Rule* ScriptedBackend::find_rule(const CompletionRequest& request) {
    for (auto& r : rules_)
        if (r.matches(request)) return &r;
    return nullptr;
}

CompletionResponse ScriptedBackend::complete_once(const CompletionRequest& request) {
    std::unique_lock lock(mutex_);
    ++requests_;
    if (fail_after_requests_ && requests_ > fail_after_requests_)
        throw TransientError("scripted backend window exhausted after " +
                             std::to_string(fail_after_requests_) + " requests");

    const Rule* rule = find_rule(request);
    if (rule) {
        ++hits_[rule->name];
        auto* mut = const_cast<Rule*>(rule);
        if (mut->fail_times > 0) {
            --mut->fail_times;
            if (mut->fail_kind == "rate_limit")
                throw RateLimitError("scripted rate limit on rule '" + rule->name + "'");
            throw TransientError("scripted transient failure on rule '" + rule->name + "'");
        }
        if (rule->responses.empty())
            throw TransientError("scripted transient failure on rule '" + rule->name + "'");
        // Temperature buckets of width 0.1 keep the choice stable inside a
        // bucket while letting different sweep points see different outputs.
        auto bucket = static_cast<long long>(std::llround(request.temperature * 10.0));
        std::string key = request.prompt + "|" + std::to_string(bucket) + "|" +
                          std::to_string(seed_);
        std::size_t pick =
            static_cast<std::size_t>(fnv1a64(key) % rule->responses.size());
        CompletionResponse resp;
        resp.text = rule->responses[pick];
        resp.finish_reason = rule->finish_reason;
        return resp;
    }
    CompletionResponse resp;
    resp.text = default_response_;
    resp.finish_reason = default_finish_;
    return resp;
}

FineTuneJob ScriptedBackend::submit_finetune(const std::string& dataset_sha256,
                                             const std::filesystem::path& dataset_path,
                                             const std::string& base_model) {
    std::unique_lock lock(mutex_);
    if (auto it = by_dataset_.find(dataset_sha256); it != by_dataset_.end())
        return jobs_.at(it->second).job;  // resubmission of the same bytes

    FineTuneJob job;
    job.job_id = "ft-" + dataset_sha256.substr(0, 12);
    job.base_model = base_model;
    job.dataset_path = dataset_path;
    job.status = JobStatus::pending;
    jobs_[job.job_id] = JobState{job, 0};
    by_dataset_[dataset_sha256] = job.job_id;
    return job;
}

FineTuneJob ScriptedBackend::query_job(const std::string& job_id) {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFoundError("unknown fine-tune job '" + job_id + "'");
    auto& state = it->second;
    ++state.polls;
    if (state.polls >= polls_to_succeed_) {
        if (finetune_fails_) {
            state.job.status = JobStatus::failed;
            state.job.failure_reason = failure_reason_;
        } else {
            state.job.status = JobStatus::succeeded;
            state.job.result_model_id = result_model_id_.empty()
                                            ? state.job.base_model + ":" + state.job.job_id
                                            : result_model_id_;
        }
    } else if (state.polls >= 2) {
        state.job.status = JobStatus::running;
    }
    return state.job;
}

std::uint64_t ScriptedBackend::requests_seen() const {
    std::unique_lock lock(mutex_);
    return requests_;
}

std::map<std::string, std::uint64_t> ScriptedBackend::rule_hits() const {
    std::unique_lock lock(mutex_);
    return hits_;
}

}  // namespace oncopipe::llm
