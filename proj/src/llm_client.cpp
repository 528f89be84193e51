#include "oncopipe/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "oncopipe/clinical_dataset.hpp"
#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"
#include "oncopipe/rng.hpp"

namespace oncopipe::llm {

const char* to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

const char* to_string(JobStatus s) {
    switch (s) {
        case JobStatus::pending: return "pending";
        case JobStatus::running: return "running";
        case JobStatus::succeeded: return "succeeded";
        case JobStatus::failed: return "failed";
    }
    return "failed";
}

std::string request_sha256(const CompletionRequest& request) {
    nlohmann::json j{{"model", request.model_id},
                     {"prompt", request.prompt},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens}};
    if (request.stop) j["stop"] = *request.stop;
    return sha256_hex(j.dump());
}

std::vector<AuditEntry> replay_audit(const std::filesystem::path& path) {
    std::vector<AuditEntry> entries;
    for (const auto& j : io::read_jsonl(path)) {
        AuditEntry e;
        e.index = j.at("index").get<std::uint64_t>();
        e.request_sha256 = j.at("request_sha256").get<std::string>();
        e.model_id = j.at("model").get<std::string>();
        e.temperature = j.at("temperature").get<double>();
        e.attempts = j.at("attempts").get<int>();
        e.outcome = j.at("outcome").get<std::string>();
        e.finish_reason = j.value("finish_reason", "");
        e.response = j.value("response", "");
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const AuditEntry& a, const AuditEntry& b) { return a.index < b.index; });
    return entries;
}

struct LlmClient::Impl {
    Backend& backend;
    Options options;

    std::atomic<std::uint64_t> next_index{0};

    std::mutex audit_mu;
    std::ofstream audit;

    std::mutex jitter_mu;
    std::mt19937_64 jitter;

    // in-flight cap
    std::mutex slot_mu;
    std::condition_variable slot_cv;
    int in_flight = 0;

    Impl(Backend& b, Options o) : backend(b), options(std::move(o)), jitter(options.retry.jitter_seed) {
        if (!options.audit_log.empty()) {
            if (options.audit_log.has_parent_path()) {
                std::filesystem::create_directories(options.audit_log.parent_path());
            }
            audit.open(options.audit_log, std::ios::app);
            if (!audit) throw InputError("cannot open audit log: " + options.audit_log.string());
        }
        if (!options.sleeper) {
            options.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
        }
        if (options.max_in_flight < 1) options.max_in_flight = 1;
    }

    void acquire_slot() {
        std::unique_lock lock(slot_mu);
        slot_cv.wait(lock, [&] { return in_flight < options.max_in_flight; });
        ++in_flight;
    }

    void release_slot() {
        {
            std::lock_guard lock(slot_mu);
            --in_flight;
        }
        slot_cv.notify_one();
    }

    std::chrono::milliseconds jittered_delay(int attempt) {
        const double cap = static_cast<double>(options.retry.base_delay.count()) *
                           std::pow(options.retry.factor, attempt - 1);
        std::lock_guard lock(jitter_mu);
        const auto upper = static_cast<std::uint64_t>(cap) + 1;
        return std::chrono::milliseconds(rng::bounded(jitter, upper));
    }

    void log(const CompletionRequest& req, std::uint64_t index, int attempts,
             const std::string& outcome, const CompletionResponse* resp) {
        if (!audit.is_open()) return;
        nlohmann::json j{{"index", index},
                         {"request_sha256", request_sha256(req)},
                         {"model", req.model_id},
                         {"temperature", req.temperature},
                         {"attempts", attempts},
                         {"outcome", outcome}};
        if (resp) {
            j["finish_reason"] = to_string(resp->finish_reason);
            j["response"] = resp->text;
        }
        std::lock_guard lock(audit_mu);
        audit << j.dump() << '\n' << std::flush;
    }
};

LlmClient::LlmClient(Backend& backend) : LlmClient(backend, Options{}) {}

LlmClient::LlmClient(Backend& backend, Options options)
    : impl_(std::make_unique<Impl>(backend, std::move(options))) {}

LlmClient::~LlmClient() = default;

CompletionResponse LlmClient::complete(const CompletionRequest& request) {
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw std::invalid_argument("temperature must lie in [0, 2], got " +
                                    std::to_string(request.temperature));
    }
    if (request.max_tokens < 1) {
        throw std::invalid_argument("max_tokens must be >= 1");
    }

    impl_->acquire_slot();
    const std::uint64_t index = impl_->next_index.fetch_add(1);
    const int max_attempts = std::max(1, impl_->options.retry.max_attempts);

    int attempt = 0;
    try {
        while (true) {
            ++attempt;
            try {
                CompletionResponse resp = impl_->backend.complete_once(request);
                if (resp.text.empty() && resp.finish_reason != FinishReason::error) {
                    throw ProtocolError("backend returned empty completion without error status");
                }
                impl_->log(request, index, attempt, "ok", &resp);
                impl_->release_slot();
                return resp;
            } catch (const BackendError& e) {
                if (!e.retryable || attempt >= max_attempts) {
                    impl_->log(request, index, attempt, "backend_error", nullptr);
                    throw;
                }
                impl_->options.sleeper(impl_->jittered_delay(attempt));
            }
        }
    } catch (...) {
        impl_->release_slot();
        throw;
    }
}

FineTuneJob LlmClient::create_finetune_job(const std::filesystem::path& dataset_path,
                                           const std::string& base_model) {
    if (!std::filesystem::is_regular_file(dataset_path)) {
        throw InputError("fine-tune dataset not found: " + dataset_path.string());
    }
    auto report = clinical::validate_finetune_file(dataset_path, clinical::FileKind::generic);
    if (!report.ok()) {
        const auto& d = report.diagnostics.front();
        throw InputError("fine-tune dataset invalid, " + dataset_path.string() + ":" +
                         std::to_string(d.line) + ": " + d.message);
    }
    const std::string hash = sha256_file_hex(dataset_path);
    return impl_->backend.submit_finetune(hash, dataset_path, base_model);
}

FineTuneJob LlmClient::poll_job(const FineTuneJob& job) {
    return impl_->backend.query_job(job.job_id);
}

std::uint64_t LlmClient::requests_issued() const { return impl_->next_index.load(); }

}  // namespace oncopipe::llm
