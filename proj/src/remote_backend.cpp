#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "oncopipe/remote_backend.hpp"

#include <cstdlib>

#include "oncopipe/errors.hpp"
#include "oncopipe/io.hpp"

namespace oncopipe::llm {

using nlohmann::json;

json build_completion_body(const CompletionRequest& request) {
    json body{
        {"model", request.model_id},
        {"prompt", request.prompt},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.stop) body["stop"] = *request.stop;
    return body;
}

CompletionResponse parse_completion_body(const json& body) {
    try {
        const auto& choices = body.at("choices");
        if (!choices.is_array() || choices.empty())
            throw ProtocolError("completion response carries no choices");
        const auto& choice = choices.at(0);
        CompletionResponse resp;
        resp.text = choice.at("text").get<std::string>();
        std::string finish = choice.value("finish_reason", "stop");
        if (finish == "stop")
            resp.finish_reason = FinishReason::stop;
        else if (finish == "length")
            resp.finish_reason = FinishReason::length;
        else
            resp.finish_reason = FinishReason::error;
        if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
            const auto& lp = choice["logprobs"];
            if (lp.contains("tokens") && lp.contains("token_logprobs")) {
                const auto& tokens = lp["tokens"];
                const auto& values = lp["token_logprobs"];
                std::vector<std::pair<std::string, double>> pairs;
                for (std::size_t i = 0; i < tokens.size() && i < values.size(); ++i)
                    if (tokens[i].is_string() && values[i].is_number())
                        pairs.emplace_back(tokens[i].get<std::string>(), values[i].get<double>());
                if (!pairs.empty()) resp.token_logprobs = std::move(pairs);
            }
        }
        return resp;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed completion response: ") + e.what());
    }
}

json build_finetune_body(const std::string& file_id, const std::string& base_model,
                         const std::string& dataset_sha256) {
    return json{
        {"training_file", file_id},
        {"model", base_model},
        {"metadata", {{"dataset_sha256", dataset_sha256}}},
    };
}

FineTuneJob parse_job_body(const json& body) {
    try {
        FineTuneJob job;
        job.job_id = body.at("id").get<std::string>();
        job.base_model = body.value("model", "");
        std::string status = body.at("status").get<std::string>();
        if (status == "pending" || status == "queued" || status == "validating_files")
            job.status = JobStatus::pending;
        else if (status == "running")
            job.status = JobStatus::running;
        else if (status == "succeeded")
            job.status = JobStatus::succeeded;
        else if (status == "failed" || status == "cancelled")
            job.status = JobStatus::failed;
        else
            throw ProtocolError("unknown fine-tune status '" + status + "'");
        if (body.contains("fine_tuned_model") && body["fine_tuned_model"].is_string())
            job.result_model_id = body["fine_tuned_model"].get<std::string>();
        if (body.contains("error") && body["error"].is_object()) {
            std::string message = body["error"].value("message", "");
            if (!message.empty()) job.failure_reason = message;
        }
        return job;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed fine-tune job response: ") + e.what());
    }
}

void throw_for_status(int status, const std::string& body) {
    if (status >= 200 && status < 300) return;
    std::string detail = "HTTP " + std::to_string(status);
    auto j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.contains("error") && j["error"].is_object())
        detail += ": " + j["error"].value("message", "");
    if (status == 429) throw RateLimitError(detail);
    if (status >= 500) throw TransientError(detail);
    if (status == 401 || status == 403)
        throw BackendError("authentication rejected (" + detail + ")", false);
    if (status == 404) throw NotFoundError(detail);
    throw ProtocolError(detail);
}

RemoteBackend::Options RemoteBackend::options_from_env(std::string base_url) {
    Options opts;
    opts.base_url = std::move(base_url);
    const char* key = std::getenv("LLM_API_KEY");
    if (!key || !*key)
        throw ConfigError("LLM_API_KEY is not set; export it before using the remote backend");
    opts.api_key = key;
    return opts;
}

struct RemoteBackend::Impl {
    Options options;
    httplib::Client client;

    explicit Impl(Options opts) : options(std::move(opts)), client(options.base_url) {
        client.set_default_headers({{"Authorization", "Bearer " + options.api_key}});
        client.set_connection_timeout(options.timeout_seconds);
        client.set_read_timeout(options.timeout_seconds);
        client.set_write_timeout(options.timeout_seconds);
    }

    json request_json(const char* method, const std::string& path, const json* body) {
        httplib::Result res;
        if (std::string(method) == "GET")
            res = client.Get(path);
        else
            res = client.Post(path, body->dump(), "application/json");
        if (!res)
            throw TransientError("could not reach " + options.base_url + path + " (" +
                                 httplib::to_string(res.error()) + ")");
        throw_for_status(res->status, res->body);
        auto parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
            throw ProtocolError("response from " + path + " is not valid JSON");
        return parsed;
    }
};

RemoteBackend::RemoteBackend(Options options) {
    if (options.base_url.empty()) throw ConfigError("remote backend requires a base URL");
    if (options.api_key.empty())
        throw ConfigError("remote backend requires an API key (set LLM_API_KEY)");
    impl_ = std::make_unique<Impl>(std::move(options));
}

RemoteBackend::~RemoteBackend() = default;

CompletionResponse RemoteBackend::complete_once(const CompletionRequest& request) {
    json body = build_completion_body(request);
    return parse_completion_body(impl_->request_json("POST", "/v1/completions", &body));
}

FineTuneJob RemoteBackend::submit_finetune(const std::string& dataset_sha256,
                                           const std::filesystem::path& dataset_path,
                                           const std::string& base_model) {
    std::string content = io::read_file(dataset_path);
    httplib::MultipartFormDataItems items = {
        {"purpose", "fine-tune", "", ""},
        {"file", content, dataset_path.filename().string(), "application/jsonl"},
    };
    auto res = impl_->client.Post("/v1/files", items);
    if (!res)
        throw TransientError("could not reach " + impl_->options.base_url + "/v1/files (" +
                             httplib::to_string(res.error()) + ")");
    throw_for_status(res->status, res->body);
    auto uploaded = json::parse(res->body, nullptr, false);
    if (uploaded.is_discarded() || !uploaded.contains("id"))
        throw ProtocolError("file upload response carries no id");

    json body = build_finetune_body(uploaded["id"].get<std::string>(), base_model, dataset_sha256);
    auto job = parse_job_body(impl_->request_json("POST", "/v1/fine_tuning/jobs", &body));
    if (job.base_model.empty()) job.base_model = base_model;
    job.dataset_path = dataset_path;
    return job;
}

FineTuneJob RemoteBackend::query_job(const std::string& job_id) {
    auto job = parse_job_body(impl_->request_json("GET", "/v1/fine_tuning/jobs/" + job_id, nullptr));
    return job;
}

}  // namespace oncopipe::llm
