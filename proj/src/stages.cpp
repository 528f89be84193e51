#include "oncopipe/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "oncopipe/chain_orchestrator.hpp"
#include "oncopipe/clinical_dataset.hpp"
#include "oncopipe/error_analysis.hpp"
#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"
#include "oncopipe/llm_client.hpp"
#include "oncopipe/remote_backend.hpp"
#include "oncopipe/sampling_eval.hpp"
#include "oncopipe/scripted_backend.hpp"
#include "oncopipe/text_preproc.hpp"

namespace oncopipe::stage {

using nlohmann::json;

namespace {

class Params {
  public:
    Params(std::string section, const config::ParsedConfig& cfg,
           const std::map<std::string, std::string>& overrides)
        : section_(std::move(section)), cfg_(cfg), overrides_(overrides) {}

    std::optional<std::string> find(const std::string& key) const {
        if (auto it = overrides_.find(key); it != overrides_.end()) return it->second;
        return cfg_.get(section_, key);
    }

    std::string require(const std::string& key) const {
        auto v = find(key);
        if (!v || v->empty())
            throw ConfigError("stage '" + section_ + "' needs '" + key +
                              "' (flag or config key)");
        return *v;
    }

    std::string get_or(const std::string& key, std::string def) const {
        auto v = find(key);
        return v ? *v : def;
    }

    std::uint64_t u64_or(const std::string& key, std::uint64_t def) const {
        auto v = find(key);
        if (!v) return def;
        try {
            return std::stoull(*v);
        } catch (const std::exception&) {
            throw ConfigError("stage '" + section_ + "': '" + key + "' must be an integer");
        }
    }

    std::uint64_t require_u64(const std::string& key) const {
        require(key);
        return u64_or(key, 0);
    }

    double real_or(const std::string& key, double def) const {
        auto v = find(key);
        if (!v) return def;
        char* end = nullptr;
        double d = std::strtod(v->c_str(), &end);
        if (end != v->c_str() + v->size())
            throw ConfigError("stage '" + section_ + "': '" + key + "' must be a number");
        return d;
    }

    const std::string& section() const { return section_; }

    // Every key that was actually consulted, for the run manifest.
    std::map<std::string, std::string> effective() const {
        std::map<std::string, std::string> out;
        if (auto it = cfg_.sections.find(section_); it != cfg_.sections.end()) out = it->second;
        for (const auto& [k, v] : overrides_) out[k] = v;
        return out;
    }

  private:
    std::string section_;
    const config::ParsedConfig& cfg_;
    const std::map<std::string, std::string>& overrides_;
};

class Manifest {
  public:
    Manifest(std::string stage, const config::ParsedConfig& cfg, const Params& params)
        : start_(std::chrono::steady_clock::now()), stage_(std::move(stage)) {
        doc_["stage"] = stage_;
        doc_["config_sha256"] = cfg.file_sha256;
        doc_["params"] = params.effective();
    }

    void input(const std::filesystem::path& path) {
        if (std::filesystem::is_directory(path)) {
            json entries = json::object();
            std::vector<std::filesystem::path> files;
            for (const auto& e : std::filesystem::directory_iterator(path))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) entries[f.filename().string()] = sha256_file_hex(f);
            doc_["inputs"][path.generic_string()] = entries;
        } else {
            doc_["inputs"][path.generic_string()] = sha256_file_hex(path);
        }
    }

    void output(const std::filesystem::path& path) { outputs_.push_back(path); }

    void write(const std::filesystem::path& primary_output) {
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start_);
        doc_["duration_ms"] = elapsed.count();
        json outs = json::object();
        for (const auto& p : outputs_) outs[p.generic_string()] = sha256_file_hex(p);
        doc_["outputs"] = outs;
        io::write_file(primary_output.string() + ".run.json", doc_.dump(2) + "\n");
    }

  private:
    std::chrono::steady_clock::time_point start_;
    std::string stage_;
    json doc_;
    std::vector<std::filesystem::path> outputs_;
};

void require_file(const std::filesystem::path& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw InputError(what + " not found: " + path.string());
}

struct ClientBundle {
    std::unique_ptr<llm::Backend> backend;
    std::unique_ptr<llm::LlmClient> client;
};

ClientBundle make_client(const config::ParsedConfig& cfg) {
    auto kind = cfg.get("pipeline", "backend");
    if (!kind)
        throw ConfigError("this stage calls a model backend; set [pipeline] backend to "
                          "'scripted' or 'remote'");
    ClientBundle bundle;
    if (*kind == "scripted") {
        auto script = cfg.get("pipeline", "script");
        if (!script) throw ConfigError("[pipeline] scripted backend requires 'script'");
        require_file(*script, "backend script");
        json parsed = json::parse(io::read_file(*script), nullptr, false);
        if (parsed.is_discarded())
            throw ConfigError("could not parse backend script " + *script);
        bundle.backend = std::make_unique<llm::ScriptedBackend>(parsed);
    } else if (*kind == "remote") {
        auto base_url = cfg.get("pipeline", "base_url");
        if (!base_url) throw ConfigError("[pipeline] remote backend requires 'base_url'");
        bundle.backend = std::make_unique<llm::RemoteBackend>(
            llm::RemoteBackend::options_from_env(*base_url));
    } else {
        throw ConfigError("[pipeline] backend must be 'scripted' or 'remote'");
    }

    llm::LlmClient::Options options;
    auto u64 = [&](const char* key, std::uint64_t def) {
        auto v = cfg.get("pipeline", key);
        return v ? std::stoull(*v) : def;
    };
    options.retry.max_attempts = static_cast<int>(u64("retry_max_attempts", 5));
    options.retry.base_delay = std::chrono::milliseconds(u64("retry_base_ms", 1000));
    if (auto f = cfg.get("pipeline", "retry_factor"))
        options.retry.factor = std::strtod(f->c_str(), nullptr);
    options.retry.jitter_seed = u64("jitter_seed", 0);
    options.max_in_flight = static_cast<int>(u64("max_in_flight", 8));
    if (auto log = cfg.get("pipeline", "audit_log")) options.audit_log = *log;
    bundle.client = std::make_unique<llm::LlmClient>(*bundle.backend, options);
    return bundle;
}

// qa.jsonl + "_train" -> qa_train.jsonl
std::filesystem::path derive(const std::filesystem::path& base, const std::string& suffix,
                             const std::string& new_ext = "") {
    std::filesystem::path p = base;
    std::string ext = new_ext.empty() ? p.extension().string() : new_ext;
    p.replace_extension();
    return p.string() + suffix + ext;
}

void stage_preprocess(const config::ParsedConfig& cfg, const Params& params) {
    std::filesystem::path in = params.require("in");
    std::filesystem::path out = params.require("out");
    auto min_nouns = params.u64_or("min_nouns", 2);
    require_file(in, "corpus directory");

    Manifest manifest("preprocess", cfg, params);
    manifest.input(in);

    auto corpus = text::load_corpus_dir(in);
    std::size_t chars_in = corpus.total_chars();
    auto segmented = text::segment_sentences(corpus);
    std::vector<text::Sentence> normalized;
    normalized.reserve(segmented.size());
    for (auto& s : segmented) normalized.push_back(text::normalize(std::move(s)));
    for (auto& s : normalized) s.noun_count = text::count_nouns(s, text::default_noun_tagger());
    auto kept = text::filter_low_noun(normalized, min_nouns);
    text::write_sentences(out, kept);

    std::size_t scalar_out = 0;
    {
        text::RawCorpus filtered;
        for (const auto& s : kept) filtered.documents.push_back({s.source_id, s.text});
        scalar_out = filtered.total_chars();
    }

    manifest.output(out);
    manifest.write(out);
    std::cout << "preprocess: " << corpus.documents.size() << " documents, " << chars_in
              << " chars in, " << segmented.size() << " sentences segmented, " << kept.size()
              << " kept (min nouns " << min_nouns << "), " << scalar_out << " chars out\n";
}

void stage_generate_qa(const config::ParsedConfig& cfg, const Params& params) {
    std::filesystem::path sentences_path = params.require("sentences");
    std::filesystem::path out = params.require("out");
    auto seed = params.require_u64("seed");
    double train_fraction = params.real_or("train_fraction", 0.8);
    auto subset = params.u64_or("subset", 0);  // 0 keeps every retained pair
    require_file(sentences_path, "sentence file");

    qa::ChainConfig chain;
    if (auto dir = params.find("templates")) {
        require_file(*dir, "templates directory");
        chain = qa::ChainConfig::with_templates_dir(*dir);
    } else {
        chain = qa::ChainConfig::defaults();
    }
    chain.model_id = params.get_or("model", chain.model_id);
    chain.generation_temperature =
        params.real_or("generation_temperature", chain.generation_temperature);
    chain.verification_temperature =
        params.real_or("verification_temperature", chain.verification_temperature);
    chain.retention_temperature =
        params.real_or("retention_temperature", chain.retention_temperature);
    chain.prompt_separator = params.get_or("prompt_separator", chain.prompt_separator);
    chain.completion_end = params.get_or("completion_end", chain.completion_end);
    chain.workers = static_cast<int>(params.u64_or("workers", 4));
    chain.journal = params.get_or("journal", out.string() + ".journal.jsonl");

    Manifest manifest("generate-qa", cfg, params);
    manifest.input(sentences_path);

    auto sentences = text::read_sentences(sentences_path);
    auto bundle = make_client(cfg);
    auto result = qa::run_pipeline(sentences, *bundle.client, chain);

    std::string subset_note;
    qa::QADataset dataset = std::move(result.dataset);
    if (subset > 0) {
        if (subset >= dataset.pairs.size()) {
            subset_note = "subset " + std::to_string(subset) + " >= " +
                          std::to_string(dataset.pairs.size()) + " retained pairs; kept all";
        } else {
            dataset = qa::sample_subset(dataset, subset, seed);
        }
    }
    auto split = qa::split_dataset(dataset, train_fraction, seed);

    auto pairs_path = derive(out, "_pairs");
    auto train_path = derive(out, "_train");
    auto val_path = derive(out, "_validation");
    auto dataset_manifest_path = derive(out, "_manifest", ".json");
    qa::write_finetune_file(dataset, out, chain);
    qa::write_qa_pairs(dataset, pairs_path);
    qa::write_finetune_file(split.train, train_path, chain);
    qa::write_finetune_file(split.validation, val_path, chain);

    json dm{{"corpus_hash", dataset.created_from},
            {"chain_config_hash", dataset.chain_config_hash},
            {"template_version", chain.version},
            {"seed", seed},
            {"train_fraction", train_fraction},
            {"counts",
             {{"sentences", result.counts.sentences},
              {"generated", result.counts.generated},
              {"parsed", result.counts.parsed},
              {"verified", result.counts.verified},
              {"retained", result.counts.retained},
              {"dataset", dataset.pairs.size()},
              {"train", split.train.pairs.size()},
              {"validation", split.validation.pairs.size()}}}};
    if (!subset_note.empty()) dm["subset_note"] = subset_note;
    if (!split.warning.empty()) dm["split_warning"] = split.warning;
    io::write_file(dataset_manifest_path, dm.dump(2) + "\n");

    for (const auto& p : {out, pairs_path, train_path, val_path, dataset_manifest_path})
        manifest.output(p);
    manifest.write(out);

    std::cout << "generate-qa: " << result.counts.sentences << " sentences -> "
              << result.counts.parsed << " parsed, " << result.counts.verified << " verified, "
              << result.counts.retained << " retained; dataset " << dataset.pairs.size()
              << " (train " << split.train.pairs.size() << ", validation "
              << split.validation.pairs.size() << ")\n";
    if (!subset_note.empty()) std::cout << "generate-qa: " << subset_note << "\n";
    if (!split.warning.empty()) std::cout << "generate-qa: warning: " << split.warning << "\n";
}

void stage_build_clinical(const config::ParsedConfig& cfg, const Params& params) {
    std::filesystem::path in = params.require("in");
    std::string target_name = params.require("target");
    auto target = clinical::target_from_string(target_name);
    if (!target) throw ConfigError("target must be 'rt' or 'chemo', got '" + target_name + "'");
    double train_fraction = params.real_or("train_fraction", 0.8);
    auto seed = params.require_u64("seed");
    std::filesystem::path out_dir = params.require("out_dir");
    std::string delimiter = params.get_or("delimiter", ",");
    if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
    require_file(in, "clinical table");

    clinical::SchemaConfig schema = clinical::SchemaConfig::default_schema();
    if (auto schema_path = params.find("schema")) {
        require_file(*schema_path, "schema config");
        schema = clinical::SchemaConfig::from_json_file(*schema_path);
    }

    Manifest manifest("build-clinical", cfg, params);
    manifest.input(in);

    auto loaded = clinical::load_records(in, schema, delimiter[0]);
    for (const auto& [column, count] : loaded.warnings)
        std::cout << "build-clinical: warning: " << count << " unparseable cell(s) in '" << column
                  << "'\n";

    auto build = clinical::build_target_dataset(loaded.records, *target, train_fraction, seed,
                                                out_dir, schema);
    for (const auto& p : {build.train_file, build.validation_file, build.manifest_file})
        manifest.output(p);
    manifest.write(out_dir / clinical::short_name(*target));

    std::cout << "build-clinical: " << loaded.rows << " rows, " << build.usable << " usable for "
              << clinical::to_string(*target) << " (" << build.dropped << " dropped), train "
              << build.train << ", validation " << build.validation << "\n";
}

void stage_finetune(const config::ParsedConfig& cfg, const Params& params) {
    std::filesystem::path train = params.require("train");
    std::string base_model = params.require("base_model");
    auto poll_interval = std::chrono::milliseconds(params.u64_or("poll_interval_ms", 2000));
    auto max_polls = params.u64_or("max_polls", 60);
    std::filesystem::path out = params.get_or("out", train.string() + ".finetune.json");
    require_file(train, "training file");

    Manifest manifest("finetune", cfg, params);
    manifest.input(train);

    auto bundle = make_client(cfg);
    auto job = bundle.client->create_finetune_job(train, base_model);
    std::uint64_t polls = 0;
    while (job.status != llm::JobStatus::succeeded && job.status != llm::JobStatus::failed) {
        if (polls++ >= max_polls)
            throw BackendError("fine-tune job " + job.job_id + " did not finish within " +
                               std::to_string(max_polls) + " polls",
                               true);
        if (poll_interval.count() > 0) std::this_thread::sleep_for(poll_interval);
        job = bundle.client->poll_job(job);
    }
    if (job.status == llm::JobStatus::failed)
        throw BackendError("fine-tune job " + job.job_id + " failed: " +
                               job.failure_reason.value_or("(no reason given)"),
                           false);

    json j{{"job_id", job.job_id},
           {"base_model", job.base_model},
           {"dataset_path", job.dataset_path.generic_string()},
           {"status", llm::to_string(job.status)},
           {"result_model_id", *job.result_model_id}};
    io::write_file(out, j.dump(2) + "\n");
    manifest.output(out);
    manifest.write(out);

    std::cout << "finetune: job " << job.job_id << " succeeded; model "
              << *job.result_model_id << "\n";
}

void stage_sweep(const config::ParsedConfig& cfg, const Params& params) {
    std::string model = params.require("model");
    std::filesystem::path val = params.require("val");
    double t_min = params.real_or("t_min", 0.0);
    double t_max = params.real_or("t_max", 2.0);
    double step = params.real_or("step", 0.1);
    std::filesystem::path out = params.require("out");
    std::filesystem::path matrix_out = params.get_or("matrix_out", derive(out, "_matrix", ".json").string());
    std::string name = params.get_or("name", val.stem().string());
    require_file(val, "validation file");

    Manifest manifest("sweep", cfg, params);
    manifest.input(val);

    auto bundle = make_client(cfg);
    auto curve = eval::temperature_sweep(model, val, *bundle.client, t_min, t_max, step,
                                         out.string() + ".partial.json");
    eval::write_curve(curve, out);

    const auto& best = curve.best_point();
    json j{{"target", name},
           {"model", model},
           {"temperature", best.temperature},
           {"accuracy", best.accuracy},
           {"tp", best.matrix.tp},
           {"fp", best.matrix.fp},
           {"tn", best.matrix.tn},
           {"fn", best.matrix.fn},
           {"n", best.matrix.n()}};
    io::write_file(matrix_out, j.dump(2) + "\n");

    manifest.output(out);
    manifest.output(matrix_out);
    manifest.write(out);

    std::cout << "sweep: " << curve.points.size() << " points; best T " << best.temperature
              << " accuracy " << best.accuracy << " (n " << best.matrix.n() << ")\n";
}

void stage_report(const config::ParsedConfig& cfg, const Params& params) {
    std::filesystem::path matrices = params.require("matrices");
    std::filesystem::path out = params.require("out");
    require_file(matrices, "matrices directory");

    stats::ReportParams rp;
    rp.assumed_error_rate = params.real_or("error_rate", rp.assumed_error_rate);
    rp.dataset_n = params.u64_or("dataset_n", rp.dataset_n);
    rp.dataset_p_hat = params.real_or("dataset_acc", rp.dataset_p_hat);
    rp.z = params.real_or("z", rp.z);
    std::string method = params.get_or("method", "wilson");
    if (method == "wilson")
        rp.method = stats::IntervalMethod::wilson;
    else if (method == "normal")
        rp.method = stats::IntervalMethod::normal_approximation;
    else
        throw ConfigError("method must be 'wilson' or 'normal'");

    Manifest manifest("report", cfg, params);

    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(matrices)) {
        if (!e.is_regular_file() || e.path().extension() != ".json") continue;
        if (e.path().string().ends_with(".run.json") ||
            e.path().string().ends_with(".partial.json"))
            continue;
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw InputError("no matrix files (*.json) found in " + matrices.string());

    std::map<std::string, eval::ConfusionMatrix> by_target;
    for (const auto& f : files) {
        manifest.input(f);
        json j = json::parse(io::read_file(f), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw InputError("matrix file is not a JSON object: " + f.string());
        for (const char* key : {"tp", "fp", "tn", "fn"})
            if (!j.contains(key))
                throw InputError(f.string() + ": missing count '" + key + "'");
        eval::ConfusionMatrix m{j["tp"].get<std::size_t>(), j["fp"].get<std::size_t>(),
                                j["tn"].get<std::size_t>(), j["fn"].get<std::size_t>()};
        std::string target = j.value("target", f.stem().string());
        if (by_target.count(target))
            throw InputError("duplicate target '" + target + "' in " + matrices.string());
        by_target[target] = m;
    }

    auto report = stats::build_report(by_target, rp);
    stats::write_report(report, out);
    manifest.output(out);
    manifest.write(out);

    std::cout << "report: dataset interval [" << report.dataset_interval.lo << ", "
              << report.dataset_interval.hi << "]\n";
    for (const auto& [target, tr] : report.per_target)
        std::cout << "report: " << target << " n=" << tr.n << " raw=" << tr.raw_accuracy
                  << " adjusted=" << tr.adjusted << " bounds=[" << tr.model_bounds.lo << ", "
                  << tr.model_bounds.hi << "]\n";
    std::cout << "report: outperformance range " << report.outperform_pct.first << "% to "
              << report.outperform_pct.second << "%\n";
}

}  // namespace

void run_stage(const std::string& name, const config::ParsedConfig& cfg,
               const std::map<std::string, std::string>& overrides) {
    Params params(name, cfg, overrides);
    if (name == "preprocess")
        stage_preprocess(cfg, params);
    else if (name == "generate-qa")
        stage_generate_qa(cfg, params);
    else if (name == "build-clinical")
        stage_build_clinical(cfg, params);
    else if (name == "finetune")
        stage_finetune(cfg, params);
    else if (name == "sweep")
        stage_sweep(cfg, params);
    else if (name == "report")
        stage_report(cfg, params);
    else
        throw ConfigError("unknown stage '" + name + "'");
}

}  // namespace oncopipe::stage
