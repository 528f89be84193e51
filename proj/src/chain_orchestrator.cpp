#include "oncopipe/chain_orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"
#include "oncopipe/rng.hpp"

namespace oncopipe::qa {

using nlohmann::json;

bool QAPair::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

namespace {

const char* kGenerationTemplate =
    "You are preparing fine-tuning data from clinical oncology guidelines.\n"
    "Rewrite the sentence below as one question and its answer.\n"
    "Reply in exactly two lines:\n"
    "Q: <question>\n"
    "A: <answer>\n"
    "\n"
    "Sentence: {sentence}\n";

const char* kVerificationTemplate =
    "Decide whether this question/answer pair is specific, factual, and "
    "related to oncology. Overly general pairs or pairs unrelated to "
    "oncology must be rejected. Answer yes or no.\n"
    "Q: {question}\n"
    "A: {answer}\n";

const char* kRetentionTemplate =
    "Decide whether this verified pair should be kept in the fine-tuning "
    "set. Answer retain or discard.\n"
    "Q: {question}\n"
    "A: {answer}\n";

}  // namespace

ChainConfig ChainConfig::defaults() {
    ChainConfig c;
    c.version = "qa-chains/v1";
    c.generation_template = kGenerationTemplate;
    c.verification_template = kVerificationTemplate;
    c.retention_template = kRetentionTemplate;
    return c;
}

ChainConfig ChainConfig::with_templates_dir(const std::filesystem::path& dir) {
    ChainConfig c = defaults();
    c.version = "qa-chains/custom";
    c.generation_template = io::read_file(dir / "generation.txt");
    c.verification_template = io::read_file(dir / "verification.txt");
    c.retention_template = io::read_file(dir / "retention.txt");
    return c;
}

std::string ChainConfig::hash() const {
    json j{{"version", version},
           {"model_id", model_id},
           {"temperatures",
            {generation_temperature, verification_temperature, retention_temperature}},
           {"max_tokens", {generation_max_tokens, verdict_max_tokens}},
           {"templates", {generation_template, verification_template, retention_template}},
           {"prompt_separator", prompt_separator},
           {"completion_end", completion_end}};
    return sha256_hex(j.dump());
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                std::string name(tmpl.substr(i + 1, close - i - 1));
                auto it = values.find(name);
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i];
        ++i;
    }
    return out;
}

std::optional<std::pair<std::string, std::string>> parse_qa_completion(std::string_view raw) {
    auto find_marker = [&](std::string_view marker, std::size_t from) {
        // Marker must start the string or follow whitespace so 'FAQ:' or
        // 'DATA:' never counts as a marker.
        std::size_t pos = raw.find(marker, from);
        while (pos != std::string_view::npos) {
            if (pos == 0 || raw[pos - 1] == '\n' || raw[pos - 1] == ' ' || raw[pos - 1] == '\t')
                return pos;
            pos = raw.find(marker, pos + 1);
        }
        return std::string_view::npos;
    };
    std::size_t q = find_marker("Q:", 0);
    if (q == std::string_view::npos) return std::nullopt;
    std::size_t a = find_marker("A:", q + 2);
    if (a == std::string_view::npos) return std::nullopt;
    std::string question(io::trim(raw.substr(q + 2, a - q - 2)));
    std::string answer(io::trim(raw.substr(a + 2)));
    if (question.empty() || answer.empty()) return std::nullopt;
    return std::make_pair(std::move(question), std::move(answer));
}

std::optional<bool> parse_verdict(std::string_view text, std::string_view positive,
                                  std::string_view negative) {
    std::string low = io::lower(io::trim(text));
    auto leads_with = [&](std::string_view word) {
        if (low.size() < word.size() || low.compare(0, word.size(), word) != 0) return false;
        // Word boundary: end of text or a non-letter follows.
        return low.size() == word.size() || !std::isalpha(static_cast<unsigned char>(low[word.size()]));
    };
    if (leads_with(positive)) return true;
    if (leads_with(negative)) return false;
    return std::nullopt;
}

std::string corpus_hash(std::span<const text::Sentence> sentences) {
    std::string joined;
    for (const auto& s : sentences) {
        joined += s.source_id;
        joined += '\x1f';
        joined += std::to_string(s.index_in_source);
        joined += '\x1f';
        joined += s.text;
        joined += '\n';
    }
    return sha256_hex(joined);
}

QAPair generate_qa(const text::Sentence& sentence, llm::LlmClient& client,
                   const ChainConfig& config) {
    QAPair pair;
    pair.source_id = sentence.source_id;
    pair.index_in_source = sentence.index_in_source;

    llm::CompletionRequest request;
    request.model_id = config.model_id;
    request.prompt = render_template(config.generation_template, {{"sentence", sentence.text}});
    request.temperature = config.generation_temperature;
    request.max_tokens = config.generation_max_tokens;
    auto response = client.complete(request);

    pair.raw_generation = response.text;
    auto parsed = parse_qa_completion(response.text);
    if (!parsed) {
        pair.verified = false;
        pair.flags.push_back(flag_parse_failure);
        return pair;
    }
    pair.question = parsed->first;
    pair.answer = parsed->second;
    return pair;
}

QAPair verify_qa(QAPair pair, llm::LlmClient& client, const ChainConfig& config) {
    if (pair.question.empty() || pair.answer.empty())
        throw std::invalid_argument("verify_qa requires a parsed question and answer");

    llm::CompletionRequest request;
    request.model_id = config.model_id;
    request.prompt = render_template(config.verification_template,
                                     {{"question", pair.question}, {"answer", pair.answer}});
    request.temperature = config.verification_temperature;
    request.max_tokens = config.verdict_max_tokens;
    try {
        auto response = client.complete(request);
        auto verdict = parse_verdict(response.text, "yes", "no");
        if (!verdict) {
            pair.verified = false;
            pair.flags.push_back(flag_verdict_unrecognized);
        } else {
            pair.verified = *verdict;
        }
    } catch (const BackendError& e) {
        if (!e.retryable) throw;  // retries exhausted on transient failures only
        pair.verified = false;
        pair.flags.push_back(flag_backend_error);
    }
    return pair;
}

QAPair decide_retention(QAPair pair, llm::LlmClient& client, const ChainConfig& config) {
    if (!pair.verified || !*pair.verified)
        throw std::invalid_argument("decide_retention requires a verified pair");

    llm::CompletionRequest request;
    request.model_id = config.model_id;
    request.prompt = render_template(config.retention_template,
                                     {{"question", pair.question}, {"answer", pair.answer}});
    request.temperature = config.retention_temperature;
    request.max_tokens = config.verdict_max_tokens;
    try {
        auto response = client.complete(request);
        auto verdict = parse_verdict(response.text, "retain", "discard");
        if (!verdict) {
            pair.retained = false;
            pair.flags.push_back(flag_verdict_unrecognized);
        } else {
            pair.retained = *verdict;
        }
    } catch (const BackendError& e) {
        if (!e.retryable) throw;
        pair.retained = false;
        pair.flags.push_back(flag_backend_error);
    }
    return pair;
}

namespace {

json pair_to_json(const QAPair& p) {
    json j{{"question", p.question},
           {"answer", p.answer},
           {"source_id", p.source_id},
           {"index", p.index_in_source},
           {"raw_generation", p.raw_generation},
           {"flags", p.flags}};
    if (p.verified) j["verified"] = *p.verified;
    if (p.retained) j["retained"] = *p.retained;
    return j;
}

QAPair pair_from_json(const json& j) {
    QAPair p;
    p.question = j.value("question", "");
    p.answer = j.value("answer", "");
    p.source_id = j.value("source_id", "");
    p.index_in_source = j.value("index", 0ULL);
    p.raw_generation = j.value("raw_generation", "");
    for (const auto& f : j.value("flags", json::array())) p.flags.push_back(f.get<std::string>());
    if (j.contains("verified")) p.verified = j["verified"].get<bool>();
    if (j.contains("retained")) p.retained = j["retained"].get<bool>();
    return p;
}

// A journal state is settled when no further chain call can change it.
// Backend-error flags are not settled: the sentence is redone on resume.
bool settled(const QAPair& p) {
    if (p.has_flag(flag_backend_error)) return false;
    if (p.has_flag(flag_parse_failure)) return true;
    if (!p.verified) return false;
    if (!*p.verified) return true;
    return p.retained.has_value();
}

class Journal {
  public:
    Journal(std::filesystem::path path, std::string corpus, std::string config_hash)
        : path_(std::move(path)), corpus_(std::move(corpus)), config_hash_(std::move(config_hash)) {}

    // Loads settled results from a matching journal; a header mismatch or a
    // missing file starts fresh (truncating any stale journal).
    std::map<std::size_t, QAPair> load() {
        std::map<std::size_t, QAPair> done;
        bool matches = false;
        if (std::filesystem::exists(path_)) {
            bool first = true;
            for (const auto& j : io::read_jsonl(path_)) {
                if (first) {
                    first = false;
                    matches = j.value("kind", "") == "header" &&
                              j.value("corpus_hash", "") == corpus_ &&
                              j.value("chain_config_hash", "") == config_hash_;
                    if (!matches) break;
                    continue;
                }
                if (j.value("kind", "") != "pair") continue;
                auto p = pair_from_json(j);
                done[j.value("i", 0ULL)] = std::move(p);
            }
        }
        if (!matches) done.clear();

        std::filesystem::create_directories(path_.parent_path().empty()
                                                ? std::filesystem::path(".")
                                                : path_.parent_path());
        out_.open(path_, matches ? std::ios::app : std::ios::trunc);
        if (!out_) throw InputError("cannot open journal " + path_.string());
        if (!matches) {
            json header{{"kind", "header"},
                        {"corpus_hash", corpus_},
                        {"chain_config_hash", config_hash_}};
            out_ << header.dump() << '\n';
            out_.flush();
        }
        for (auto it = done.begin(); it != done.end();)
            it = settled(it->second) ? ++it : done.erase(it);
        return done;
    }

    void record(std::size_t index, const QAPair& p) {
        std::scoped_lock lock(mutex_);
        json j = pair_to_json(p);
        j["kind"] = "pair";
        j["i"] = index;
        out_ << j.dump() << '\n';
        out_.flush();
    }

  private:
    std::filesystem::path path_;
    std::string corpus_;
    std::string config_hash_;
    std::ofstream out_;
    std::mutex mutex_;
};

QAPair process_sentence(const text::Sentence& sentence, llm::LlmClient& client,
                        const ChainConfig& config) {
    QAPair pair = generate_qa(sentence, client, config);
    if (pair.has_flag(flag_parse_failure)) return pair;
    pair = verify_qa(std::move(pair), client, config);
    if (!pair.verified || !*pair.verified) return pair;
    return decide_retention(std::move(pair), client, config);
}

}  // namespace

PipelineResult run_pipeline(const std::vector<text::Sentence>& sentences, llm::LlmClient& client,
                            const ChainConfig& config) {
    PipelineResult result;
    result.counts.sentences = sentences.size();
    result.dataset.created_from = corpus_hash(sentences);
    result.dataset.chain_config_hash = config.hash();

    std::unique_ptr<Journal> journal;
    std::map<std::size_t, QAPair> done;
    if (!config.journal.empty()) {
        journal = std::make_unique<Journal>(config.journal, result.dataset.created_from,
                                            result.dataset.chain_config_hash);
        done = journal->load();
    }

    std::vector<QAPair> results(sentences.size());
    std::vector<char> have(sentences.size(), 0);
    for (auto& [i, p] : done) {
        if (i < sentences.size()) {
            results[i] = p;
            have[i] = 1;
        }
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (!stop.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= sentences.size()) break;
            if (have[i]) continue;
            try {
                QAPair pair = process_sentence(sentences[i], client, config);
                if (journal) journal->record(i, pair);
                results[i] = std::move(pair);
                have[i] = 1;
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                stop.store(true);
                break;
            }
        }
    };

    int worker_count = std::max(1, config.workers);
    if (sentences.size() <= 1 || worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(worker_count));
        for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto& p = results[i];
        ++result.counts.generated;
        if (!p.has_flag(flag_parse_failure)) ++result.counts.parsed;
        if (p.verified && *p.verified) ++result.counts.verified;
        if (p.retained && *p.retained) {
            ++result.counts.retained;
            result.dataset.pairs.push_back(p);
        }
    }
    return result;
}

QADataset sample_subset(const QADataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k > dataset.pairs.size())
        throw std::invalid_argument("subset size " + std::to_string(k) + " exceeds pair count " +
                                    std::to_string(dataset.pairs.size()));
    QADataset out;
    out.created_from = dataset.created_from;
    out.chain_config_hash = dataset.chain_config_hash;
    for (auto i : rng::sorted_sample(dataset.pairs.size(), k, seed))
        out.pairs.push_back(dataset.pairs[i]);
    return out;
}

Split split_dataset(const QADataset& dataset, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0, 1)");

    const std::size_t n = dataset.pairs.size();
    const auto train_n =
        static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
    auto order = rng::shuffled_indices(n, seed);
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(train_n));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<long>(train_n), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    Split split;
    for (auto* side : {&split.train, &split.validation}) {
        side->created_from = dataset.created_from;
        side->chain_config_hash = dataset.chain_config_hash;
    }
    for (auto i : train_idx) split.train.pairs.push_back(dataset.pairs[i]);
    for (auto i : val_idx) split.validation.pairs.push_back(dataset.pairs[i]);
    if (n > 0 && split.train.pairs.empty()) split.warning = "split produced an empty train set";
    if (n > 0 && split.validation.pairs.empty())
        split.warning = "split produced an empty validation set";
    return split;
}

void write_qa_pairs(const QADataset& dataset, const std::filesystem::path& path) {
    std::vector<json> lines;
    lines.push_back(json{{"kind", "meta"},
                         {"created_from", dataset.created_from},
                         {"chain_config_hash", dataset.chain_config_hash},
                         {"pairs", dataset.pairs.size()}});
    for (const auto& p : dataset.pairs) {
        json j = pair_to_json(p);
        j["kind"] = "pair";
        lines.push_back(std::move(j));
    }
    io::write_jsonl(path, lines);
}

QADataset read_qa_pairs(const std::filesystem::path& path) {
    QADataset dataset;
    bool saw_meta = false;
    for (const auto& j : io::read_jsonl(path)) {
        std::string kind = j.value("kind", "");
        if (kind == "meta") {
            dataset.created_from = j.value("created_from", "");
            dataset.chain_config_hash = j.value("chain_config_hash", "");
            saw_meta = true;
        } else if (kind == "pair") {
            dataset.pairs.push_back(pair_from_json(j));
        } else {
            throw InputError(path.string() + ": unknown record kind '" + kind + "'");
        }
    }
    if (!saw_meta) throw InputError(path.string() + ": missing meta record");
    return dataset;
}

void write_finetune_file(const QADataset& dataset, const std::filesystem::path& path,
                         const ChainConfig& config) {
    std::vector<json> lines;
    lines.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs)
        lines.push_back(json{{"prompt", p.question + config.prompt_separator},
                             {"completion", p.answer + config.completion_end}});
    io::write_jsonl(path, lines);
}

}  // namespace oncopipe::qa
