#include "oncopipe/config.hpp"

#include <cctype>
#include <cstdlib>
#include <set>

#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"

namespace oncopipe::config {

namespace {

enum class ValueType { string, path, u64, real, fraction, boolean };

struct KeySpec {
    ValueType type = ValueType::string;
    bool required = false;  // required whenever the section is present
};

using SectionSchema = std::map<std::string, KeySpec>;

const std::map<std::string, SectionSchema>& schema() {
    static const std::map<std::string, SectionSchema> s = {
        {"pipeline",
         {
             {"backend", {ValueType::string}},
             {"script", {ValueType::path}},
             {"base_url", {ValueType::string}},
             {"max_in_flight", {ValueType::u64}},
             {"retry_max_attempts", {ValueType::u64}},
             {"retry_base_ms", {ValueType::u64}},
             {"retry_factor", {ValueType::real}},
             {"jitter_seed", {ValueType::u64}},
             {"audit_log", {ValueType::path}},
         }},
        {"preprocess",
         {
             {"in", {ValueType::path}},
             {"out", {ValueType::path}},
             {"min_nouns", {ValueType::u64}},
         }},
        {"generate-qa",
         {
             {"sentences", {ValueType::path}},
             {"out", {ValueType::path}},
             {"subset", {ValueType::u64}},
             {"train_fraction", {ValueType::fraction}},
             {"seed", {ValueType::u64, true}},
             {"model", {ValueType::string}},
             {"templates", {ValueType::path}},
             {"journal", {ValueType::path}},
             {"workers", {ValueType::u64}},
             {"generation_temperature", {ValueType::real}},
             {"verification_temperature", {ValueType::real}},
             {"retention_temperature", {ValueType::real}},
             {"prompt_separator", {ValueType::string}},
             {"completion_end", {ValueType::string}},
         }},
        {"build-clinical",
         {
             {"in", {ValueType::path}},
             {"target", {ValueType::string}},
             {"train_fraction", {ValueType::fraction}},
             {"seed", {ValueType::u64, true}},
             {"out_dir", {ValueType::path}},
             {"schema", {ValueType::path}},
             {"delimiter", {ValueType::string}},
         }},
        {"finetune",
         {
             {"train", {ValueType::path}},
             {"base_model", {ValueType::string}},
             {"poll_interval_ms", {ValueType::u64}},
             {"max_polls", {ValueType::u64}},
             {"out", {ValueType::path}},
         }},
        {"sweep",
         {
             {"model", {ValueType::string}},
             {"val", {ValueType::path}},
             {"t_min", {ValueType::real}},
             {"t_max", {ValueType::real}},
             {"step", {ValueType::real}},
             {"out", {ValueType::path}},
             {"matrix_out", {ValueType::path}},
             {"name", {ValueType::string}},
         }},
        {"report",
         {
             {"matrices", {ValueType::path}},
             {"error_rate", {ValueType::fraction}},
             {"dataset_n", {ValueType::u64}},
             {"dataset_acc", {ValueType::fraction}},
             {"z", {ValueType::real}},
             {"method", {ValueType::string}},
             {"out", {ValueType::path}},
         }},
    };
    return s;
}

bool parse_u64(const std::string& v) {
    if (v.empty()) return false;
    for (char c : v)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

bool parse_real(const std::string& v) {
    if (v.empty()) return false;
    char* end = nullptr;
    std::strtod(v.c_str(), &end);
    return end == v.c_str() + v.size();
}

}  // namespace

std::optional<std::string> ParsedConfig::get(const std::string& section,
                                             const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"preprocess", "generate-qa", "build-clinical",
                                                   "finetune",   "sweep",       "report"};
    return names;
}

ParsedConfig parse_ini(std::string_view text, std::vector<Diagnostic>& diagnostics) {
    ParsedConfig cfg;
    std::string current;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;

        std::string_view line = io::trim(raw);
        if (line.empty() || line.front() == ';' || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                diagnostics.push_back({lineno, "malformed section header"});
                current.clear();
                continue;
            }
            current = std::string(io::trim(line.substr(1, line.size() - 2)));
            cfg.sections[current];  // a section may legitimately be empty
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            diagnostics.push_back({lineno, "expected key = value"});
            continue;
        }
        if (current.empty()) {
            diagnostics.push_back({lineno, "key outside any [section]"});
            continue;
        }
        std::string key(io::trim(line.substr(0, eq)));
        std::string value(io::trim(line.substr(eq + 1)));
        if (key.empty()) {
            diagnostics.push_back({lineno, "empty key"});
            continue;
        }
        auto [it, inserted] = cfg.sections[current].emplace(key, value);
        (void)it;
        if (!inserted)
            diagnostics.push_back({lineno, "duplicate key '" + key + "' in [" + current + "]"});
    }
    return cfg;
}

ParsedConfig load_config(const std::filesystem::path& path, std::vector<Diagnostic>& diagnostics) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    ParsedConfig cfg = parse_ini(text, diagnostics);
    cfg.file_sha256 = sha256_hex(text);
    return cfg;
}

void validate(const ParsedConfig& cfg, std::vector<Diagnostic>& diagnostics) {
    const auto& known = schema();
    for (const auto& [section, keys] : cfg.sections) {
        auto sit = known.find(section);
        if (sit == known.end()) {
            diagnostics.push_back({0, "unknown section [" + section + "]"});
            continue;
        }
        for (const auto& [key, value] : keys) {
            auto kit = sit->second.find(key);
            if (kit == sit->second.end()) {
                diagnostics.push_back({0, "unknown key '" + key + "' in [" + section + "]"});
                continue;
            }
            switch (kit->second.type) {
                case ValueType::u64:
                    if (!parse_u64(value))
                        diagnostics.push_back(
                            {0, "[" + section + "] " + key + " must be a non-negative integer"});
                    break;
                case ValueType::real:
                    if (!parse_real(value))
                        diagnostics.push_back({0, "[" + section + "] " + key + " must be a number"});
                    break;
                case ValueType::fraction: {
                    if (!parse_real(value)) {
                        diagnostics.push_back({0, "[" + section + "] " + key + " must be a number"});
                    } else {
                        double d = std::strtod(value.c_str(), nullptr);
                        if (d < 0.0 || d > 1.0)
                            diagnostics.push_back(
                                {0, "[" + section + "] " + key + " must lie in [0, 1]"});
                    }
                    break;
                }
                case ValueType::boolean:
                    if (value != "true" && value != "false")
                        diagnostics.push_back(
                            {0, "[" + section + "] " + key + " must be true or false"});
                    break;
                case ValueType::string:
                case ValueType::path:
                    if (value.empty())
                        diagnostics.push_back({0, "[" + section + "] " + key + " is empty"});
                    break;
            }
        }
        for (const auto& [key, spec] : sit->second) {
            if (spec.required && !keys.count(key))
                diagnostics.push_back(
                    {0, "[" + section + "] is missing required key '" + key + "'"});
        }
    }
    if (auto backend = cfg.get("pipeline", "backend")) {
        if (*backend != "scripted" && *backend != "remote")
            diagnostics.push_back({0, "[pipeline] backend must be 'scripted' or 'remote'"});
        if (*backend == "scripted" && !cfg.get("pipeline", "script"))
            diagnostics.push_back({0, "[pipeline] scripted backend requires 'script'"});
        if (*backend == "remote" && !cfg.get("pipeline", "base_url"))
            diagnostics.push_back({0, "[pipeline] remote backend requires 'base_url'"});
    }
    if (auto target = cfg.get("build-clinical", "target")) {
        if (*target != "rt" && *target != "chemo")
            diagnostics.push_back({0, "[build-clinical] target must be 'rt' or 'chemo'"});
    }
    if (auto method = cfg.get("report", "method")) {
        if (*method != "wilson" && *method != "normal")
            diagnostics.push_back({0, "[report] method must be 'wilson' or 'normal'"});
    }
}

}  // namespace oncopipe::config
