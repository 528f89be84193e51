#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oncopipe::config {

struct Diagnostic {
    std::size_t line = 0;
    std::string message;
};

/// Flat key = value sections, strict: the schema below is the whole
/// vocabulary, unknown sections or keys are diagnostics, seeds must be
/// explicit wherever a stage draws randomness.
struct ParsedConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::string file_sha256;  // empty for in-memory configs

    bool has_section(const std::string& name) const { return sections.count(name) != 0; }
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
};

// Structural problems (bad section headers, lines without '=', duplicate
// keys) are reported through diagnostics, never thrown.
ParsedConfig parse_ini(std::string_view text, std::vector<Diagnostic>& diagnostics);

ParsedConfig load_config(const std::filesystem::path& path, std::vector<Diagnostic>& diagnostics);

// Schema check: section/key vocabulary, value types, required seeds,
// backend selection. Appends to diagnostics.
void validate(const ParsedConfig& cfg, std::vector<Diagnostic>& diagnostics);

// The known stage names, in pipeline order.
const std::vector<std::string>& stage_names();

}  // namespace oncopipe::config
