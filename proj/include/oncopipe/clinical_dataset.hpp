#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace oncopipe::clinical {

enum class Target { adjuvant_radiation, adjuvant_chemo };

std::string to_string(Target t);
std::string short_name(Target t);  // "rt" / "chemo"
std::optional<Target> target_from_string(std::string_view s);

struct FeatureSpec {
    enum class Kind { categorical, numeric };
    std::string name;
    Kind kind = Kind::categorical;
    std::map<std::string, int> codes;  // categorical level -> canonical code
    std::string group;                 // demographics / tumor / mri
};

/// Versioned description of the clinical table: feature columns with their
/// canonical integer encodings, the two target columns and the follow-up
/// columns that must never reach a prompt.
struct SchemaConfig {
    std::string version;
    std::string id_column;
    std::vector<FeatureSpec> features;
    std::map<Target, std::string> target_columns;
    std::vector<std::string> followup_columns;
    std::string missing_sentinel = "-1";
    std::string prompt_separator = " ->";

    std::vector<std::string> feature_order() const;
    std::string feature_order_hash() const;

    static SchemaConfig default_schema();
    static SchemaConfig from_json(const nlohmann::json& j);
    static SchemaConfig from_json_file(const std::filesystem::path& path);
};

struct ClinicalRecord {
    std::string patient_id;
    // feature column -> canonical trimmed cell; missing values are absent keys
    std::map<std::string, std::string> values;
    std::optional<bool> adjuvant_radiation;
    std::optional<bool> adjuvant_chemo;
    std::map<std::string, std::string> followup;

    std::optional<bool> target(Target t) const {
        return t == Target::adjuvant_radiation ? adjuvant_radiation : adjuvant_chemo;
    }
    bool usable() const { return adjuvant_radiation.has_value() || adjuvant_chemo.has_value(); }
};

struct LoadResult {
    std::vector<ClinicalRecord> records;
    std::map<std::string, std::size_t> warnings;  // column -> unparseable cell count
    std::size_t rows = 0;
};

/// Delimited table with a header row matching the schema. Unparseable cells
/// become unknown and are counted per column; a missing mandatory column or
/// a duplicate patient_id is an error.
LoadResult load_records(const std::filesystem::path& path, const SchemaConfig& schema,
                        char delimiter = ',');

struct FineTuneExample {
    std::string prompt;
    std::string completion;  // " 1" or " 0"
    std::string patient_id;
    Target target = Target::adjuvant_radiation;
};

/// Bracketed feature array in feature_order with categorical values as
/// canonical codes and missing values as the sentinel; target and follow-up
/// columns are structurally excluded.
FineTuneExample textualize(const ClinicalRecord& record, Target target,
                           const std::vector<std::string>& feature_order,
                           const SchemaConfig& schema);

struct DatasetBuild {
    std::filesystem::path train_file;
    std::filesystem::path validation_file;
    std::filesystem::path manifest_file;
    std::size_t input = 0;
    std::size_t usable = 0;
    std::size_t dropped = 0;
    std::size_t train = 0;
    std::size_t validation = 0;
};

DatasetBuild build_target_dataset(const std::vector<ClinicalRecord>& records, Target target,
                                  double train_fraction, std::uint64_t seed,
                                  const std::filesystem::path& out_dir,
                                  const SchemaConfig& schema);

enum class FileKind { generic, classification };

struct Diagnostic {
    std::size_t line = 0;
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;
    std::size_t records = 0;
    bool ok() const { return diagnostics.empty(); }
};

/// One JSON record per line with exactly the fields prompt/completion;
/// classification files additionally restrict completions to the binary
/// label alphabet. Failures are reported, never thrown.
ValidationReport validate_finetune_file(const std::filesystem::path& path,
                                        FileKind kind = FileKind::generic);

// Exposed for tests; RFC4180-style quoting without embedded newlines.
std::vector<std::string> parse_delimited_line(std::string_view line, char delimiter);

}  // namespace oncopipe::clinical
