#include "oncopipe/clinical_dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "oncopipe/errors.hpp"
#include "oncopipe/hash.hpp"
#include "oncopipe/io.hpp"
#include "oncopipe/rng.hpp"

namespace oncopipe::clinical {

using nlohmann::json;

std::string to_string(Target t) {
    return t == Target::adjuvant_radiation ? "adjuvant_radiation" : "adjuvant_chemo";
}

std::string short_name(Target t) { return t == Target::adjuvant_radiation ? "rt" : "chemo"; }

std::optional<Target> target_from_string(std::string_view s) {
    if (s == "rt" || s == "radiation" || s == "adjuvant_radiation") return Target::adjuvant_radiation;
    if (s == "chemo" || s == "chemotherapy" || s == "adjuvant_chemo") return Target::adjuvant_chemo;
    return std::nullopt;
}

std::vector<std::string> SchemaConfig::feature_order() const {
    std::vector<std::string> order;
    order.reserve(features.size());
    for (const auto& f : features) order.push_back(f.name);
    return order;
}

std::string SchemaConfig::feature_order_hash() const {
    std::string joined;
    for (const auto& f : features) {
        joined += f.name;
        joined += '\n';
    }
    return sha256_hex(joined);
}

namespace {

FeatureSpec cat(std::string name, std::string group, std::vector<std::string> levels) {
    FeatureSpec f;
    f.name = std::move(name);
    f.kind = FeatureSpec::Kind::categorical;
    f.group = std::move(group);
    int code = 0;
    for (auto& level : levels) f.codes[level] = code++;
    return f;
}

FeatureSpec num(std::string name, std::string group) {
    FeatureSpec f;
    f.name = std::move(name);
    f.kind = FeatureSpec::Kind::numeric;
    f.group = std::move(group);
    return f;
}

}  // namespace

SchemaConfig SchemaConfig::default_schema() {
    SchemaConfig s;
    s.version = "clinical-schema/v1";
    s.id_column = "patient_id";
    s.features = {
        num("age", "demographics"),
        cat("menopausal_status", "demographics", {"pre", "peri", "post"}),
        cat("family_history", "demographics", {"no", "yes"}),
        cat("histology", "tumor", {"idc", "ilc", "dcis", "mixed", "other"}),
        cat("grade", "tumor", {"1", "2", "3"}),
        cat("tumor_stage", "tumor", {"0", "i", "ii", "iii", "iv"}),
        num("tumor_size_mm", "tumor"),
        cat("er_status", "tumor", {"negative", "positive"}),
        cat("pr_status", "tumor", {"negative", "positive"}),
        cat("her2_status", "tumor", {"negative", "positive"}),
        cat("node_status", "tumor", {"negative", "positive"}),
        cat("multifocal", "mri", {"no", "yes"}),
        cat("background_enhancement", "mri", {"minimal", "mild", "moderate", "marked"}),
        num("lesion_count", "mri"),
        num("largest_lesion_mm", "mri"),
    };
    s.target_columns = {{Target::adjuvant_radiation, "adjuvant_radiation"},
                        {Target::adjuvant_chemo, "adjuvant_chemo"}};
    s.followup_columns = {"followup_months", "recurrence", "vital_status"};
    return s;
}

SchemaConfig SchemaConfig::from_json(const json& j) {
    SchemaConfig s;
    try {
        s.version = j.at("version").get<std::string>();
        s.id_column = j.at("id_column").get<std::string>();
        for (const auto& jf : j.at("features")) {
            FeatureSpec f;
            f.name = jf.at("name").get<std::string>();
            f.group = jf.value("group", "");
            std::string kind = jf.at("kind").get<std::string>();
            if (kind == "categorical") {
                f.kind = FeatureSpec::Kind::categorical;
                for (const auto& [level, code] : jf.at("codes").items())
                    f.codes[level] = code.get<int>();
            } else if (kind == "numeric") {
                f.kind = FeatureSpec::Kind::numeric;
            } else {
                throw InputError("schema feature '" + f.name + "' has unknown kind '" + kind + "'");
            }
            s.features.push_back(std::move(f));
        }
        const auto& jt = j.at("target_columns");
        s.target_columns[Target::adjuvant_radiation] = jt.at("rt").get<std::string>();
        s.target_columns[Target::adjuvant_chemo] = jt.at("chemo").get<std::string>();
        for (const auto& c : j.value("followup_columns", json::array()))
            s.followup_columns.push_back(c.get<std::string>());
        s.missing_sentinel = j.value("missing_sentinel", s.missing_sentinel);
        s.prompt_separator = j.value("prompt_separator", s.prompt_separator);
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid schema config: ") + e.what());
    }
    if (s.features.empty()) throw InputError("schema config declares no feature columns");
    return s;
}

SchemaConfig SchemaConfig::from_json_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw InputError("could not parse schema config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::vector<std::string> parse_delimited_line(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
                ++i;
                continue;
            }
            cur += c;
            ++i;
            continue;
        }
        if (c == '"' && cur.empty()) {
            quoted = true;
            ++i;
            continue;
        }
        if (c == delimiter) {
            fields.push_back(std::move(cur));
            cur.clear();
            ++i;
            continue;
        }
        cur += c;
        ++i;
    }
    if (quoted) throw InputError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

bool is_missing_cell(const std::string& trimmed) {
    if (trimmed.empty()) return true;
    std::string low = io::lower(trimmed);
    return low == "na" || low == "n/a" || low == "unknown" || low == "?" || low == "null";
}

std::optional<bool> parse_bool_cell(const std::string& trimmed) {
    std::string low = io::lower(trimmed);
    if (low == "1" || low == "yes" || low == "y" || low == "true") return true;
    if (low == "0" || low == "no" || low == "n" || low == "false") return false;
    return std::nullopt;
}

bool parses_as_number(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(begin, &end);
    (void)v;
    return end == begin + s.size() && end != begin && errno != ERANGE;
}

}  // namespace

LoadResult load_records(const std::filesystem::path& path, const SchemaConfig& schema,
                        char delimiter) {
    LoadResult result;
    std::vector<std::string> header;
    std::map<std::string, std::size_t> col;
    std::set<std::string> seen_ids;

    std::map<Target, std::string> target_cols = schema.target_columns;
    std::set<std::string> followup(schema.followup_columns.begin(), schema.followup_columns.end());
    std::map<std::string, const FeatureSpec*> feature_by_name;
    for (const auto& f : schema.features) feature_by_name[f.name] = &f;

    io::for_each_line(path, [&](std::size_t lineno, std::string_view raw) {
        std::string line(raw);
        if (io::trim(line).empty()) return;
        auto fields = [&] {
            try {
                return parse_delimited_line(line, delimiter);
            } catch (const InputError& e) {
                throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }();
        if (header.empty()) {
            for (auto& f : fields) header.emplace_back(io::trim(f));
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (col.count(header[i]))
                    throw InputError(path.string() + ": duplicate column '" + header[i] + "'");
                col[header[i]] = i;
            }
            auto require = [&](const std::string& name) {
                if (!col.count(name))
                    throw InputError(path.string() + ": missing required column '" + name + "'");
            };
            require(schema.id_column);
            for (const auto& f : schema.features) require(f.name);
            for (const auto& [t, name] : target_cols) require(name);
            for (const auto& h : header) {
                if (h == schema.id_column || feature_by_name.count(h) || followup.count(h))
                    continue;
                bool is_target = false;
                for (const auto& [t, name] : target_cols)
                    if (h == name) is_target = true;
                if (!is_target)
                    throw InputError(path.string() + ": unexpected column '" + h + "'");
            }
            return;
        }
        if (fields.size() != header.size())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        ++result.rows;
        ClinicalRecord rec;
        rec.patient_id = io::trim(fields[col[schema.id_column]]);
        if (rec.patient_id.empty())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": empty patient id");
        if (!seen_ids.insert(rec.patient_id).second)
            throw InputError(path.string() + ":" + std::to_string(lineno) +
                             ": duplicate patient id '" + rec.patient_id + "'");

        for (const auto& f : schema.features) {
            std::string cell(io::trim(fields[col[f.name]]));
            if (is_missing_cell(cell)) continue;
            if (f.kind == FeatureSpec::Kind::categorical) {
                std::string low = io::lower(cell);
                if (!f.codes.count(low)) {
                    ++result.warnings[f.name];
                    continue;
                }
                rec.values[f.name] = low;
            } else {
                if (!parses_as_number(cell)) {
                    ++result.warnings[f.name];
                    continue;
                }
                rec.values[f.name] = cell;
            }
        }
        for (const auto& [t, name] : target_cols) {
            std::string cell(io::trim(fields[col[name]]));
            std::optional<bool> value;
            if (!is_missing_cell(cell)) {
                value = parse_bool_cell(cell);
                if (!value) ++result.warnings[name];
            }
            if (t == Target::adjuvant_radiation)
                rec.adjuvant_radiation = value;
            else
                rec.adjuvant_chemo = value;
        }
        for (const auto& name : schema.followup_columns) {
            auto it = col.find(name);
            if (it == col.end()) continue;
            std::string cell(io::trim(fields[it->second]));
            if (!is_missing_cell(cell)) rec.followup[name] = cell;
        }
        result.records.push_back(std::move(rec));
    });

    if (header.empty()) throw InputError(path.string() + ": empty table");
    return result;
}

namespace {

std::string format_numeric(const std::string& cell) {
    double v = std::strtod(cell.c_str(), nullptr);
    double rounded = std::nearbyint(v);
    if (std::abs(v - rounded) < 1e-9 && std::abs(v) < 1e15) {
        std::ostringstream os;
        os << static_cast<long long>(rounded);
        return os.str();
    }
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

FineTuneExample textualize(const ClinicalRecord& record, Target target,
                           const std::vector<std::string>& feature_order,
                           const SchemaConfig& schema) {
    auto label = record.target(target);
    if (!label)
        throw InputError("record '" + record.patient_id + "' lacks a " + to_string(target) +
                         " label");
    std::map<std::string, const FeatureSpec*> by_name;
    for (const auto& f : schema.features) by_name[f.name] = &f;

    std::string body;
    for (std::size_t i = 0; i < feature_order.size(); ++i) {
        const auto& name = feature_order[i];
        auto fit = by_name.find(name);
        if (fit == by_name.end()) throw InputError("unknown feature '" + name + "' in order");
        if (i) body += ", ";
        auto vit = record.values.find(name);
        if (vit == record.values.end()) {
            body += schema.missing_sentinel;
            continue;
        }
        if (fit->second->kind == FeatureSpec::Kind::categorical)
            body += std::to_string(fit->second->codes.at(vit->second));
        else
            body += format_numeric(vit->second);
    }

    FineTuneExample ex;
    ex.prompt = "[" + body + "]" + schema.prompt_separator;
    ex.completion = *label ? " 1" : " 0";
    ex.patient_id = record.patient_id;
    ex.target = target;
    return ex;
}

DatasetBuild build_target_dataset(const std::vector<ClinicalRecord>& records, Target target,
                                  double train_fraction, std::uint64_t seed,
                                  const std::filesystem::path& out_dir,
                                  const SchemaConfig& schema) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0, 1)");

    std::vector<const ClinicalRecord*> usable;
    for (const auto& r : records)
        if (r.target(target).has_value()) usable.push_back(&r);

    DatasetBuild build;
    build.input = records.size();
    build.usable = usable.size();
    build.dropped = records.size() - usable.size();
    if (usable.size() < 10)
        throw InputError("only " + std::to_string(usable.size()) + " records carry a " +
                         to_string(target) + " label; need at least 10");

    auto order = rng::shuffled_indices(usable.size(), seed);
    auto train_n = static_cast<std::size_t>(std::lround(train_fraction * usable.size()));
    if (train_n == 0 || train_n >= usable.size())
        throw InputError("split leaves an empty train or validation set (n=" +
                         std::to_string(usable.size()) + ")");
    build.train = train_n;
    build.validation = usable.size() - train_n;

    auto feature_order = schema.feature_order();
    auto emit = [&](std::size_t begin, std::size_t end) {
        std::vector<json> lines;
        lines.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            auto ex = textualize(*usable[order[i]], target, feature_order, schema);
            lines.push_back(json{{"prompt", ex.prompt}, {"completion", ex.completion}});
        }
        return lines;
    };

    std::string prefix = short_name(target);
    build.train_file = out_dir / (prefix + "_train.jsonl");
    build.validation_file = out_dir / (prefix + "_validation.jsonl");
    build.manifest_file = out_dir / (prefix + "_manifest.json");
    io::write_jsonl(build.train_file, emit(0, train_n));
    io::write_jsonl(build.validation_file, emit(train_n, usable.size()));

    json manifest{
        {"target", to_string(target)},
        {"schema_version", schema.version},
        {"feature_order_hash", schema.feature_order_hash()},
        {"seed", seed},
        {"train_fraction", train_fraction},
        {"counts",
         {{"input", build.input},
          {"usable", build.usable},
          {"dropped", build.dropped},
          {"train", build.train},
          {"validation", build.validation}}},
        {"files",
         {{"train",
           {{"path", build.train_file.filename().string()},
            {"sha256", sha256_file_hex(build.train_file)}}},
          {"validation",
           {{"path", build.validation_file.filename().string()},
            {"sha256", sha256_file_hex(build.validation_file)}}}}},
    };
    io::write_file(build.manifest_file, manifest.dump(2) + "\n");
    return build;
}

ValidationReport validate_finetune_file(const std::filesystem::path& path, FileKind kind) {
    ValidationReport report;
    if (!std::filesystem::exists(path)) {
        report.diagnostics.push_back({0, "file does not exist: " + path.string()});
        return report;
    }
    io::for_each_line(path, [&](std::size_t lineno, std::string_view raw) {
        std::string line(raw);
        if (io::trim(line).empty()) {
            report.diagnostics.push_back({lineno, "blank line"});
            return;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            report.diagnostics.push_back({lineno, "not valid JSON"});
            return;
        }
        if (!j.is_object()) {
            report.diagnostics.push_back({lineno, "record is not a JSON object"});
            return;
        }
        bool shape_ok = true;
        for (const auto& key : {"prompt", "completion"}) {
            if (!j.contains(key) || !j[key].is_string()) {
                report.diagnostics.push_back(
                    {lineno, std::string("missing string field '") + key + "'"});
                shape_ok = false;
            }
        }
        for (const auto& [key, value] : j.items()) {
            if (key != "prompt" && key != "completion") {
                report.diagnostics.push_back({lineno, "unexpected field '" + key + "'"});
                shape_ok = false;
            }
        }
        if (!shape_ok) return;
        if (j["prompt"].get<std::string>().empty()) {
            report.diagnostics.push_back({lineno, "empty prompt"});
            return;
        }
        if (kind == FileKind::classification) {
            std::string completion = j["completion"].get<std::string>();
            if (completion != " 1" && completion != " 0") {
                report.diagnostics.push_back(
                    {lineno, "completion must be \" 1\" or \" 0\", got \"" + completion + "\""});
                return;
            }
        }
        ++report.records;
    });
    if (report.records == 0 && report.diagnostics.empty())
        report.diagnostics.push_back({0, "file contains no records"});
    return report;
}

}  // namespace oncopipe::clinical
