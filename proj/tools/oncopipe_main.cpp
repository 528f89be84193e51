#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oncopipe/config.hpp"
#include "oncopipe/errors.hpp"
#include "oncopipe/stages.hpp"

namespace {

struct StageFlags {
    CLI::App* cmd = nullptr;
    // flag key -> captured value; only keys the user actually set are merged.
    std::map<std::string, std::string> values;
};

// Declares one string option whose value lands in flags.values under the
// config-file key (underscores), while the CLI spelling uses dashes.
void add_option(StageFlags& flags, const std::string& key, const std::string& help) {
    std::string flag_name = "--" + key;
    for (auto& c : flag_name)
        if (c == '_') c = '-';
    flags.cmd
        ->add_option_function<std::string>(
            flag_name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help)
        ->type_name("TEXT");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const oncopipe::BackendError*>(&e)) return 3;
    if (dynamic_cast<const oncopipe::InputError*>(&e)) return 2;
    return 1;  // ConfigError, invalid_argument, anything unexpected
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guideline-to-fine-tuning pipeline toolkit"};
    app.set_version_flag("--version", "oncopipe 0.1.0");
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "Pipeline configuration file (INI)")
        ->type_name("FILE");

    std::map<std::string, StageFlags> stages;

    auto make_stage = [&](const std::string& name, const std::string& description) -> StageFlags& {
        StageFlags& flags = stages[name];
        flags.cmd = app.add_subcommand(name, description);
        return flags;
    };

    {
        auto& s = make_stage("preprocess", "Segment, normalize and noun-filter a text corpus");
        add_option(s, "in", "Corpus directory (one document per file)");
        add_option(s, "out", "Sentence file to write (JSONL)");
        add_option(s, "min_nouns", "Minimum nouns per kept sentence (default 2)");
    }
    {
        auto& s = make_stage("generate-qa",
                             "Run the generation/verification/retention chains over sentences");
        add_option(s, "sentences", "Sentence file from preprocess");
        add_option(s, "out", "Fine-tuning dataset to write (JSONL)");
        add_option(s, "subset", "Sample this many retained pairs before splitting");
        add_option(s, "train_fraction", "Train fraction for the split (default 0.8)");
        add_option(s, "seed", "Seed for subset sampling and the split (required)");
        add_option(s, "model", "Model id for all three chains");
        add_option(s, "templates", "Directory overriding the embedded chain templates");
        add_option(s, "journal", "Checkpoint journal path (default <out>.journal.jsonl)");
        add_option(s, "workers", "Concurrent sentences (default 4)");
        add_option(s, "generation_temperature", "Generation chain temperature (default 0.7)");
        add_option(s, "verification_temperature", "Verification chain temperature (default 0)");
        add_option(s, "retention_temperature", "Retention chain temperature (default 0)");
        add_option(s, "prompt_separator", "Separator appended to each prompt");
        add_option(s, "completion_end", "End token appended to each completion");
    }
    {
        auto& s = make_stage("build-clinical",
                             "Build per-target fine-tuning files from a clinical table");
        add_option(s, "in", "Delimited clinical table with header row");
        add_option(s, "target", "Treatment target: rt or chemo");
        add_option(s, "train_fraction", "Train fraction for the split (default 0.8)");
        add_option(s, "seed", "Split seed (required)");
        add_option(s, "out_dir", "Output directory");
        add_option(s, "schema", "Schema config JSON (default: built-in schema)");
        add_option(s, "delimiter", "Field delimiter (default ',')");
    }
    {
        auto& s = make_stage("finetune", "Submit a fine-tune job and wait for completion");
        add_option(s, "train", "Training file (JSONL prompt/completion)");
        add_option(s, "base_model", "Base model id");
        add_option(s, "poll_interval_ms", "Delay between job polls (default 2000)");
        add_option(s, "max_polls", "Give up after this many polls (default 60)");
        add_option(s, "out", "Job result file (default <train>.finetune.json)");
    }
    {
        auto& s = make_stage("sweep", "Evaluate a classifier across a temperature grid");
        add_option(s, "model", "Model id to evaluate");
        add_option(s, "val", "Validation file (JSONL prompt/completion)");
        add_option(s, "t_min", "Lowest temperature (default 0)");
        add_option(s, "t_max", "Highest temperature (default 2)");
        add_option(s, "step", "Grid step (default 0.1)");
        add_option(s, "out", "Curve table to write (CSV)");
        add_option(s, "matrix_out", "Best-point matrix JSON (default <out>_matrix.json)");
        add_option(s, "name", "Target name recorded in the matrix file");
    }
    {
        auto& s = make_stage("report", "Wilson-interval error analysis against human labels");
        add_option(s, "matrices", "Directory of per-target matrix JSON files");
        add_option(s, "error_rate", "Assumed human-label error rate (default 0.13)");
        add_option(s, "dataset_n", "Human-labeled sample size (default 922)");
        add_option(s, "dataset_acc", "Human-label accuracy estimate (default 0.87)");
        add_option(s, "z", "Critical value (default 1.96)");
        add_option(s, "method", "Interval method: wilson or normal (default wilson)");
        add_option(s, "out", "Report file to write (JSON)");
    }

    CLI::App* validate_cmd =
        app.add_subcommand("validate-config", "Schema-check a configuration file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        oncopipe::config::ParsedConfig cfg;
        std::vector<oncopipe::config::Diagnostic> diagnostics;
        if (!config_path.empty()) {
            cfg = oncopipe::config::load_config(config_path, diagnostics);
            oncopipe::config::validate(cfg, diagnostics);
        }

        if (validate_cmd->parsed()) {
            if (config_path.empty()) throw oncopipe::ConfigError("validate-config needs --config");
            for (const auto& d : diagnostics) {
                std::cout << config_path;
                if (d.line) std::cout << ":" << d.line;
                std::cout << ": " << d.message << "\n";
            }
            if (diagnostics.empty()) {
                std::cout << config_path << ": ok\n";
                return 0;
            }
            return 1;
        }

        // A stage never starts on a config that fails validation.
        if (!diagnostics.empty()) {
            for (const auto& d : diagnostics) {
                std::cerr << config_path;
                if (d.line) std::cerr << ":" << d.line;
                std::cerr << ": " << d.message << "\n";
            }
            return 1;
        }

        for (const auto& [name, flags] : stages) {
            if (flags.cmd->parsed()) {
                oncopipe::stage::run_stage(name, cfg, flags.values);
                return 0;
            }
        }
        std::cerr << "no stage selected\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
