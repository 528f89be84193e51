#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <random>

#include "oncopipe/io.hpp"
#include "oncopipe/rng.hpp"

namespace fixtures {

using nlohmann::json;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<std::uint64_t> counter{0};
    auto leaf = "oncopipe-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1));
    path_ = std::filesystem::temp_directory_path() / leaf;
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);  // best effort
}

const std::vector<std::string>& guideline_sentences() {
    static const std::vector<std::string> sentences = {
        "Tamoxifen reduces the risk of recurrence in patients with hormone "
        "receptor positive tumors.",
        "Adjuvant radiation is recommended after breast conserving surgery.",
        "Chemotherapy benefits women with node positive disease.",
        "The oncologist reviews pathology results before treatment.",
        "HER2 status guides the selection of targeted therapy.",
        "Annual mammogram screening is advised for survivors.",
        "Tumor grade and stage determine the dosage of radiotherapy.",
        "Patients with metastasis require systemic treatment options.",
        "Serum markers are monitored during each chemotherapy cycle.",
        "A biopsy confirms the diagnosis before mastectomy.",
        "Bone scans detect skeletal metastasis in advanced disease.",
    };
    return sentences;
}

void write_corpus_dir(const std::filesystem::path& dir) {
    const auto& s = guideline_sentences();
    // "It is so." carries no nouns, so the default min-nouns filter drops it.
    std::string doc_a = s[0] + " " + s[1] + " " + s[2] + " It is so.\n";
    std::string doc_b = s[3] + " " + s[4] + " " + s[5] + " " + s[6] + "\n";
    std::string doc_c = s[7] + " " + s[8] + " " + s[9] + " " + s[10] + "\n";
    oncopipe::io::write_file(dir / "guideline_a.txt", doc_a);
    oncopipe::io::write_file(dir / "guideline_b.txt", doc_b);
    oncopipe::io::write_file(dir / "guideline_c.txt", doc_c);
}

std::string question_for(std::size_t index) {
    std::string num = std::to_string(index + 1);
    if (num.size() < 2) num = "0" + num;
    return "What does guideline item i" + num + " state?";
}

json qa_script(const QaScriptSpec& spec) {
    json rules = json::array();
    if (spec.with_classifier_rules) {
        rules.push_back({{"name", "clf-peak"},
                         {"prompt_contains", " ->"},
                         {"temperature_min", 0.15},
                         {"temperature_max", 0.25},
                         {"response", " 1"}});
        rules.push_back({{"name", "clf-rest"}, {"prompt_contains", " ->"}, {"response", " 0"}});
    }
    for (std::size_t i = 0; i < spec.sentences.size(); ++i) {
        rules.push_back(
            {{"name", "gen-" + std::to_string(i)},
             {"prompt_contains", "Sentence: " + spec.sentences[i]},
             {"response", "Q: " + question_for(i) + "\nA: " + spec.sentences[i]}});
    }
    // The "item iNN state" needle appears in the question regardless of
    // which verdict chain is asking, so rule order picks the chain: a
    // verification prompt hits its verify-no rule before the yes catch-all,
    // and a discard rule only ever sees retention prompts because the yes
    // catch-all above it absorbs every verification prompt (and unverified
    // sentences never reach retention at all).
    auto needle = [](std::size_t i) {
        auto q = question_for(i);
        return q.substr(q.find("item"), q.find(" state?") + 6 - q.find("item"));
    };
    for (std::size_t i : spec.verify_no) {
        rules.push_back({{"name", "verify-no-" + std::to_string(i)},
                         {"prompt_contains", needle(i)},
                         {"response", "no"}});
    }
    rules.push_back(
        {{"name", "verify-yes"}, {"prompt_contains", "Answer yes or no."}, {"response", "yes"}});
    for (std::size_t i : spec.discard) {
        rules.push_back({{"name", "discard-" + std::to_string(i)},
                         {"prompt_contains", needle(i)},
                         {"response", "discard"}});
    }
    rules.push_back({{"name", "retain"},
                     {"prompt_contains", "retain or discard."},
                     {"response", "retain"}});

    json script{{"seed", 1},
                {"default", {{"response", "UNMATCHED PROMPT"}}},
                {"rules", rules},
                {"finetune",
                 {{"polls_to_succeed", 3}, {"result_model_id", spec.finetune_model_id}}}};
    if (spec.fail_after_requests > 0) script["fail_after_requests"] = spec.fail_after_requests;
    return script;
}

std::vector<LabeledExample> classification_examples(std::size_t n, std::size_t ones) {
    std::vector<LabeledExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"[case " + std::to_string(i) + "] ->", i < ones});
    }
    return out;
}

void write_classification_file(const std::filesystem::path& path,
                               const std::vector<LabeledExample>& examples) {
    std::vector<json> lines;
    lines.reserve(examples.size());
    for (const auto& ex : examples) {
        lines.push_back({{"prompt", ex.prompt}, {"completion", ex.truth ? " 1" : " 0"}});
    }
    oncopipe::io::write_jsonl(path, lines);
}

json prediction_script(const std::vector<LabeledExample>& examples,
                       const std::vector<bool>& predicted) {
    json rules = json::array();
    for (std::size_t i = 0; i < examples.size(); ++i) {
        rules.push_back({{"name", "ex-" + std::to_string(i)},
                         {"prompt_equals", examples[i].prompt},
                         {"response", predicted[i] ? " 1" : " 0"}});
    }
    return json{{"seed", 3}, {"rules", rules}, {"default", {{"response", " 0"}}}};
}

std::string clinical_csv(const CsvSpec& spec) {
    static const char* header =
        "patient_id,age,menopausal_status,family_history,histology,grade,tumor_stage,"
        "tumor_size_mm,er_status,pr_status,her2_status,node_status,multifocal,"
        "background_enhancement,lesion_count,largest_lesion_mm,"
        "adjuvant_radiation,adjuvant_chemo,followup_months,recurrence,vital_status";

    static const std::vector<std::string> menopausal = {"pre", "peri", "post"};
    static const std::vector<std::string> yesno = {"no", "yes"};
    static const std::vector<std::string> histology = {"idc", "ilc", "dcis", "mixed", "other"};
    static const std::vector<std::string> grade = {"1", "2", "3"};
    static const std::vector<std::string> stage = {"0", "i", "ii", "iii", "iv"};
    static const std::vector<std::string> posneg = {"negative", "positive"};
    static const std::vector<std::string> enhancement = {"minimal", "mild", "moderate", "marked"};
    static const std::vector<std::string> vital = {"alive", "deceased"};

    std::mt19937_64 gen(spec.seed);
    auto pick = [&](const std::vector<std::string>& levels) {
        return levels[oncopipe::rng::bounded(gen, levels.size())];
    };
    auto number = [&](std::uint64_t lo, std::uint64_t hi) {
        return std::to_string(lo + oncopipe::rng::bounded(gen, hi - lo + 1));
    };

    std::string out = std::string(header) + "\n";
    for (std::size_t i = 0; i < spec.rows; ++i) {
        std::string id = "P" + std::to_string(10000 + i);
        bool blank_rt = i < spec.missing_rt || i >= spec.rows - spec.missing_both;
        bool blank_chemo = (i >= spec.missing_rt && i < spec.missing_rt + spec.missing_chemo) ||
                           i >= spec.rows - spec.missing_both;
        out += id;
        out += "," + number(30, 79);
        out += "," + pick(menopausal);
        out += "," + pick(yesno);
        out += "," + pick(histology);
        out += "," + pick(grade);
        out += "," + pick(stage);
        out += "," + number(5, 60);
        out += "," + pick(posneg);
        out += "," + pick(posneg);
        out += "," + pick(posneg);
        out += "," + pick(posneg);
        out += "," + pick(yesno);
        out += "," + pick(enhancement);
        out += "," + number(1, 4);
        out += "," + number(4, 55);
        // Draw both labels before blanking so the remaining columns line up
        // identically across spec variants with the same seed.
        std::string rt = number(0, 1);
        std::string chemo = number(0, 1);
        out += "," + (blank_rt ? std::string() : rt);
        out += "," + (blank_chemo ? std::string() : chemo);
        out += "," + number(6, 120);
        out += "," + number(0, 1);
        out += "," + pick(vital);
        out += "\n";
    }
    return out;
}

void write_clinical_csv(const std::filesystem::path& path, const CsvSpec& spec) {
    oncopipe::io::write_file(path, clinical_csv(spec));
}

}  // namespace fixtures
