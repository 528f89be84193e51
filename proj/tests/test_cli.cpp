#include <doctest.h>

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "fixtures.hpp"
#include "oncopipe/io.hpp"

using namespace oncopipe;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string output;  // stdout and stderr combined
};

CliResult run_cli(const fixtures::TempDir& dir, const std::string& args) {
    static std::atomic<int> counter{0};
    auto out_path = dir / ("cli_out_" + std::to_string(counter.fetch_add(1)) + ".txt");
    std::string cmd = "cd \"" + dir.path().string() + "\" && \"" + ONCOPIPE_CLI_PATH + "\" " +
                      args + " > \"" + out_path.string() + "\" 2>&1";
    int status = std::system(cmd.c_str());
    CliResult result;
    if (WIFEXITED(status)) result.code = WEXITSTATUS(status);
    if (std::filesystem::exists(out_path)) result.output = io::read_file(out_path);
    return result;
}

}  // namespace

TEST_CASE("cli reports its version and rejects missing or unknown stages") {
    fixtures::TempDir tmp("cli-basic");
    auto version = run_cli(tmp, "--version");
    CHECK(version.code == 0);
    CHECK(version.output.find("oncopipe 0.1.0") != std::string::npos);

    CHECK(run_cli(tmp, "").code == 1);
    CHECK(run_cli(tmp, "frobnicate").code == 1);
    auto help = run_cli(tmp, "--help");
    CHECK(help.code == 0);
    CHECK(help.output.find("preprocess") != std::string::npos);
    CHECK(help.output.find("validate-config") != std::string::npos);
}

TEST_CASE("validate-config prints line-anchored diagnostics or an ok line") {
    fixtures::TempDir tmp("cli-validate");
    io::write_file(tmp / "good.ini", "[preprocess]\nin = corpus\nout = s.jsonl\n");
    auto ok = run_cli(tmp, "--config good.ini validate-config");
    CHECK(ok.code == 0);
    CHECK(ok.output.find("good.ini: ok") != std::string::npos);

    io::write_file(tmp / "typo.ini", "[preprocess]\nmin_nuns = 2\n");
    auto typo = run_cli(tmp, "--config typo.ini validate-config");
    CHECK(typo.code == 1);
    CHECK(typo.output.find("unknown key 'min_nuns' in [preprocess]") != std::string::npos);

    io::write_file(tmp / "broken.ini", "[preprocess]\nin = corpus\njust words\n");
    auto broken = run_cli(tmp, "--config broken.ini validate-config");
    CHECK(broken.code == 1);
    CHECK(broken.output.find("broken.ini:3: expected key = value") != std::string::npos);

    auto configless = run_cli(tmp, "validate-config");
    CHECK(configless.code == 1);
    CHECK(configless.output.find("validate-config needs --config") != std::string::npos);

    auto missing = run_cli(tmp, "--config nowhere.ini validate-config");
    CHECK(missing.code == 1);
    CHECK(missing.output.find("cannot read config") != std::string::npos);
}

TEST_CASE("preprocess runs end to end from a config file") {
    fixtures::TempDir tmp("cli-preprocess");
    fixtures::write_corpus_dir(tmp / "corpus");
    io::write_file(tmp / "config.ini",
                   "[preprocess]\nin = corpus\nout = sentences.jsonl\nmin_nouns = 2\n");

    auto run = run_cli(tmp, "--config config.ini preprocess");
    CHECK(run.code == 0);
    CHECK(run.output.find("11 kept") != std::string::npos);
    REQUIRE(std::filesystem::exists(tmp / "sentences.jsonl"));
    CHECK(io::read_jsonl(tmp / "sentences.jsonl").size() == 11);
    CHECK(std::filesystem::exists(tmp / "sentences.jsonl.run.json"));  // stage manifest

    // A flag set on the command line beats the config file.
    auto flagged = run_cli(tmp, "--config config.ini preprocess --out other.jsonl");
    CHECK(flagged.code == 0);
    CHECK(std::filesystem::exists(tmp / "other.jsonl"));
}

TEST_CASE("missing input directories exit with the data error code") {
    fixtures::TempDir tmp("cli-missing");
    io::write_file(tmp / "config.ini", "[preprocess]\nin = nowhere\nout = s.jsonl\n");
    auto run = run_cli(tmp, "--config config.ini preprocess");
    CHECK(run.code == 2);
    CHECK(run.output.find("nowhere") != std::string::npos);
}

TEST_CASE("a config that fails validation stops before any stage work") {
    fixtures::TempDir tmp("cli-seedless");
    io::write_file(tmp / "config.ini",
                   "[generate-qa]\nsentences = s.jsonl\nout = qa.jsonl\n");
    auto run = run_cli(tmp, "--config config.ini generate-qa");
    CHECK(run.code == 1);
    CHECK(run.output.find("missing required key 'seed'") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(tmp / "qa.jsonl"));
}

TEST_CASE("model-calling stages demand an explicit backend selection") {
    fixtures::TempDir tmp("cli-backendless");
    io::write_file(tmp / "s.jsonl",
                   "{\"text\": \"Chemotherapy benefits patients.\", \"source_id\": \"d\", "
                   "\"index\": 0, \"noun_count\": 2}\n");
    io::write_file(tmp / "config.ini",
                   "[generate-qa]\nsentences = s.jsonl\nout = qa.jsonl\nseed = 1\n");
    auto run = run_cli(tmp, "--config config.ini generate-qa");
    CHECK(run.code == 1);
    CHECK(run.output.find("[pipeline] backend") != std::string::npos);
}

TEST_CASE("backend failures surface as exit code 3") {
    fixtures::TempDir tmp("cli-backend");
    auto examples = fixtures::classification_examples(2, 1);
    fixtures::write_classification_file(tmp / "val.jsonl", examples);
    json script{{"default", {{"response", " 1"}}}, {"fail_after_requests", 1}};
    io::write_file(tmp / "script.json", script.dump(2) + "\n");
    io::write_file(tmp / "config.ini",
                   "[pipeline]\n"
                   "backend = scripted\n"
                   "script = script.json\n"
                   "retry_max_attempts = 1\n"
                   "\n"
                   "[sweep]\n"
                   "model = clf\n"
                   "val = val.jsonl\n"
                   "out = curve.csv\n");
    auto run = run_cli(tmp, "--config config.ini sweep");
    CHECK(run.code == 3);
    CHECK(run.output.find("error:") != std::string::npos);
}
