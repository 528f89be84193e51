#include "oncopipe/sampling_eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "oncopipe/clinical_dataset.hpp"
#include "oncopipe/errors.hpp"
#include "oncopipe/io.hpp"

namespace oncopipe::eval {

using nlohmann::json;

std::vector<double> softmax_t(std::span<const double> logits, double temperature) {
    if (temperature < 0.0) throw std::invalid_argument("temperature must be non-negative");
    for (double z : logits)
        if (!std::isfinite(z)) throw std::invalid_argument("logits must be finite");
    std::vector<double> out(logits.size(), 0.0);
    if (logits.empty()) return out;

    if (temperature == 0.0) {
        // Argmax limit; ties resolve to the lowest index.
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i)
            if (logits[i] > logits[best]) best = i;
        out[best] = 1.0;
        return out;
    }

    double max_z = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - max_z) / temperature);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double shannon_entropy(std::span<const double> probabilities) {
    double h = 0.0;
    for (double p : probabilities)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

Label classify(const std::string& model_id, const std::string& prompt, double temperature,
               llm::LlmClient& client) {
    llm::CompletionRequest request;
    request.model_id = model_id;
    request.prompt = prompt;
    request.temperature = temperature;
    request.max_tokens = 1;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto response = client.complete(request);
        auto text = io::trim(response.text);
        if (text == "1") return Label::one;
        if (text == "0") return Label::zero;
    }
    return Label::invalid;
}

namespace {

struct Example {
    std::string prompt;
    bool truth = false;
};

std::vector<Example> load_validation(const std::filesystem::path& file) {
    auto report = clinical::validate_finetune_file(file, clinical::FileKind::classification);
    if (!report.ok()) {
        const auto& first = report.diagnostics.front();
        throw InputError(file.string() + ":" + std::to_string(first.line) + ": " + first.message +
                         (report.diagnostics.size() > 1
                              ? " (+" + std::to_string(report.diagnostics.size() - 1) + " more)"
                              : ""));
    }
    std::vector<Example> examples;
    for (const auto& j : io::read_jsonl(file))
        examples.push_back({j.at("prompt").get<std::string>(),
                            j.at("completion").get<std::string>() == " 1"});
    return examples;
}

void persist_partial(const std::filesystem::path& partial_out, double temperature,
                     std::size_t processed, std::size_t total, const ConfusionMatrix& m) {
    if (partial_out.empty()) return;
    json j{{"temperature", temperature},
           {"processed", processed},
           {"total", total},
           {"matrix", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
    io::write_file(partial_out, j.dump(2) + "\n");
}

}  // namespace

EvalOutcome evaluate(const std::string& model_id, const std::filesystem::path& validation_file,
                     double temperature, llm::LlmClient& client,
                     const std::filesystem::path& partial_out) {
    auto examples = load_validation(validation_file);
    ConfusionMatrix m;
    std::size_t processed = 0;
    for (const auto& ex : examples) {
        Label predicted;
        try {
            predicted = classify(model_id, ex.prompt, temperature, client);
        } catch (const BackendError&) {
            persist_partial(partial_out, temperature, processed, examples.size(), m);
            throw;
        }
        // An invalid prediction is scored as a miss on the true label's side
        // so n stays equal to the file's record count.
        bool predicted_one = predicted == Label::one;
        if (predicted == Label::invalid) predicted_one = !ex.truth;
        if (ex.truth) {
            predicted_one ? ++m.tp : ++m.fn;
        } else {
            predicted_one ? ++m.fp : ++m.tn;
        }
        ++processed;
    }
    return {m, m.accuracy()};
}

const SweepPoint& SweepCurve::best_point() const {
    for (const auto& p : points)
        if (p.temperature == best_temperature) return p;
    throw std::logic_error("sweep curve has no best point");
}

SweepCurve temperature_sweep(const std::string& model_id,
                             const std::filesystem::path& validation_file, llm::LlmClient& client,
                             double t_min, double t_max, double step,
                             const std::filesystem::path& partial_out) {
    if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
    if (t_min < 0.0 || t_max < t_min) throw std::invalid_argument("bad temperature range");

    SweepCurve curve;
    for (int i = 0;; ++i) {
        double t = t_min + step * i;
        if (t > t_max + 1e-9) break;
        if (t > t_max) t = t_max;
        EvalOutcome outcome;
        try {
            outcome = evaluate(model_id, validation_file, t, client, partial_out);
        } catch (const BackendError&) {
            if (!partial_out.empty()) {
                SweepCurve partial = curve;
                if (!partial.points.empty()) {
                    write_curve(partial, partial_out.string() + ".curve");
                }
            }
            throw;
        }
        curve.points.push_back({t, outcome.accuracy, outcome.matrix});
    }
    if (curve.points.empty()) throw std::invalid_argument("temperature grid is empty");

    const SweepPoint* best = &curve.points.front();
    for (const auto& p : curve.points)
        if (p.accuracy > best->accuracy) best = &p;  // ties keep the lowest T
    curve.best_temperature = best->temperature;
    return curve;
}

void write_curve(const SweepCurve& curve, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "temperature,accuracy,tp,fp,tn,fn\n";
    for (const auto& p : curve.points) {
        os << p.temperature << ',' << p.accuracy << ',' << p.matrix.tp << ',' << p.matrix.fp
           << ',' << p.matrix.tn << ',' << p.matrix.fn << '\n';
    }
    io::write_file(path, os.str());
}

}  // namespace oncopipe::eval
