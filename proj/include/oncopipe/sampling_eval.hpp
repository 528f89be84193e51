#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "oncopipe/llm_client.hpp"

namespace oncopipe::eval {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t n() const { return tp + fp + tn + fn; }
    double accuracy() const {
        return n() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n());
    }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Temperature-parameterized softmax over logits. T > 0 uses the
/// max-subtracted exponential form; T = 0 is the argmax limit (one-hot,
/// lowest index on ties). Negative T throws.
std::vector<double> softmax_t(std::span<const double> logits, double temperature);

double shannon_entropy(std::span<const double> probabilities);

enum class Label { zero, one, invalid };

/// One-token completion at the given temperature mapped to a binary label
/// by trimmed exact match; one retry on an invalid reply, then invalid.
Label classify(const std::string& model_id, const std::string& prompt, double temperature,
               llm::LlmClient& client);

struct EvalOutcome {
    ConfusionMatrix matrix;
    double accuracy = 0.0;
};

/// Runs classify over a classification fine-tune file. Invalid predictions
/// count as incorrect on the true label's side so n stays fixed. A backend
/// failure aborts after persisting partial counts to partial_out (when set).
EvalOutcome evaluate(const std::string& model_id, const std::filesystem::path& validation_file,
                     double temperature, llm::LlmClient& client,
                     const std::filesystem::path& partial_out = {});

struct SweepPoint {
    double temperature = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix matrix;
};

struct SweepCurve {
    std::vector<SweepPoint> points;
    double best_temperature = 0.0;

    const SweepPoint& best_point() const;
};

SweepCurve temperature_sweep(const std::string& model_id,
                             const std::filesystem::path& validation_file, llm::LlmClient& client,
                             double t_min = 0.0, double t_max = 2.0, double step = 0.1,
                             const std::filesystem::path& partial_out = {});

// Delimited curve table: temperature,accuracy,tp,fp,tn,fn
void write_curve(const SweepCurve& curve, const std::filesystem::path& path);

}  // namespace oncopipe::eval
