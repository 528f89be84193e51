#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oncopipe/sampling_eval.hpp"

namespace oncopipe::stats {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

enum class IntervalMethod { wilson, normal_approximation };

// Score interval for a binomial proportion: center (p + z^2/2n) / (1 + z^2/n),
// half-width z*sqrt(p(1-p)/n + z^2/4n^2) / (1 + z^2/n), clamped to [0, 1].
Interval wilson_interval(double p_hat, std::size_t n, double z);

// p +- z*sqrt(p(1-p)/n), clamped; kept behind the same interface as a
// cross-check method.
Interval normal_interval(double p_hat, std::size_t n, double z);

Interval proportion_interval(IntervalMethod method, double p_hat, std::size_t n, double z);

// (tp*(1-p) + tn*(1-p)) / n: raw accuracy discounted by the assumed
// human-label error rate p.
double adjusted_accuracy(std::size_t tp, std::size_t tn, std::size_t n, double p);

struct Discrepancies {
    double lower_lower = 0.0;  // dataset_lo - model_lo
    double upper_upper = 0.0;  // dataset_hi - model_hi
    double upper_lower = 0.0;  // dataset_hi - model_lo
    double lower_upper = 0.0;  // dataset_lo - model_hi
};

Discrepancies discrepancy_table(const Interval& model, const Interval& dataset);

// (min lower_upper, max upper_upper) across targets, in percent.
std::pair<double, double> outperform_range(std::span<const Discrepancies> rows);

struct TargetReport {
    std::size_t n = 0;
    double raw_accuracy = 0.0;
    double adjusted = 0.0;
    Interval model_bounds;  // (1-p) x score interval of raw accuracy
    Discrepancies discrepancies;
};

struct ReportParams {
    double assumed_error_rate = 0.13;
    std::size_t dataset_n = 922;
    double dataset_p_hat = 0.87;
    double z = 1.96;
    IntervalMethod method = IntervalMethod::wilson;
};

struct IntervalReport {
    ReportParams params;
    Interval dataset_interval;
    std::map<std::string, TargetReport> per_target;
    std::pair<double, double> outperform_pct{0.0, 0.0};
};

IntervalReport build_report(const std::map<std::string, eval::ConfusionMatrix>& cm_by_target,
                            const ReportParams& params = {});

void write_report(const IntervalReport& report, const std::filesystem::path& path);

}  // namespace oncopipe::stats
