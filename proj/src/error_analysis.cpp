#include "oncopipe/error_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "oncopipe/io.hpp"

namespace oncopipe::stats {

using nlohmann::json;

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

void check_proportion_args(double p_hat, std::size_t n, double z) {
    if (n == 0) throw std::invalid_argument("interval requires n > 0");
    if (!(p_hat >= 0.0 && p_hat <= 1.0))
        throw std::invalid_argument("p_hat must lie in [0, 1]");
    if (!(z > 0.0)) throw std::invalid_argument("z must be positive");
}

}  // namespace

Interval wilson_interval(double p_hat, std::size_t n, double z) {
    check_proportion_args(p_hat, n, z);
    const double nd = static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nd;
    const double center = (p_hat + z2 / (2.0 * nd)) / denom;
    const double half =
        z * std::sqrt(p_hat * (1.0 - p_hat) / nd + z2 / (4.0 * nd * nd)) / denom;
    return {clamp01(center - half), clamp01(center + half)};
}

Interval normal_interval(double p_hat, std::size_t n, double z) {
    check_proportion_args(p_hat, n, z);
    const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
    return {clamp01(p_hat - half), clamp01(p_hat + half)};
}

Interval proportion_interval(IntervalMethod method, double p_hat, std::size_t n, double z) {
    return method == IntervalMethod::wilson ? wilson_interval(p_hat, n, z)
                                            : normal_interval(p_hat, n, z);
}

double adjusted_accuracy(std::size_t tp, std::size_t tn, std::size_t n, double p) {
    if (n == 0) throw std::invalid_argument("adjusted_accuracy requires n > 0");
    if (tp + tn > n) throw std::invalid_argument("tp + tn exceeds n");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("error rate must lie in [0, 1]");
    return (1.0 - p) * static_cast<double>(tp + tn) / static_cast<double>(n);
}

Discrepancies discrepancy_table(const Interval& model, const Interval& dataset) {
    if (model.lo > model.hi || dataset.lo > dataset.hi)
        throw std::invalid_argument("interval bounds out of order");
    Discrepancies d;
    d.lower_lower = dataset.lo - model.lo;
    d.upper_upper = dataset.hi - model.hi;
    d.upper_lower = dataset.hi - model.lo;
    d.lower_upper = dataset.lo - model.hi;
    return d;
}

std::pair<double, double> outperform_range(std::span<const Discrepancies> rows) {
    if (rows.empty()) throw std::invalid_argument("outperform_range requires at least one row");
    double min_lu = rows[0].lower_upper;
    double max_uu = rows[0].upper_upper;
    for (const auto& r : rows) {
        min_lu = std::min(min_lu, r.lower_upper);
        max_uu = std::max(max_uu, r.upper_upper);
    }
    return {100.0 * min_lu, 100.0 * max_uu};
}

IntervalReport build_report(const std::map<std::string, eval::ConfusionMatrix>& cm_by_target,
                            const ReportParams& params) {
    if (cm_by_target.empty())
        throw std::invalid_argument("build_report requires at least one confusion matrix");
    IntervalReport report;
    report.params = params;
    report.dataset_interval =
        proportion_interval(params.method, params.dataset_p_hat, params.dataset_n, params.z);

    std::vector<Discrepancies> rows;
    for (const auto& [target, cm] : cm_by_target) {
        if (cm.n() == 0)
            throw std::invalid_argument("confusion matrix for '" + target + "' is empty");
        TargetReport tr;
        tr.n = cm.n();
        tr.raw_accuracy = cm.accuracy();
        tr.adjusted = adjusted_accuracy(cm.tp, cm.tn, cm.n(), params.assumed_error_rate);
        // Model bounds: the human-error discount applied to the score
        // interval of the raw accuracy on this target's validation n.
        Interval raw = proportion_interval(params.method, tr.raw_accuracy, tr.n, params.z);
        tr.model_bounds = {(1.0 - params.assumed_error_rate) * raw.lo,
                           (1.0 - params.assumed_error_rate) * raw.hi};
        tr.discrepancies = discrepancy_table(tr.model_bounds, report.dataset_interval);
        rows.push_back(tr.discrepancies);
        report.per_target[target] = tr;
    }
    report.outperform_pct = outperform_range(rows);
    return report;
}

void write_report(const IntervalReport& report, const std::filesystem::path& path) {
    json j;
    j["parameters"] = {
        {"assumed_error_rate", report.params.assumed_error_rate},
        {"dataset_n", report.params.dataset_n},
        {"dataset_p_hat", report.params.dataset_p_hat},
        {"z", report.params.z},
        {"interval_method",
         report.params.method == IntervalMethod::wilson ? "wilson" : "normal_approximation"},
    };
    j["dataset_interval"] = {{"lower", report.dataset_interval.lo},
                             {"upper", report.dataset_interval.hi}};
    json targets = json::object();
    for (const auto& [name, tr] : report.per_target) {
        targets[name] = {
            {"n", tr.n},
            {"raw_accuracy", tr.raw_accuracy},
            {"adjusted_accuracy", tr.adjusted},
            {"model_lower", tr.model_bounds.lo},
            {"model_upper", tr.model_bounds.hi},
            {"discrepancies",
             {{"lower_lower", tr.discrepancies.lower_lower},
              {"upper_upper", tr.discrepancies.upper_upper},
              {"upper_lower", tr.discrepancies.upper_lower},
              {"lower_upper", tr.discrepancies.lower_upper}}},
        };
    }
    j["per_target"] = targets;
    j["outperform_pct"] = {{"min", report.outperform_pct.first},
                           {"max", report.outperform_pct.second}};
    io::write_file(path, j.dump(2) + "\n");
}

}  // namespace oncopipe::stats
