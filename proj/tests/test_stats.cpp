#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oncopipe/error_analysis.hpp"
#include "oncopipe/io.hpp"

using namespace oncopipe;
using nlohmann::json;

namespace {

// Independent oracle: the score interval bounds are the roots of
// (x - p)^2 = z^2 x (1 - x) / n, solved as a quadratic in x.
stats::Interval wilson_roots(double p, std::size_t n, double z) {
    const long double y = static_cast<long double>(z) * z / static_cast<long double>(n);
    const long double a = 1.0L + y;
    const long double b = -(2.0L * p + y);
    const long double c = static_cast<long double>(p) * p;
    const long double disc = std::sqrt(b * b - 4.0L * a * c);
    return {static_cast<double>((-b - disc) / (2.0L * a)),
            static_cast<double>((-b + disc) / (2.0L * a))};
}

long to_millis(double x) { return std::lround(x * 1000.0); }

}  // namespace

TEST_CASE("wilson interval reproduces the 0.87 over 922 fixture") {
    auto interval = stats::wilson_interval(0.87, 922, 1.96);
    CHECK(std::abs(interval.lo - 0.847) < 5e-4);
    CHECK(std::abs(interval.hi - 0.890) < 5e-4);

    auto oracle = wilson_roots(0.87, 922, 1.96);
    CHECK(std::abs(interval.lo - oracle.lo) < 1e-12);
    CHECK(std::abs(interval.hi - oracle.hi) < 1e-12);
}

TEST_CASE("wilson interval matches the quadratic roots across the range") {
    std::mt19937_64 gen(271828);
    std::uniform_real_distribution<double> prop(0.05, 0.95);
    for (int round = 0; round < 200; ++round) {
        double p = prop(gen);
        std::size_t n = 10 + gen() % 4991;
        auto interval = stats::wilson_interval(p, n, 1.96);
        auto oracle = wilson_roots(p, n, 1.96);
        CHECK(std::abs(interval.lo - oracle.lo) < 1e-12);
        CHECK(std::abs(interval.hi - oracle.hi) < 1e-12);
    }
}

TEST_CASE("interval edge behavior stays inside the unit square") {
    auto certain = stats::wilson_interval(1.0, 50, 1.96);
    CHECK(certain.hi <= 1.0);
    CHECK(certain.hi > 1.0 - 1e-12);
    CHECK(certain.lo < 1.0);

    auto never = stats::wilson_interval(0.0, 50, 1.96);
    CHECK(never.lo >= 0.0);
    CHECK(never.lo < 1e-12);
    CHECK(never.hi > 0.0);

    auto symmetric = stats::wilson_interval(0.5, 100, 1.96);
    CHECK(std::abs((symmetric.lo + symmetric.hi) / 2.0 - 0.5) < 1e-12);

    // The normal approximation needs the clamp at small n.
    auto clamped = stats::normal_interval(0.99, 5, 2.5);
    CHECK(clamped.hi == 1.0);
    auto floor = stats::normal_interval(0.01, 5, 2.5);
    CHECK(floor.lo == 0.0);
}

TEST_CASE("proportion interval argument validation") {
    CHECK_THROWS_AS(stats::wilson_interval(0.5, 0, 1.96), std::invalid_argument);
    CHECK_THROWS_AS(stats::wilson_interval(-0.1, 10, 1.96), std::invalid_argument);
    CHECK_THROWS_AS(stats::wilson_interval(1.1, 10, 1.96), std::invalid_argument);
    CHECK_THROWS_AS(stats::wilson_interval(std::nan(""), 10, 1.96), std::invalid_argument);
    CHECK_THROWS_AS(stats::wilson_interval(0.5, 10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(stats::wilson_interval(0.5, 10, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(stats::normal_interval(0.5, 0, 1.96), std::invalid_argument);
}

TEST_CASE("interval width shrinks strictly as n grows") {
    const std::size_t grid[] = {5, 10, 20, 50, 100, 200, 500, 922, 1000, 2000, 5000};
    for (double p : {0.13, 0.5, 0.87}) {
        double previous = 2.0;
        for (auto n : grid) {
            auto interval = stats::wilson_interval(p, n, 1.96);
            double width = interval.hi - interval.lo;
            CHECK(width < previous);
            CHECK(width > 0.0);
            previous = width;
        }
    }
}

TEST_CASE("intervals always contain the sample proportion") {
    std::mt19937_64 gen(5551212);
    std::uniform_real_distribution<double> prop(0.0, 1.0);
    for (int round = 0; round < 1000; ++round) {
        double p = prop(gen);
        std::size_t n = 1 + gen() % 5000;
        for (auto method : {stats::IntervalMethod::wilson,
                            stats::IntervalMethod::normal_approximation}) {
            auto interval = stats::proportion_interval(method, p, n, 1.96);
            CHECK(interval.lo <= p + 1e-12);
            CHECK(interval.hi >= p - 1e-12);
            CHECK(interval.lo >= 0.0);
            CHECK(interval.hi <= 1.0);
            CHECK(interval.lo <= interval.hi);
        }
    }
}

TEST_CASE("normal interval follows its closed form and the dispatch agrees") {
    double half = 1.96 * std::sqrt(0.8 * 0.2 / 50.0);
    auto interval = stats::normal_interval(0.8, 50, 1.96);
    CHECK(interval.lo == doctest::Approx(0.8 - half).epsilon(1e-15));
    CHECK(interval.hi == doctest::Approx(0.8 + half).epsilon(1e-15));

    auto via_wilson = stats::proportion_interval(stats::IntervalMethod::wilson, 0.7, 80, 1.96);
    auto direct_wilson = stats::wilson_interval(0.7, 80, 1.96);
    CHECK(via_wilson.lo == direct_wilson.lo);
    CHECK(via_wilson.hi == direct_wilson.hi);
    auto via_normal =
        stats::proportion_interval(stats::IntervalMethod::normal_approximation, 0.7, 80, 1.96);
    CHECK(via_normal.lo == stats::normal_interval(0.7, 80, 1.96).lo);
}

TEST_CASE("adjusted accuracy discounts linearly in the error rate") {
    // Direct arithmetic oracle for the reference figures.
    CHECK(std::abs(stats::adjusted_accuracy(100, 54, 181, 0.13) - 0.87 * 154.0 / 181.0) <
          1e-12);

    std::mt19937_64 gen(13);
    for (int round = 0; round < 200; ++round) {
        std::size_t n = 1 + gen() % 2000;
        std::size_t correct = gen() % (n + 1);
        std::size_t tp = correct == 0 ? 0 : gen() % (correct + 1);
        std::size_t tn = correct - tp;

        double raw = static_cast<double>(tp + tn) / static_cast<double>(n);
        CHECK(stats::adjusted_accuracy(tp, tn, n, 0.0) == raw);  // identity at p = 0
        CHECK(stats::adjusted_accuracy(tp, tn, n, 1.0) == 0.0);
        for (double p : {0.13, 0.5, 0.9}) {
            double adjusted = stats::adjusted_accuracy(tp, tn, n, p);
            // Same operation order as the scaled count, so bit-for-bit.
            CHECK(adjusted == (1.0 - p) * static_cast<double>(tp + tn) / static_cast<double>(n));
            CHECK(std::abs(adjusted - (1.0 - p) * raw) <= 1e-15);
            CHECK(adjusted <= (1.0 - p) + 1e-15);
            CHECK(adjusted >= 0.0);
        }
    }

    CHECK_THROWS_AS(stats::adjusted_accuracy(10, 10, 15, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stats::adjusted_accuracy(1, 1, 0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(stats::adjusted_accuracy(1, 1, 10, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(stats::adjusted_accuracy(1, 1, 10, 1.1), std::invalid_argument);
}

TEST_CASE("discrepancy cells reproduce the reference comparison table") {
    stats::Interval dataset{0.847, 0.890};
    stats::Interval chemo{0.728, 0.765};
    stats::Interval rt{0.721, 0.757};

    auto chemo_row = stats::discrepancy_table(chemo, dataset);
    CHECK(to_millis(chemo_row.lower_lower) == 119);
    CHECK(to_millis(chemo_row.upper_upper) == 125);
    CHECK(to_millis(chemo_row.upper_lower) == 162);
    CHECK(to_millis(chemo_row.lower_upper) == 82);

    auto rt_row = stats::discrepancy_table(rt, dataset);
    CHECK(to_millis(rt_row.lower_lower) == 126);
    CHECK(to_millis(rt_row.upper_upper) == 133);
    CHECK(to_millis(rt_row.upper_lower) == 169);
    CHECK(to_millis(rt_row.lower_upper) == 90);

    const stats::Discrepancies rows[] = {chemo_row, rt_row};
    auto range = stats::outperform_range(rows);
    CHECK(std::abs(range.first - 8.2) < 1e-9);
    CHECK(std::abs(range.second - 13.3) < 1e-9);

    const stats::Discrepancies single[] = {chemo_row};
    auto chemo_only = stats::outperform_range(single);
    CHECK(std::abs(chemo_only.first - 8.2) < 1e-9);
    CHECK(std::abs(chemo_only.second - 12.5) < 1e-9);
}

TEST_CASE("discrepancy cells honor the interval ordering") {
    auto same = stats::discrepancy_table({0.5, 0.6}, {0.5, 0.6});
    CHECK(same.lower_lower == 0.0);
    CHECK(same.upper_upper == 0.0);

    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 0; round < 1000; ++round) {
        double a = unit(gen), b = unit(gen), c = unit(gen), d = unit(gen);
        stats::Interval model{std::min(a, b), std::max(a, b)};
        stats::Interval dataset{std::min(c, d), std::max(c, d)};
        auto row = stats::discrepancy_table(model, dataset);
        CHECK(row.upper_lower >= row.lower_lower);
        CHECK(row.lower_lower >= row.lower_upper);
        CHECK(row.upper_lower >= row.upper_upper);
        CHECK(row.upper_upper >= row.lower_upper);
    }

    CHECK_THROWS_AS(stats::discrepancy_table({0.6, 0.5}, {0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(stats::outperform_range(std::span<const stats::Discrepancies>{}),
                    std::invalid_argument);
}

TEST_CASE("report assembly composes the pieces it is built from") {
    std::map<std::string, eval::ConfusionMatrix> matrices;
    matrices["chemo"] = {100, 20, 54, 10};  // n = 184
    matrices["rt"] = {90, 25, 60, 9};       // n = 184

    auto report = stats::build_report(matrices);
    auto dataset = stats::wilson_interval(0.87, 922, 1.96);
    CHECK(report.dataset_interval.lo == dataset.lo);
    CHECK(report.dataset_interval.hi == dataset.hi);
    REQUIRE(report.per_target.size() == 2);

    const auto& chemo = report.per_target.at("chemo");
    CHECK(chemo.n == 184);
    CHECK(chemo.raw_accuracy == 154.0 / 184.0);
    CHECK(std::abs(chemo.adjusted - 0.87 * 154.0 / 184.0) < 1e-12);
    auto raw_interval = stats::wilson_interval(154.0 / 184.0, 184, 1.96);
    CHECK(std::abs(chemo.model_bounds.lo - 0.87 * raw_interval.lo) < 1e-12);
    CHECK(std::abs(chemo.model_bounds.hi - 0.87 * raw_interval.hi) < 1e-12);
    CHECK(chemo.discrepancies.lower_lower ==
          doctest::Approx(dataset.lo - chemo.model_bounds.lo).epsilon(1e-15));

    // The outperform range is the min/max over exactly these two rows.
    const auto& rt = report.per_target.at("rt");
    double min_lu = std::min(chemo.discrepancies.lower_upper, rt.discrepancies.lower_upper);
    double max_uu = std::max(chemo.discrepancies.upper_upper, rt.discrepancies.upper_upper);
    CHECK(report.outperform_pct.first == doctest::Approx(100.0 * min_lu).epsilon(1e-15));
    CHECK(report.outperform_pct.second == doctest::Approx(100.0 * max_uu).epsilon(1e-15));
}

TEST_CASE("a zero error rate collapses the adjustment") {
    std::map<std::string, eval::ConfusionMatrix> matrices;
    matrices["rt"] = {50, 10, 30, 10};  // n = 100, raw 0.8
    stats::ReportParams params;
    params.assumed_error_rate = 0.0;
    auto report = stats::build_report(matrices, params);
    const auto& rt = report.per_target.at("rt");
    CHECK(rt.adjusted == rt.raw_accuracy);
    auto raw_interval = stats::wilson_interval(0.8, 100, 1.96);
    CHECK(rt.model_bounds.lo == raw_interval.lo);
    CHECK(rt.model_bounds.hi == raw_interval.hi);
}

TEST_CASE("report assembly rejects empty input") {
    CHECK_THROWS_AS(stats::build_report({}), std::invalid_argument);
    std::map<std::string, eval::ConfusionMatrix> matrices;
    matrices["rt"] = {0, 0, 0, 0};
    CHECK_THROWS_WITH_AS(stats::build_report(matrices), doctest::Contains("'rt'"),
                         std::invalid_argument);
}

TEST_CASE("report files carry the full structure") {
    std::map<std::string, eval::ConfusionMatrix> matrices;
    matrices["chemo"] = {100, 20, 54, 10};
    stats::ReportParams params;
    params.method = stats::IntervalMethod::normal_approximation;
    auto report = stats::build_report(matrices, params);

    fixtures::TempDir tmp("report");
    auto path = tmp / "report.json";
    stats::write_report(report, path);
    auto j = json::parse(io::read_file(path));

    CHECK(j.at("parameters").at("interval_method") == "normal_approximation");
    CHECK(j.at("parameters").at("dataset_n") == 922);
    CHECK(j.at("parameters").at("assumed_error_rate") == 0.13);
    CHECK(j.at("dataset_interval").at("lower").get<double>() == report.dataset_interval.lo);
    const auto& target = j.at("per_target").at("chemo");
    CHECK(target.at("n") == 184);
    CHECK(target.at("raw_accuracy").get<double>() == 154.0 / 184.0);
    CHECK(target.at("discrepancies").contains("lower_upper"));
    CHECK(j.at("outperform_pct").at("min").get<double>() ==
          report.outperform_pct.first);
    CHECK(io::read_file(path).back() == '\n');
}
