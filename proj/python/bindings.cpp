#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "oncopipe/error_analysis.hpp"
#include "oncopipe/sampling_eval.hpp"
#include "oncopipe/text_preproc.hpp"

namespace py = pybind11;

using namespace oncopipe;

namespace {

py::dict discrepancies_to_dict(const stats::Discrepancies& d) {
    py::dict out;
    out["lower_lower"] = d.lower_lower;
    out["upper_upper"] = d.upper_upper;
    out["upper_lower"] = d.upper_lower;
    out["lower_upper"] = d.lower_upper;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core operations: proportion intervals, error-adjusted accuracy, "
              "temperature softmax, and text preprocessing";

    m.def(
        "wilson_interval",
        [](double p_hat, std::size_t n, double z) {
            auto iv = stats::wilson_interval(p_hat, n, z);
            return py::make_tuple(iv.lo, iv.hi);
        },
        py::arg("p_hat"), py::arg("n"), py::arg("z") = 1.96,
        "Wilson score interval for a binomial proportion, clamped to [0, 1].");

    m.def(
        "normal_interval",
        [](double p_hat, std::size_t n, double z) {
            auto iv = stats::normal_interval(p_hat, n, z);
            return py::make_tuple(iv.lo, iv.hi);
        },
        py::arg("p_hat"), py::arg("n"), py::arg("z") = 1.96,
        "Normal-approximation interval, clamped to [0, 1].");

    m.def("adjusted_accuracy", &stats::adjusted_accuracy, py::arg("tp"), py::arg("tn"),
          py::arg("n"), py::arg("p"),
          "Raw accuracy discounted by the assumed human-label error rate p.");

    m.def(
        "discrepancy_table",
        [](double model_lo, double model_hi, double dataset_lo, double dataset_hi) {
            auto d = stats::discrepancy_table({model_lo, model_hi}, {dataset_lo, dataset_hi});
            return discrepancies_to_dict(d);
        },
        py::arg("model_lo"), py::arg("model_hi"), py::arg("dataset_lo"), py::arg("dataset_hi"),
        "Pairwise interval-bound differences (dataset minus model).");

    m.def(
        "outperform_range",
        [](const std::vector<std::map<std::string, double>>& rows) {
            std::vector<stats::Discrepancies> ds;
            for (const auto& row : rows) {
                stats::Discrepancies d;
                d.lower_lower = row.at("lower_lower");
                d.upper_upper = row.at("upper_upper");
                d.upper_lower = row.at("upper_lower");
                d.lower_upper = row.at("lower_upper");
                ds.push_back(d);
            }
            auto r = stats::outperform_range(ds);
            return py::make_tuple(r.first, r.second);
        },
        py::arg("rows"),
        "(min lower_upper, max upper_upper) across targets, in percent.");

    m.def(
        "softmax_t",
        [](const std::vector<double>& logits, double temperature) {
            return eval::softmax_t(logits, temperature);
        },
        py::arg("logits"), py::arg("temperature"),
        "Temperature softmax; T = 0 is the argmax one-hot limit.");

    m.def(
        "shannon_entropy",
        [](const std::vector<double>& p) { return eval::shannon_entropy(p); }, py::arg("p"),
        "Entropy (bits) of a probability vector.");

    m.def("normalize_text", &text::normalize_text, py::arg("text"),
          "Accent stripping, contraction expansion, whitespace collapse.");

    m.def(
        "segment_sentences",
        [](const std::string& doc) {
            text::RawCorpus corpus;
            corpus.documents.push_back({"doc", doc});
            std::vector<std::string> out;
            for (auto& s : text::segment_sentences(corpus)) out.push_back(std::move(s.text));
            return out;
        },
        py::arg("text"), "Sentence texts of one document, in order.");

    m.def(
        "count_nouns",
        [](const std::string& sentence) {
            text::Sentence s;
            s.text = sentence;
            return text::count_nouns(s, text::default_noun_tagger());
        },
        py::arg("sentence"), "Noun count under the built-in lexicon tagger.");
}
