#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "neuron_margins/dataset.hpp"
#include "neuron_margins/margins.hpp"
#include "neuron_margins/report.hpp"
#include "neuron_margins/stats.hpp"
#include "neuron_margins/synth.hpp"

namespace py = pybind11;
using namespace neuron_margins;

namespace {

AnalysisConfig make_config(const std::vector<double>& fractions, double tla_min, int top_k,
                           double alpha, std::size_t max_ensemble_size) {
    AnalysisConfig config;
    config.thresholds.fractions = fractions;
    config.tla_min = tla_min;
    config.top_k = top_k;
    config.alpha = alpha;
    if (max_ensemble_size > 0) config.max_ensemble_size = max_ensemble_size;
    config.validate();
    return config;
}

}  // namespace

PYBIND11_MODULE(neuron_margins, m) {
    m.doc() = "neuron label error margins: activation-rate analysis and rank tests";

    py::class_<TestResult>(m, "TestResult")
        .def_readonly("statistic", &TestResult::statistic)
        .def_readonly("p_value", &TestResult::p_value)
        .def_property_readonly("method",
                               [](const TestResult& r) { return to_string(r.method); })
        .def_property_readonly("alternative",
                               [](const TestResult& r) { return to_string(r.alternative); })
        .def_readonly("rejected", &TestResult::rejected)
        .def_readonly("degenerate", &TestResult::degenerate)
        .def_readonly("z", &TestResult::z)
        .def_readonly("alpha", &TestResult::alpha)
        .def_property_readonly("n1", [](const TestResult& r) { return r.n.n1; })
        .def_property_readonly("n2", [](const TestResult& r) { return r.n.n2; })
        .def_property_readonly("used", [](const TestResult& r) { return r.n.used; })
        .def_property_readonly("zeros", [](const TestResult& r) { return r.n.zeros; })
        .def_property_readonly("exact_p",
                               [](const TestResult& r) -> py::object {
                                   if (!r.exact_p.defined()) return py::none();
                                   return py::make_tuple(r.exact_p.num, r.exact_p.den);
                               })
        .def("__repr__", [](const TestResult& r) {
            return "<TestResult statistic=" + std::to_string(r.statistic) +
                   " p=" + std::to_string(r.p_value) + " method=" + to_string(r.method) + ">";
        });

    py::class_<ActivationTable>(m, "ActivationTable")
        .def_readonly("dataset_name", &ActivationTable::dataset_name)
        .def_readonly("neuron_count", &ActivationTable::neuron_count)
        .def_property_readonly("image_ids",
                               [](const ActivationTable& t) {
                                   std::vector<std::string> ids;
                                   ids.reserve(t.rows.size());
                                   for (const auto& r : t.rows) ids.push_back(r.image_id);
                                   return ids;
                               })
        .def("activations_for", &ActivationTable::activations_for)
        .def("__len__", [](const ActivationTable& t) { return t.rows.size(); });

    py::class_<AnnotationTable>(m, "AnnotationTable")
        .def_property_readonly("rows", [](const AnnotationTable& t) { return t.rows; })
        .def("__len__", [](const AnnotationTable& t) { return t.rows.size(); });

    py::class_<NeuronLabelMap>(m, "NeuronLabelMap")
        .def("concepts", &NeuronLabelMap::concepts, py::arg("top_k") = 3)
        .def("neurons_for", &NeuronLabelMap::neurons_for, py::arg("concept"),
             py::arg("top_k") = 3)
        .def("__len__", [](const NeuronLabelMap& m_) { return m_.entries.size(); });

    py::class_<DatasetBundle>(m, "DatasetBundle")
        .def_readonly("activations", &DatasetBundle::activations)
        .def_readonly("annotations", &DatasetBundle::annotations);

    py::class_<ThresholdTable>(m, "ThresholdTable")
        .def_readonly("calibrated_on", &ThresholdTable::calibrated_on)
        .def_readonly("fractions", &ThresholdTable::fractions)
        .def_readonly("max_activation", &ThresholdTable::max_activation)
        .def("cutoff", &ThresholdTable::cutoff);

    py::class_<Ensemble>(m, "Ensemble")
        .def_readonly("concept", &Ensemble::concept_tag)
        .def_readonly("neurons", &Ensemble::neurons)
        .def("__repr__",
             [](const Ensemble& e) { return e.concept_tag + " [" + e.neuron_key() + "]"; });

    py::class_<MarginRow>(m, "MarginRow")
        .def_property_readonly("concept",
                               [](const MarginRow& r) { return r.ensemble.concept_tag; })
        .def_property_readonly("neurons", [](const MarginRow& r) { return r.ensemble.neurons; })
        .def_property_readonly("tla", [](const MarginRow& r) { return r.tla_at_zero.percent(); })
        .def_property_readonly("non_tla",
                               [](const MarginRow& r) {
                                   std::vector<double> out;
                                   for (const Rate& x : r.non_tla) out.push_back(x.percent());
                                   return out;
                               })
        .def_readonly("target_count", &MarginRow::target_count)
        .def_readonly("nontarget_count", &MarginRow::nontarget_count)
        .def_readonly("evaluable", &MarginRow::evaluable);

    py::class_<MarginTable>(m, "MarginTable")
        .def_readonly("fractions", &MarginTable::fractions)
        .def_readonly("rows", &MarginTable::rows)
        .def("to_csv", &margin_table_to_csv)
        .def("to_markdown", &margin_table_to_markdown)
        .def("__len__", [](const MarginTable& t) { return t.rows.size(); });

    py::class_<FractionSummary>(m, "FractionSummary")
        .def_readonly("fraction", &FractionSummary::fraction)
        .def_readonly("tested", &FractionSummary::tested)
        .def_readonly("rejected", &FractionSummary::rejected)
        .def_readonly("wilcoxon_applicable", &FractionSummary::wilcoxon_applicable)
        .def_readonly("wilcoxon", &FractionSummary::wilcoxon);

    py::class_<HypothesisReport>(m, "HypothesisReport")
        .def_readonly("total_hypotheses", &HypothesisReport::total_hypotheses)
        .def_readonly("total_rejected", &HypothesisReport::total_rejected)
        .def_readonly("fractions", &HypothesisReport::fractions)
        .def_readonly("pooled_applicable", &HypothesisReport::pooled_applicable)
        .def_readonly("pooled", &HypothesisReport::pooled)
        .def_readonly("not_evaluable", &HypothesisReport::not_evaluable)
        .def("summary_markdown", &summary_to_markdown);

    py::class_<SynthSpec>(m, "SynthSpec")
        .def_readwrite("seed", &SynthSpec::seed)
        .def_readonly("neuron_count", &SynthSpec::neuron_count)
        .def_readonly("fractions", &SynthSpec::fractions)
        .def("to_json", &synth_spec_to_json);

    m.def("normalize_tag", [](const std::string& tag) { return normalize_tag(tag); });
    m.def("rank_with_ties", &rank_with_ties);

    m.def(
        "mann_whitney_u",
        [](const std::vector<double>& a, const std::vector<double>& b,
           const std::string& alternative, double alpha, const std::string& method) {
            return mann_whitney_u(a, b, alternative_from_string(alternative), alpha,
                                  method_choice_from_string(method));
        },
        py::arg("a"), py::arg("b"), py::arg("alternative") = "two-sided",
        py::arg("alpha") = 0.05, py::arg("method") = "auto");

    m.def(
        "wilcoxon_signed_rank",
        [](const std::vector<std::pair<double, double>>& pairs, const std::string& alternative,
           double alpha, const std::string& zero_policy, const std::string& method) {
            return wilcoxon_signed_rank(pairs, alternative_from_string(alternative), alpha,
                                        zero_policy_from_string(zero_policy),
                                        method_choice_from_string(method));
        },
        py::arg("pairs"), py::arg("alternative") = "two-sided", py::arg("alpha") = 0.05,
        py::arg("zero_policy") = "wilcoxon", py::arg("method") = "auto");

    m.def("load_activations", &load_activations);
    m.def("load_annotations", &load_annotations);
    m.def("load_label_map", &load_label_map);
    m.def(
        "make_bundle",
        [](const ActivationTable& activations, const AnnotationTable& annotations) {
            return make_bundle(activations, annotations);
        },
        py::arg("activations"), py::arg("annotations"));
    m.def("partition_images", [](const std::string& concept_tag, const DatasetBundle& bundle) {
        Partition p = partition_images(normalize_tag(concept_tag), bundle);
        return py::make_tuple(p.target_ids, p.nontarget_ids);
    });

    m.def(
        "compute_thresholds",
        [](const ActivationTable& calibration, const std::vector<double>& fractions) {
            ThresholdSpec spec;
            spec.fractions = fractions;
            return compute_thresholds(calibration, spec);
        },
        py::arg("calibration"), py::arg("fractions") = std::vector<double>{0.0, 0.2, 0.4, 0.6});

    m.def(
        "enumerate_ensembles",
        [](const std::string& concept_tag, const NeuronLabelMap& label_map, int top_k,
           std::size_t max_ensemble_size) {
            AnalysisConfig config = make_config({0.0, 0.2, 0.4, 0.6}, 80.0, top_k, 0.05,
                                                max_ensemble_size);
            return enumerate_ensembles(normalize_tag(concept_tag), label_map, config);
        },
        py::arg("concept"), py::arg("label_map"), py::arg("top_k") = 3,
        py::arg("max_ensemble_size") = 0);

    m.def(
        "build_margin_table",
        [](const DatasetBundle& bundle, const NeuronLabelMap& label_map,
           const ThresholdTable& thresholds, double tla_min, int top_k,
           std::size_t max_ensemble_size) {
            AnalysisConfig config =
                make_config(thresholds.fractions, tla_min, top_k, 0.05, max_ensemble_size);
            return build_margin_table(bundle, label_map, thresholds, config);
        },
        py::arg("bundle"), py::arg("label_map"), py::arg("thresholds"),
        py::arg("tla_min") = 80.0, py::arg("top_k") = 3, py::arg("max_ensemble_size") = 0);

    m.def(
        "evaluate_margins",
        [](const MarginTable& table, const DatasetBundle& eval_bundle,
           const ThresholdTable& thresholds) {
            return evaluate_margins(table, eval_bundle, thresholds);
        },
        py::arg("margins"), py::arg("eval_bundle"), py::arg("thresholds"));

    m.def(
        "run_hypotheses",
        [](const MarginTable& calib, const MarginTable& eval, const DatasetBundle& eval_bundle,
           const DatasetBundle& calib_bundle, double tla_min, int top_k, double alpha,
           bool raw_samples, const std::string& zero_policy, const std::string& method,
           bool holm) {
            AnalysisConfig config = make_config(calib.fractions, tla_min, top_k, alpha, 0);
            HypothesisOptions opts;
            opts.raw_samples = raw_samples;
            opts.zero_policy = zero_policy_from_string(zero_policy);
            opts.method = method_choice_from_string(method);
            opts.holm = holm;
            return run_hypotheses(calib, eval, eval_bundle, calib_bundle, config, opts);
        },
        py::arg("calib"), py::arg("eval"), py::arg("eval_bundle"), py::arg("calib_bundle"),
        py::arg("tla_min") = 80.0, py::arg("top_k") = 3, py::arg("alpha") = 0.05,
        py::arg("raw_samples") = false, py::arg("zero_policy") = "wilcoxon",
        py::arg("method") = "auto", py::arg("holm") = false);

    m.def(
        "wilcoxon_from_pairs",
        [](const std::filesystem::path& path, const std::string& alternative, double alpha,
           const std::string& zero_policy, const std::string& method) {
            return wilcoxon_from_pairs(path, alternative_from_string(alternative), alpha,
                                       zero_policy_from_string(zero_policy),
                                       method_choice_from_string(method));
        },
        py::arg("path"), py::arg("alternative") = "two-sided", py::arg("alpha") = 0.05,
        py::arg("zero_policy") = "wilcoxon", py::arg("method") = "auto");

    m.def("load_margin_table", &load_margin_table);
    m.def("audit_margin_table", [](const MarginTable& table) {
        std::vector<std::string> messages;
        for (const AuditViolation& v : audit_margin_table(table)) messages.push_back(v.message);
        return messages;
    });

    m.def("load_synth_spec", &load_synth_spec);
    m.def("generate_bundle", &generate_bundle);
    m.def("derive_label_map", &derive_label_map);
}
