#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"
#include "neuron_margins/dataset.hpp"
#include "neuron_margins/margins.hpp"
#include "neuron_margins/report.hpp"
#include "neuron_margins/stats.hpp"
#include "neuron_margins/synth.hpp"

namespace nm = neuron_margins;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_fractions(const std::string& csv_list) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv_list.size()) {
        std::size_t comma = csv_list.find(',', start);
        std::string part =
            csv_list.substr(start, comma == std::string::npos ? comma : comma - start);
        out.push_back(nm::csv::parse_double(part, "--thresholds", 0));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    nm::csv::write_file(path, content);
    std::cout << "wrote " << path.string() << "\n";
}

void echo_config(CLI::App& app, const fs::path& out_dir) {
    nm::csv::write_file(out_dir / "run_config.toml", app.config_to_str(true, false));
}

nm::DatasetBundle load_bundle(const std::string& activations, const std::string& annotations) {
    return nm::make_bundle(nm::load_activations(activations),
                           nm::load_annotations(annotations));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neuron label error margins: activation-rate tables and cross-dataset "
                 "validation with rank tests"};
    app.set_config("--config", "", "TOML-style config file (flags override it)");
    app.require_subcommand(1);

    // shared option state
    std::string activations, annotations, labels, eval_activations, eval_annotations;
    std::string thresholds = "0,0.2,0.4,0.6";
    double tla_min = 80.0, alpha = 0.05;
    int top_k = 3;
    std::size_t max_ensemble_size = 0;  // 0 = unlimited
    std::string format = "csv", out_dir;
    std::string alternative = "two-sided", zero_policy = "wilcoxon", method = "auto";
    std::string input, spec_path;
    bool raw_samples = false, holm = false;
    std::uint64_t seed = 0;
    bool seed_set = false;

    std::function<int()> run;

    auto add_analysis_options = [&](CLI::App* cmd, bool with_eval) {
        cmd->add_option("--activations", activations, "calibration activations CSV")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--annotations", annotations, "calibration annotations CSV")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--labels", labels, "neuron label map CSV")
            ->required()
            ->check(CLI::ExistingFile);
        if (with_eval) {
            cmd->add_option("--eval-activations", eval_activations, "evaluation activations CSV")
                ->required()
                ->check(CLI::ExistingFile);
            cmd->add_option("--eval-annotations", eval_annotations, "evaluation annotations CSV")
                ->required()
                ->check(CLI::ExistingFile);
        }
        cmd->add_option("--thresholds", thresholds,
                        "comma-separated threshold fractions of the per-neuron max");
        cmd->add_option("--tla-min", tla_min, "keep rows with TLA strictly above this percent");
        cmd->add_option("--top-k", top_k, "label ranks considered per neuron");
        cmd->add_option("--max-ensemble-size", max_ensemble_size,
                        "largest ensemble to enumerate (0 = unlimited)");
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto build_config = [&]() {
        nm::AnalysisConfig config;
        config.thresholds.fractions = parse_fractions(thresholds);
        config.tla_min = tla_min;
        config.top_k = top_k;
        config.alpha = alpha;
        if (max_ensemble_size > 0) config.max_ensemble_size = max_ensemble_size;
        config.validate();
        return config;
    };

    CLI::App* analyze = app.add_subcommand(
        "analyze", "compute the TLA / non-TLA margin table for one dataset");
    analyze->configurable();
    add_analysis_options(analyze, false);
    analyze->add_option("--format", format, "margins output format")
        ->check(CLI::IsMember({"csv", "markdown"}));
    analyze->callback([&] {
        run = [&]() {
            nm::AnalysisConfig config = build_config();
            nm::DatasetBundle bundle = load_bundle(activations, annotations);
            nm::NeuronLabelMap label_map = nm::load_label_map(labels);
            nm::ThresholdTable cutoffs =
                nm::compute_thresholds(bundle.activations, config.thresholds);
            std::vector<std::string> warnings;
            nm::MarginTable table =
                nm::build_margin_table(bundle, label_map, cutoffs, config, &warnings);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "margins.csv", nm::margin_table_to_csv(table));
            if (format == "markdown")
                write_text(fs::path(out_dir) / "margins.md", nm::margin_table_to_markdown(table));
            echo_config(app, out_dir);
            std::cout << "margin rows retained: " << table.rows.size() << " (tla > "
                      << nm::csv::format_double(config.tla_min) << ")\n";
            return 0;
        };
    });

    CLI::App* validate = app.add_subcommand(
        "validate", "test whether calibration error margins hold on an evaluation dataset");
    validate->configurable();
    add_analysis_options(validate, true);
    validate->add_option("--alpha", alpha, "significance level");
    validate->add_option("--zero-policy", zero_policy, "signed-rank zero handling")
        ->check(CLI::IsMember({"wilcoxon", "pratt"}));
    validate->add_option("--method", method, "p-value method")
        ->check(CLI::IsMember({"auto", "exact", "normal"}));
    validate->add_flag("--raw-samples", raw_samples,
                       "rank raw normalized activations instead of binary indicators");
    validate->add_flag("--holm", holm, "apply holm-bonferroni across the hypothesis grid");
    validate->callback([&] {
        run = [&]() {
            nm::AnalysisConfig config = build_config();
            nm::DatasetBundle calib_bundle = load_bundle(activations, annotations);
            nm::DatasetBundle eval_bundle = load_bundle(eval_activations, eval_annotations);
            nm::NeuronLabelMap label_map = nm::load_label_map(labels);
            nm::ThresholdTable cutoffs =
                nm::compute_thresholds(calib_bundle.activations, config.thresholds);
            nm::MarginTable calib =
                nm::build_margin_table(calib_bundle, label_map, cutoffs, config);
            nm::MarginTable eval = nm::evaluate_margins(calib, eval_bundle, cutoffs);
            nm::HypothesisOptions opts;
            opts.raw_samples = raw_samples;
            opts.zero_policy = nm::zero_policy_from_string(zero_policy);
            opts.method = nm::method_choice_from_string(method);
            opts.holm = holm;
            nm::HypothesisReport report =
                nm::run_hypotheses(calib, eval, eval_bundle, calib_bundle, config, opts);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "comparison.csv", nm::comparison_to_csv(calib, eval));
            write_text(fs::path(out_dir) / "hypotheses.csv", nm::hypotheses_to_csv(report));
            write_text(fs::path(out_dir) / "summary.md", nm::summary_to_markdown(report));
            echo_config(app, out_dir);
            std::cout << "hypotheses tested: " << report.total_hypotheses << "\n"
                      << "hypotheses rejected: " << report.total_rejected << "\n";
            if (report.pooled_applicable)
                std::cout << "pooled signed-rank p: " << report.pooled.p_value << "\n";
            return 0;
        };
    });

    CLI::App* test = app.add_subcommand("test", "standalone rank tests over CSV input");
    test->require_subcommand(1);

    CLI::App* mwu = test->add_subcommand("mwu", "rank-sum test over a group,value CSV "
                                                "(sample a = first group seen)");
    mwu->add_option("--input", input, "CSV with header group,value")
        ->required()
        ->check(CLI::ExistingFile);
    mwu->add_option("--alternative", alternative, "H1 for sample a")
        ->check(CLI::IsMember({"greater", "less", "two-sided"}));
    mwu->add_option("--alpha", alpha, "significance level");
    mwu->add_option("--method", method, "p-value method")
        ->check(CLI::IsMember({"auto", "exact", "normal"}));
    mwu->callback([&] {
        run = [&]() {
            nm::GroupSamples groups = nm::load_group_samples(input);
            nm::TestResult result = nm::mann_whitney_u(
                groups.a, groups.b, nm::alternative_from_string(alternative), alpha,
                nm::method_choice_from_string(method));
            std::cout << nm::format_test_result(
                result, "mann-whitney u: a = \"" + groups.label_a + "\", b = \"" +
                            groups.label_b + "\"");
            return 0;
        };
    });

    CLI::App* wilcoxon = test->add_subcommand(
        "wilcoxon", "signed-rank test over a concept,google,ade20k CSV (d = ade20k - google)");
    wilcoxon->add_option("--input", input, "CSV with header concept,google,ade20k")
        ->required()
        ->check(CLI::ExistingFile);
    wilcoxon->add_option("--alternative", alternative, "H1 for the differences");
    wilcoxon->add_option("--alpha", alpha, "significance level");
    wilcoxon->add_option("--zero-policy", zero_policy, "zero-difference handling")
        ->check(CLI::IsMember({"wilcoxon", "pratt"}));
    wilcoxon->add_option("--method", method, "p-value method")
        ->check(CLI::IsMember({"auto", "exact", "normal"}));
    wilcoxon->callback([&] {
        run = [&]() {
            nm::TestResult result = nm::wilcoxon_from_pairs(
                input, nm::alternative_from_string(alternative), alpha,
                nm::zero_policy_from_string(zero_policy), nm::method_choice_from_string(method));
            std::cout << nm::format_test_result(result, "wilcoxon signed-rank: " + input);
            return 0;
        };
    });

    CLI::App* synth = app.add_subcommand(
        "synth", "generate a synthetic bundle with known ground-truth rates");
    synth->configurable();
    synth->add_option("--spec", spec_path, "JSON generator spec")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--seed", seed, "override the spec's seed")
        ->trigger_on_parse()
        ->each([&](const std::string&) { seed_set = true; });
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->callback([&] {
        run = [&]() {
            nm::SynthSpec spec = nm::load_synth_spec(spec_path);
            if (seed_set) spec.seed = seed;
            nm::DatasetBundle bundle = nm::generate_bundle(spec);
            fs::create_directories(out_dir);
            nm::save_activations(bundle.activations, fs::path(out_dir) / "activations.csv");
            std::cout << "wrote " << (fs::path(out_dir) / "activations.csv").string() << "\n";
            nm::save_annotations(bundle.annotations, fs::path(out_dir) / "annotations.csv");
            std::cout << "wrote " << (fs::path(out_dir) / "annotations.csv").string() << "\n";
            nm::save_label_map(nm::derive_label_map(spec), fs::path(out_dir) / "labels.csv");
            std::cout << "wrote " << (fs::path(out_dir) / "labels.csv").string() << "\n";
            write_text(fs::path(out_dir) / "spec.json", nm::synth_spec_to_json(spec));
            std::cout << "images: " << bundle.activations.rows.size() << ", neurons: "
                      << bundle.activations.neuron_count << "\n";
            return 0;
        };
    });

    CLI11_PARSE(app, argc, argv);
    try {
        return run ? run() : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
