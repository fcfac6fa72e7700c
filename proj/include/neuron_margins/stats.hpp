#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "neuron_margins/margins.hpp"

namespace neuron_margins {

enum class Alternative { greater, less, two_sided };
enum class Method { exact, normal_approx };
enum class MethodChoice { automatic, exact, normal };
enum class ZeroPolicy { wilcoxon, pratt };

std::string to_string(Alternative a);
std::string to_string(Method m);
std::string to_string(ZeroPolicy z);
Alternative alternative_from_string(const std::string& s);
ZeroPolicy zero_policy_from_string(const std::string& s);
MethodChoice method_choice_from_string(const std::string& s);

// Exact tail probability as a reduced-form rational (tail count over total
// arrangement count). den == 0 when the result came from the normal path.
struct ExactP {
    std::uint64_t num = 0;
    std::uint64_t den = 0;

    bool defined() const { return den != 0; }
    double value() const { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
};

struct SampleSizes {
    std::size_t n1 = 0;     // |a|, or total pair count for signed-rank
    std::size_t n2 = 0;     // |b|, or 0 for signed-rank
    std::size_t used = 0;   // pairs entering the statistic after zero handling
    std::size_t zeros = 0;  // zero differences encountered (signed-rank only)
};

struct TestResult {
    double statistic = 0.0;  // U of sample a, or W+ (sum of positive-difference ranks)
    double p_value = 1.0;
    Method method = Method::normal_approx;
    Alternative alternative = Alternative::two_sided;
    SampleSizes n;
    double alpha = 0.05;
    bool rejected = false;   // p_value < alpha, strictly
    bool degenerate = false; // zero-variance / all-zero-difference input; p forced to 1
    double z = 0.0;          // normal path only
    ExactP exact_p;          // exact path only
    ZeroPolicy zero_policy = ZeroPolicy::wilcoxon;  // signed-rank only
    bool continuity_correction = true;              // normal path applies +-0.5
};

// Average ranks 1..n; ties share the mean of their rank span.
std::vector<double> rank_with_ties(const std::vector<double>& values);

// Rank-sum test of two independent samples. Reported statistic is U of
// sample a. Exact path (tie-free, min(n1,n2) <= 25, arrangement count fits
// 64 bits) counts rank subsets by dynamic programming; otherwise a
// tie-corrected normal approximation with continuity correction.
TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                          Alternative alternative, double alpha,
                          MethodChoice method = MethodChoice::automatic);

// Paired signed-rank test on d = y - x. zero_policy wilcoxon drops zero
// differences; pratt ranks them first and then discards their ranks. Exact
// path (n <= 25 after zero handling) enumerates sign assignments over the
// tied average ranks by dynamic programming on doubled ranks.
TestResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                Alternative alternative, double alpha,
                                ZeroPolicy zero_policy = ZeroPolicy::wilcoxon,
                                MethodChoice method = MethodChoice::automatic);

struct HypothesisOptions {
    // false: per-image binary activation indicators (Non-TLA is their mean);
    // true: raw per-image min-over-ensemble activation normalized by the
    // calibration max (sensitivity analysis).
    bool raw_samples = false;
    ZeroPolicy zero_policy = ZeroPolicy::wilcoxon;
    MethodChoice method = MethodChoice::automatic;
    bool holm = false;  // Holm-Bonferroni over the MWU grid (off: no correction)
};

struct HypothesisRow {
    std::string concept_tag;
    std::vector<std::size_t> neurons;
    double fraction = 0.0;
    std::size_t fraction_idx = 0;
    Rate calib_rate;
    Rate eval_rate;
    TestResult mwu;
    bool confirmed = false;
};

struct FractionSummary {
    double fraction = 0.0;
    std::size_t tested = 0;
    std::size_t rejected = 0;
    bool wilcoxon_applicable = false;  // false when no row was confirmed
    TestResult wilcoxon;
};

struct HypothesisReport {
    std::vector<HypothesisRow> rows;
    std::vector<FractionSummary> fractions;
    bool pooled_applicable = false;
    TestResult pooled;
    std::size_t total_hypotheses = 0;
    std::size_t total_rejected = 0;
    std::vector<std::string> not_evaluable;  // "concept [neurons]" labels
    // echo of the run configuration, for self-contained reports
    double alpha = 0.05;
    bool raw_samples = false;
    bool holm = false;
    ZeroPolicy zero_policy = ZeroPolicy::wilcoxon;
};

// The full protocol: per (retained row, fraction) an MWU with alternative
// "calibration greater" over the two non-target partitions; confirmed rows
// feed per-fraction and pooled signed-rank tests of (calib%, eval%) pairs
// with alternative "less". Calibration thresholds are recomputed from
// calib_bundle and frozen for both sides.
HypothesisReport run_hypotheses(const MarginTable& calib, const MarginTable& eval,
                                const DatasetBundle& eval_bundle,
                                const DatasetBundle& calib_bundle, const AnalysisConfig& config,
                                const HypothesisOptions& opts = {});

struct LabeledPair {
    std::string label;
    double x = 0.0;  // first value column (calibration side)
    double y = 0.0;  // second value column (evaluation side)
};

// CSV with header label,<x>,<y> (canonically concept,google,ade20k).
std::vector<LabeledPair> load_pairs(const std::filesystem::path& path);

TestResult wilcoxon_from_pairs(const std::filesystem::path& path, Alternative alternative,
                               double alpha, ZeroPolicy zero_policy = ZeroPolicy::wilcoxon,
                               MethodChoice method = MethodChoice::automatic);

// CSV with header group,value and exactly two distinct group labels;
// sample a is the group appearing first.
struct GroupSamples {
    std::string label_a, label_b;
    std::vector<double> a, b;
};
GroupSamples load_group_samples(const std::filesystem::path& path);

}  // namespace neuron_margins
