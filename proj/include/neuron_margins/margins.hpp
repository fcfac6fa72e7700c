#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "neuron_margins/dataset.hpp"

namespace neuron_margins {

struct ThresholdSpec {
    // Fractions of the per-neuron max; strictly increasing, in [0, 1).
    std::vector<double> fractions{0.0, 0.2, 0.4, 0.6};

    void validate() const;
};

// Per-neuron maxima and cutoffs, calibrated once and frozen: evaluation
// runs reuse the calibration cutoffs rather than recomputing maxima.
struct ThresholdTable {
    std::string calibrated_on;
    std::vector<double> fractions;
    std::vector<double> max_activation;          // per neuron
    std::vector<std::vector<double>> cutoffs;    // [neuron][fraction index]
    std::vector<bool> degenerate;                // max == 0, all cutoffs collapse to 0

    std::size_t neuron_count() const { return max_activation.size(); }
    std::size_t fraction_index(double fraction) const;
    double cutoff(std::size_t neuron, std::size_t fraction_idx) const {
        return cutoffs[neuron][fraction_idx];
    }
};

struct Ensemble {
    std::string concept_tag;
    std::vector<std::size_t> neurons;  // non-empty, sorted ascending, duplicate-free

    // "22+54+63"
    std::string neuron_key() const;
};

// Exact rational rate: num activating images out of den. den == 0 marks an
// undefined rate (row not evaluable).
struct Rate {
    std::int64_t num = 0;
    std::int64_t den = 0;

    bool defined() const { return den != 0; }
    double percent() const;
    // percent rendered with exactly 3 decimals, half-up (matches report tables)
    std::string str3() const;
};

struct MarginRow {
    Ensemble ensemble;
    Rate tla_at_zero;            // target-partition rate at fraction 0
    std::vector<Rate> non_tla;   // per fraction, non-target partition
    std::int64_t target_count = 0;
    std::int64_t nontarget_count = 0;
    bool evaluable = true;       // false after evaluate_margins when the eval bundle lacks data
};

struct MarginTable {
    std::vector<double> fractions;
    double tla_min = 80.0;
    int top_k = 3;
    std::vector<MarginRow> rows;  // (concept, neuron set) unique
};

struct AnalysisConfig {
    ThresholdSpec thresholds;
    double tla_min = 80.0;  // percent; rows kept only when TLA > tla_min
    int top_k = 3;
    double alpha = 0.05;
    std::size_t max_ensemble_size = std::numeric_limits<std::size_t>::max();

    void validate() const;
};

ThresholdTable compute_thresholds(const ActivationTable& calibration, const ThresholdSpec& spec);

// True iff EVERY member neuron is strictly above its cutoff (strict even
// at fraction 0: post-ReLU zeros never count).
bool ensemble_activates(const std::vector<double>& activations, const Ensemble& ensemble,
                        const ThresholdTable& thresholds, std::size_t fraction_idx);

Rate activation_rate(const Ensemble& ensemble, const std::vector<std::string>& image_ids,
                     const DatasetBundle& bundle, const ThresholdTable& thresholds,
                     std::size_t fraction_idx);

// All non-empty subsets (size <= max_ensemble_size) of the neurons having
// the concept among their top_k labels, ordered by (size, lexicographic).
std::vector<Ensemble> enumerate_ensembles(const std::string& concept_tag,
                                          const NeuronLabelMap& label_map,
                                          const AnalysisConfig& config);

MarginTable build_margin_table(const DatasetBundle& bundle, const NeuronLabelMap& label_map,
                               const ThresholdTable& thresholds, const AnalysisConfig& config,
                               std::vector<std::string>* warnings = nullptr);

// Recomputes Non-TLA for the retained rows on the evaluation bundle using
// the FROZEN calibration thresholds; output rows align one-to-one with the
// input for paired comparison. Rows whose concept is missing from the eval
// annotations (or whose eval non-target partition is empty) come back with
// evaluable = false.
MarginTable evaluate_margins(const MarginTable& margin_rows, const DatasetBundle& eval_bundle,
                             const ThresholdTable& thresholds,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace neuron_margins
