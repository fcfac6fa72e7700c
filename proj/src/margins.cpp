#include "neuron_margins/margins.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"

namespace neuron_margins {

void ThresholdSpec::validate() const {
    if (fractions.empty()) throw ValidationError("threshold spec needs at least one fraction");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        double f = fractions[i];
        if (!(f >= 0.0 && f < 1.0))
            throw ValidationError("threshold fraction " + csv::format_double(f) +
                                  " outside [0, 1)");
        if (i > 0 && !(f > fractions[i - 1]))
            throw ValidationError("threshold fractions must be strictly increasing");
    }
}

void AnalysisConfig::validate() const {
    thresholds.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    if (!(tla_min >= 0.0 && tla_min <= 100.0))
        throw ValidationError("tla-min must be in [0, 100]");
    if (top_k < 1) throw ValidationError("top-k must be >= 1");
    if (max_ensemble_size < 1) throw ValidationError("max ensemble size must be >= 1");
}

std::size_t ThresholdTable::fraction_index(double fraction) const {
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] == fraction) return i;
        if (std::abs(fractions[i] - fraction) < 1e-12) return i;
    }
    throw ValidationError("fraction " + csv::format_double(fraction) +
                          " is not part of the threshold table");
}

std::string Ensemble::neuron_key() const {
    std::string out;
    for (std::size_t i = 0; i < neurons.size(); ++i) {
        if (i) out.push_back('+');
        out += std::to_string(neurons[i]);
    }
    return out;
}

double Rate::percent() const {
    if (den == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::string Rate::str3() const {
    if (den == 0) return "n/a";
    // round(100000 * num / den) half-up, in exact integer arithmetic
    std::int64_t scaled = (200000 * num + den) / (2 * den);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%03lld", static_cast<long long>(scaled / 1000),
                  static_cast<long long>(scaled % 1000));
    return buf;
}

ThresholdTable compute_thresholds(const ActivationTable& calibration, const ThresholdSpec& spec) {
    spec.validate();
    if (calibration.rows.empty())
        throw ValidationError("cannot calibrate thresholds on an empty activation table");

    ThresholdTable table;
    table.calibrated_on = calibration.dataset_name;
    table.fractions = spec.fractions;
    table.max_activation.assign(calibration.neuron_count, 0.0);
    for (const ActivationRow& row : calibration.rows)
        for (std::size_t n = 0; n < calibration.neuron_count; ++n)
            table.max_activation[n] = std::max(table.max_activation[n], row.activations[n]);

    table.cutoffs.resize(calibration.neuron_count);
    table.degenerate.resize(calibration.neuron_count);
    for (std::size_t n = 0; n < calibration.neuron_count; ++n) {
        table.degenerate[n] = table.max_activation[n] == 0.0;
        if (table.degenerate[n])
            log::warn("neuron " + std::to_string(n) +
                      " has max activation 0; all its cutoffs degenerate to 0");
        table.cutoffs[n].reserve(spec.fractions.size());
        for (double f : spec.fractions) table.cutoffs[n].push_back(f * table.max_activation[n]);
    }
    return table;
}

bool ensemble_activates(const std::vector<double>& activations, const Ensemble& ensemble,
                        const ThresholdTable& thresholds, std::size_t fraction_idx) {
    for (std::size_t n : ensemble.neurons) {
        if (n >= thresholds.neuron_count() || n >= activations.size())
            throw ValidationError("neuron index " + std::to_string(n) +
                                  " out of range for ensemble " + ensemble.concept_tag);
        if (!(activations[n] > thresholds.cutoff(n, fraction_idx))) return false;
    }
    return true;
}

Rate activation_rate(const Ensemble& ensemble, const std::vector<std::string>& image_ids,
                     const DatasetBundle& bundle, const ThresholdTable& thresholds,
                     std::size_t fraction_idx) {
    if (image_ids.empty()) throw EmptyPartitionError(ensemble.concept_tag);
    std::int64_t hits = 0;
    for (const std::string& id : image_ids)
        if (ensemble_activates(bundle.activations.activations_for(id), ensemble, thresholds,
                               fraction_idx))
            ++hits;
    return Rate{hits, static_cast<std::int64_t>(image_ids.size())};
}

std::vector<Ensemble> enumerate_ensembles(const std::string& concept_tag,
                                          const NeuronLabelMap& label_map,
                                          const AnalysisConfig& config) {
    std::vector<std::size_t> pool = label_map.neurons_for(concept_tag, config.top_k);
    if (pool.empty()) return {};
    if (pool.size() > 20)
        throw ValidationError("concept \"" + concept_tag + "\" groups " +
                              std::to_string(pool.size()) +
                              " neurons; refusing to enumerate more than 2^20 subsets");

    std::vector<Ensemble> out;
    std::uint32_t limit = 1u << pool.size();
    for (std::uint32_t mask = 1; mask < limit; ++mask) {
        std::size_t size = static_cast<std::size_t>(__builtin_popcount(mask));
        if (size > config.max_ensemble_size) continue;
        Ensemble e;
        e.concept_tag = concept_tag;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (mask & (1u << i)) e.neurons.push_back(pool[i]);
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Ensemble& a, const Ensemble& b) {
        if (a.neurons.size() != b.neurons.size()) return a.neurons.size() < b.neurons.size();
        return a.neurons < b.neurons;
    });
    return out;
}

MarginTable build_margin_table(const DatasetBundle& bundle, const NeuronLabelMap& label_map,
                               const ThresholdTable& thresholds, const AnalysisConfig& config,
                               std::vector<std::string>* warnings) {
    config.validate();
    MarginTable table;
    table.fractions = thresholds.fractions;
    table.tla_min = config.tla_min;
    table.top_k = config.top_k;

    std::size_t zero_idx = thresholds.fraction_index(0.0);
    if (bundle.annotations.rows.empty())
        emit_warning(warnings, "bundle has no annotations; margin table is empty");

    for (const std::string& tag : label_map.concepts(config.top_k)) {
        Partition part = partition_images(tag, bundle);
        if (part.target_ids.empty()) {
            emit_warning(warnings, "concept \"" + tag + "\" has no target images; skipped");
            continue;
        }
        for (Ensemble& e : enumerate_ensembles(tag, label_map, config)) {
            MarginRow row;
            row.tla_at_zero = activation_rate(e, part.target_ids, bundle, thresholds, zero_idx);
            row.target_count = static_cast<std::int64_t>(part.target_ids.size());
            row.nontarget_count = static_cast<std::int64_t>(part.nontarget_ids.size());
            if (!(row.tla_at_zero.percent() > config.tla_min)) continue;
            // only retained rows may demand a non-target partition
            for (std::size_t fi = 0; fi < thresholds.fractions.size(); ++fi)
                row.non_tla.push_back(
                    activation_rate(e, part.nontarget_ids, bundle, thresholds, fi));
            row.ensemble = std::move(e);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

MarginTable evaluate_margins(const MarginTable& margin_rows, const DatasetBundle& eval_bundle,
                             const ThresholdTable& thresholds,
                             std::vector<std::string>* warnings) {
    MarginTable out;
    out.fractions = margin_rows.fractions;
    out.tla_min = margin_rows.tla_min;
    out.top_k = margin_rows.top_k;

    std::size_t zero_idx = thresholds.fraction_index(0.0);
    // partitions are per concept; cache across rows sharing one
    std::map<std::string, Partition> partitions;
    for (const MarginRow& in : margin_rows.rows) {
        const std::string& tag = in.ensemble.concept_tag;
        auto it = partitions.find(tag);
        if (it == partitions.end())
            it = partitions.emplace(tag, partition_images(tag, eval_bundle)).first;
        const Partition& part = it->second;

        MarginRow row;
        row.ensemble = in.ensemble;
        row.target_count = static_cast<std::int64_t>(part.target_ids.size());
        row.nontarget_count = static_cast<std::int64_t>(part.nontarget_ids.size());
        row.evaluable = !part.target_ids.empty() && !part.nontarget_ids.empty();
        if (!row.evaluable) {
            emit_warning(warnings, "concept \"" + tag + "\" not evaluable on " +
                                       eval_bundle.activations.dataset_name +
                                       (part.target_ids.empty() ? " (no target images)"
                                                                : " (no non-target images)"));
            row.non_tla.assign(thresholds.fractions.size(), Rate{});
            out.rows.push_back(std::move(row));
            continue;
        }
        row.tla_at_zero =
            activation_rate(in.ensemble, part.target_ids, eval_bundle, thresholds, zero_idx);
        for (std::size_t fi = 0; fi < thresholds.fractions.size(); ++fi)
            row.non_tla.push_back(
                activation_rate(in.ensemble, part.nontarget_ids, eval_bundle, thresholds, fi));
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace neuron_margins
