#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neuron_margins/dataset.hpp"

namespace neuron_margins {

struct SynthConcept {
    std::string tag;
    std::vector<std::size_t> neurons;   // sorted, disjoint across concepts
    std::vector<double> p_target;       // per fraction, non-increasing
    std::vector<double> p_nontarget;    // per fraction, non-increasing
};

// Ground-truth generator parameters. Every neuron belongs to at most one
// concept; images tagged with a concept draw that concept's neurons from
// p_target, every other image draws them from p_nontarget, so measured
// TLA / Non-TLA converge on the spec probabilities.
struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t neuron_count = 0;
    std::vector<double> fractions{0.0, 0.2, 0.4, 0.6};
    std::size_t images_per_concept_target = 0;
    std::size_t images_per_concept_nontarget = 0;  // extra "background"-tagged images
    std::vector<SynthConcept> concepts;

    void validate() const;
};

SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string synth_spec_to_json(const SynthSpec& spec);

// Deterministic per seed, byte-for-byte: same spec, same CSV output.
DatasetBundle generate_bundle(const SynthSpec& spec);

// Rank-1 label map assigning each concept to each of its neurons.
NeuronLabelMap derive_label_map(const SynthSpec& spec);

}  // namespace neuron_margins
