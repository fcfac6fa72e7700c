#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neuron_margins {

// Trim, ASCII case-fold, collapse internal whitespace runs to single
// spaces. Conjunctive tags ("tap and shower_screen") stay atomic.
std::string normalize_tag(std::string_view tag);

struct ActivationRow {
    std::string image_id;
    std::vector<double> activations;  // length == neuron_count, finite, >= 0
};

struct ActivationTable {
    std::string dataset_name;
    std::size_t neuron_count = 0;
    std::vector<ActivationRow> rows;

    // image_id -> index into rows; ids are unique by invariant
    std::unordered_map<std::string, std::size_t> index;

    void rebuild_index();
    bool contains(const std::string& image_id) const { return index.count(image_id) != 0; }
    const std::vector<double>& activations_for(const std::string& image_id) const;
};

// image_id -> normalized tag set. std::map keeps iteration (and thus every
// derived ordering) deterministic.
struct AnnotationTable {
    std::map<std::string, std::set<std::string>> rows;
};

struct LabelEntry {
    std::size_t neuron = 0;
    int rank = 0;  // 1-based, contiguous per neuron
    std::string concept_tag;
    double coverage_score = 0.0;
};

struct NeuronLabelMap {
    std::vector<LabelEntry> entries;  // sorted by (neuron, rank)

    // Distinct normalized tags, sorted; restricted to ranks <= top_k.
    std::vector<std::string> concepts(int top_k) const;
    // Neurons having the tag among their top_k labels, ascending.
    std::vector<std::size_t> neurons_for(const std::string& concept_tag, int top_k) const;
};

struct DatasetBundle {
    ActivationTable activations;
    AnnotationTable annotations;
};

ActivationTable load_activations(const std::filesystem::path& path);
AnnotationTable load_annotations(const std::filesystem::path& path);
NeuronLabelMap load_label_map(const std::filesystem::path& path);

void save_activations(const ActivationTable& table, const std::filesystem::path& path);
void save_annotations(const AnnotationTable& table, const std::filesystem::path& path);
void save_label_map(const NeuronLabelMap& map, const std::filesystem::path& path);

// Validates that every annotated image has an activation row; activation
// rows without annotations are legal but counted in a warning (they join
// neither partition).
DatasetBundle make_bundle(ActivationTable activations, AnnotationTable annotations,
                          std::vector<std::string>* warnings = nullptr);

struct Partition {
    std::vector<std::string> target_ids;     // sorted ascending
    std::vector<std::string> nontarget_ids;  // sorted ascending
};

// Splits the ANNOTATED images by presence of the (normalized) concept tag.
// target + nontarget always covers exactly the annotated ids.
Partition partition_images(const std::string& concept_tag, const DatasetBundle& bundle);

}  // namespace neuron_margins
