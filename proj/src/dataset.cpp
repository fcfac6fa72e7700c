#include "neuron_margins/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "neuron_margins/common.hpp"
#include "neuron_margins/csv.hpp"

namespace neuron_margins {

std::string normalize_tag(std::string_view tag) {
    std::string out;
    out.reserve(tag.size());
    bool pending_space = false;
    for (char c : tag) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

void ActivationTable::rebuild_index() {
    index.clear();
    index.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) index.emplace(rows[i].image_id, i);
}

const std::vector<double>& ActivationTable::activations_for(const std::string& image_id) const {
    auto it = index.find(image_id);
    if (it == index.end()) throw ValidationError("unknown image id \"" + image_id + "\"");
    return rows[it->second].activations;
}

ActivationTable load_activations(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.cells.empty() || raw.header.cells[0] != "image_id")
        throw ParseError(raw.path, raw.header.line, "expected header starting with image_id");
    if (raw.header.cells.size() < 2)
        throw ParseError(raw.path, raw.header.line, "activation table needs at least one neuron column");

    ActivationTable table;
    table.dataset_name = path.stem().string();
    table.neuron_count = raw.header.cells.size() - 1;
    table.rows.reserve(raw.rows.size());
    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != raw.header.cells.size())
            throw ParseError(raw.path, row.line, "expected " + std::to_string(raw.header.cells.size()) +
                                                     " cells, got " + std::to_string(row.cells.size()));
        ActivationRow out;
        out.image_id = row.cells[0];
        if (out.image_id.empty()) throw ValidationError(raw.path + ": empty image_id at line " +
                                                        std::to_string(row.line));
        out.activations.reserve(table.neuron_count);
        for (std::size_t i = 1; i < row.cells.size(); ++i) {
            double v = csv::parse_double(row.cells[i], raw.path, row.line);
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError(raw.path + ": image " + out.image_id +
                                      " has invalid activation " + row.cells[i] +
                                      " (must be finite and >= 0)");
            out.activations.push_back(v);
        }
        table.rows.push_back(std::move(out));
    }
    table.rebuild_index();
    if (table.index.size() != table.rows.size()) {
        // find first duplicate for the message
        std::unordered_map<std::string, int> seen;
        for (const auto& r : table.rows)
            if (++seen[r.image_id] == 2)
                throw ValidationError(raw.path + ": duplicate image_id \"" + r.image_id + "\"");
    }
    return table;
}

AnnotationTable load_annotations(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.cells != std::vector<std::string>{"image_id", "concept"})
        throw ParseError(raw.path, raw.header.line, "expected header image_id,concept");
    AnnotationTable table;
    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != 2)
            throw ParseError(raw.path, row.line, "expected 2 cells");
        const std::string& id = row.cells[0];
        if (id.empty()) throw ValidationError(raw.path + ": empty image_id at line " +
                                              std::to_string(row.line));
        std::string tag = normalize_tag(row.cells[1]);
        if (tag.empty())
            throw ValidationError(raw.path + ": empty concept for image " + id + " at line " +
                                  std::to_string(row.line));
        table.rows[id].insert(std::move(tag));
    }
    return table;
}

NeuronLabelMap load_label_map(const std::filesystem::path& path) {
    csv::Table raw = csv::read_file(path);
    // an entirely empty (or comment-only) file is a legal empty map
    if (raw.header.cells.empty() && raw.rows.empty()) return {};
    if (raw.header.cells != std::vector<std::string>{"neuron", "rank", "concept", "coverage_score"})
        throw ParseError(raw.path, raw.header.line, "expected header neuron,rank,concept,coverage_score");
    NeuronLabelMap map;
    for (const csv::Row& row : raw.rows) {
        if (row.cells.size() != 4)
            throw ParseError(raw.path, row.line, "expected 4 cells");
        LabelEntry e;
        long long neuron = csv::parse_int(row.cells[0], raw.path, row.line);
        long long rank = csv::parse_int(row.cells[1], raw.path, row.line);
        if (neuron < 0) throw ValidationError(raw.path + ": negative neuron index at line " +
                                              std::to_string(row.line));
        if (rank < 1) throw ValidationError(raw.path + ": rank must be >= 1 at line " +
                                            std::to_string(row.line));
        e.neuron = static_cast<std::size_t>(neuron);
        e.rank = static_cast<int>(rank);
        e.concept_tag = normalize_tag(row.cells[2]);
        if (e.concept_tag.empty())
            throw ValidationError(raw.path + ": empty concept at line " + std::to_string(row.line));
        e.coverage_score = csv::parse_double(row.cells[3], raw.path, row.line);
        map.entries.push_back(std::move(e));
    }
    std::stable_sort(map.entries.begin(), map.entries.end(),
                     [](const LabelEntry& a, const LabelEntry& b) {
                         return a.neuron != b.neuron ? a.neuron < b.neuron : a.rank < b.rank;
                     });
    // (neuron, rank) unique and ranks contiguous from 1
    for (std::size_t i = 0; i < map.entries.size(); ++i) {
        const LabelEntry& e = map.entries[i];
        bool first_of_neuron = i == 0 || map.entries[i - 1].neuron != e.neuron;
        if (first_of_neuron) {
            if (e.rank != 1)
                throw ValidationError(path.string() + ": neuron " + std::to_string(e.neuron) +
                                      " ranks do not start at 1");
        } else {
            int prev = map.entries[i - 1].rank;
            if (e.rank == prev)
                throw ValidationError(path.string() + ": duplicate rank " + std::to_string(e.rank) +
                                      " for neuron " + std::to_string(e.neuron));
            if (e.rank != prev + 1)
                throw ValidationError(path.string() + ": rank gap for neuron " +
                                      std::to_string(e.neuron) + " (rank " + std::to_string(prev) +
                                      " followed by " + std::to_string(e.rank) + ")");
        }
    }
    return map;
}

std::vector<std::string> NeuronLabelMap::concepts(int top_k) const {
    std::set<std::string> tags;
    for (const LabelEntry& e : entries)
        if (e.rank <= top_k) tags.insert(e.concept_tag);
    return {tags.begin(), tags.end()};
}

std::vector<std::size_t> NeuronLabelMap::neurons_for(const std::string& concept_tag,
                                                     int top_k) const {
    std::set<std::size_t> neurons;
    for (const LabelEntry& e : entries)
        if (e.rank <= top_k && e.concept_tag == concept_tag) neurons.insert(e.neuron);
    return {neurons.begin(), neurons.end()};
}

void save_activations(const ActivationTable& table, const std::filesystem::path& path) {
    std::string out;
    std::vector<std::string> header{"image_id"};
    for (std::size_t n = 0; n < table.neuron_count; ++n) header.push_back("n" + std::to_string(n));
    out += csv::join_row(header);
    for (const ActivationRow& row : table.rows) {
        std::vector<std::string> cells{row.image_id};
        for (double v : row.activations) cells.push_back(csv::format_double(v));
        out += csv::join_row(cells);
    }
    csv::write_file(path, out);
}

void save_annotations(const AnnotationTable& table, const std::filesystem::path& path) {
    std::string out = csv::join_row({"image_id", "concept"});
    for (const auto& [id, tags] : table.rows)
        for (const std::string& tag : tags) out += csv::join_row({id, tag});
    csv::write_file(path, out);
}

void save_label_map(const NeuronLabelMap& map, const std::filesystem::path& path) {
    std::string out = csv::join_row({"neuron", "rank", "concept", "coverage_score"});
    for (const LabelEntry& e : map.entries)
        out += csv::join_row({std::to_string(e.neuron), std::to_string(e.rank), e.concept_tag,
                              csv::format_double(e.coverage_score)});
    csv::write_file(path, out);
}

DatasetBundle make_bundle(ActivationTable activations, AnnotationTable annotations,
                          std::vector<std::string>* warnings) {
    for (const auto& [id, tags] : annotations.rows)
        if (!activations.contains(id))
            throw ValidationError("annotated image \"" + id + "\" has no activation row in " +
                                  activations.dataset_name);
    std::size_t unannotated = 0;
    for (const ActivationRow& row : activations.rows)
        if (!annotations.rows.count(row.image_id)) ++unannotated;
    if (unannotated > 0)
        emit_warning(warnings, activations.dataset_name + ": " + std::to_string(unannotated) +
                                   " activation row(s) without annotations; excluded from all partitions");
    return DatasetBundle{std::move(activations), std::move(annotations)};
}

Partition partition_images(const std::string& concept_tag, const DatasetBundle& bundle) {
    Partition part;
    for (const auto& [id, tags] : bundle.annotations.rows) {
        if (tags.count(concept_tag))
            part.target_ids.push_back(id);
        else
            part.nontarget_ids.push_back(id);
    }
    return part;  // annotation map is ordered, so both lists are sorted
}

}  // namespace neuron_margins
