#include "neuron_margins/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "neuron_margins/common.hpp"

namespace neuron_margins {

namespace {

// 53-bit uniform in [0, 1); mt19937_64 output is pinned by the standard,
// so the whole generator is portable across platforms.
double next_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

std::string sanitize_id(const std::string& tag) {
    std::string out;
    out.reserve(tag.size());
    for (char c : tag)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

void check_probability_map(const std::vector<double>& p, std::size_t fraction_count,
                           const std::string& tag, const char* which) {
    if (p.size() != fraction_count)
        throw ValidationError("concept \"" + tag + "\": " + which + " needs one probability per fraction");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0))
            throw ValidationError("concept \"" + tag + "\": " + which + " probability outside [0, 1]");
        if (i > 0 && p[i] > p[i - 1])
            throw ValidationError("concept \"" + tag + "\": " + which +
                                  " must be non-increasing across fractions");
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (neuron_count == 0) throw ValidationError("synth spec needs neuron_count >= 1");
    if (images_per_concept_target == 0)
        throw ValidationError("synth spec needs images_per_concept_target >= 1");
    if (concepts.empty()) throw ValidationError("synth spec needs at least one concept");
    if (fractions.empty()) throw ValidationError("synth spec needs at least one fraction");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] >= 0.0 && fractions[i] < 1.0))
            throw ValidationError("synth fraction outside [0, 1)");
        if (i > 0 && !(fractions[i] > fractions[i - 1]))
            throw ValidationError("synth fractions must be strictly increasing");
    }
    std::set<std::string> tags, ids;
    std::set<std::size_t> owned;
    for (const SynthConcept& c : concepts) {
        if (c.tag.empty()) throw ValidationError("synth concept with empty tag");
        if (c.tag == "background")
            throw ValidationError("tag \"background\" is reserved for filler images");
        if (!tags.insert(c.tag).second)
            throw ValidationError("duplicate concept tag \"" + c.tag + "\"");
        if (!ids.insert(sanitize_id(c.tag)).second)
            throw ValidationError("concept tags \"" + c.tag +
                                  "\" collide after image-id sanitization");
        if (c.neurons.empty())
            throw ValidationError("concept \"" + c.tag + "\" owns no neurons");
        if (!std::is_sorted(c.neurons.begin(), c.neurons.end()))
            throw ValidationError("concept \"" + c.tag + "\" neuron list must be sorted");
        for (std::size_t n : c.neurons) {
            if (n >= neuron_count)
                throw ValidationError("concept \"" + c.tag + "\" references neuron " +
                                      std::to_string(n) + " >= neuron_count");
            if (!owned.insert(n).second)
                throw ValidationError("neuron " + std::to_string(n) +
                                      " is owned by two concepts; ownership must be disjoint");
        }
        check_probability_map(c.p_target, fractions.size(), c.tag, "p_target");
        check_probability_map(c.p_nontarget, fractions.size(), c.tag, "p_nontarget");
    }
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    SynthSpec spec;
    try {
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.neuron_count = j.at("neuron_count").get<std::size_t>();
        if (j.contains("fractions")) spec.fractions = j["fractions"].get<std::vector<double>>();
        spec.images_per_concept_target = j.at("images_per_concept_target").get<std::size_t>();
        spec.images_per_concept_nontarget =
            j.at("images_per_concept_nontarget").get<std::size_t>();
        for (const auto& jc : j.at("concepts")) {
            SynthConcept c;
            c.tag = normalize_tag(jc.at("tag").get<std::string>());
            c.neurons = jc.at("neurons").get<std::vector<std::size_t>>();
            c.p_target = jc.at("p_target").get<std::vector<double>>();
            c.p_nontarget = jc.at("p_nontarget").get<std::vector<double>>();
            spec.concepts.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, std::string("bad synth spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::ordered_json j;
    j["seed"] = spec.seed;
    j["neuron_count"] = spec.neuron_count;
    j["fractions"] = spec.fractions;
    j["images_per_concept_target"] = spec.images_per_concept_target;
    j["images_per_concept_nontarget"] = spec.images_per_concept_nontarget;
    j["concepts"] = nlohmann::ordered_json::array();
    for (const SynthConcept& c : spec.concepts) {
        nlohmann::ordered_json jc;
        jc["tag"] = c.tag;
        jc["neurons"] = c.neurons;
        jc["p_target"] = c.p_target;
        jc["p_nontarget"] = c.p_nontarget;
        j["concepts"].push_back(std::move(jc));
    }
    return j.dump(2) + "\n";
}

DatasetBundle generate_bundle(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 gen(spec.seed);

    // Per-neuron designed maxima; exact 6-decimal values so the anchor
    // row survives CSV round-trips bit-for-bit.
    std::vector<double> max_act(spec.neuron_count);
    for (std::size_t n = 0; n < spec.neuron_count; ++n)
        max_act[n] = 4.0 + 0.25 * static_cast<double>(n % 16);

    ActivationTable activations;
    activations.dataset_name = "synth_" + std::to_string(spec.seed);
    activations.neuron_count = spec.neuron_count;
    AnnotationTable annotations;

    const std::size_t m = spec.fractions.size();
    auto draw_image = [&](const std::string& image_id, const SynthConcept* target_of) {
        ActivationRow row;
        row.image_id = image_id;
        row.activations.assign(spec.neuron_count, 0.0);
        // One band draw per concept (shared by its members, so the ensemble
        // conjunction realizes the marginal probability), then one magnitude
        // draw per member; both always consumed to keep the stream aligned.
        for (const SynthConcept& c : spec.concepts) {
            const std::vector<double>& p = (&c == target_of) ? c.p_target : c.p_nontarget;
            double u = next_uniform(gen);
            std::size_t band = 0;  // number of cutoffs strictly exceeded
            while (band < m && u < p[band]) ++band;
            for (std::size_t n : c.neurons) {
                double v = next_uniform(gen);
                double act = 0.0;
                if (band == 0) {
                    // below every cutoff; exactly 0 when the first fraction is 0
                    act = spec.fractions[0] == 0.0 ? 0.0
                                                   : v * spec.fractions[0] * 0.98 * max_act[n];
                } else {
                    double lo = spec.fractions[band - 1];
                    double hi = band == m ? 1.0 : spec.fractions[band];
                    // 2% edge margins keep the strict > comparisons safe
                    // after 6-decimal quantization
                    act = (lo + (hi - lo) * (0.02 + 0.96 * v)) * max_act[n];
                }
                row.activations[n] = quantize6(act);
            }
        }
        activations.rows.push_back(std::move(row));
        annotations.rows[image_id].insert(target_of ? target_of->tag : "background");
    };

    for (const SynthConcept& c : spec.concepts) {
        std::string base = sanitize_id(c.tag);
        for (std::size_t i = 0; i < spec.images_per_concept_target; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "_t%04zu", i);
            draw_image(base + buf, &c);
        }
    }
    std::size_t background_total = spec.concepts.size() * spec.images_per_concept_nontarget;
    for (std::size_t i = 0; i < background_total; ++i) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "background_%04zu", i);
        draw_image(buf, nullptr);
    }

    // Anchor: each concept's first target image carries its neurons' exact
    // maxima, so calibrated thresholds equal the designed ones.
    activations.rebuild_index();
    for (const SynthConcept& c : spec.concepts) {
        std::string anchor_id = sanitize_id(c.tag) + "_t0000";
        std::size_t idx = activations.index.at(anchor_id);
        for (std::size_t n : c.neurons) activations.rows[idx].activations[n] = max_act[n];
    }

    return make_bundle(std::move(activations), std::move(annotations));
}

NeuronLabelMap derive_label_map(const SynthSpec& spec) {
    NeuronLabelMap map;
    for (const SynthConcept& c : spec.concepts)
        for (std::size_t n : c.neurons)
            map.entries.push_back(LabelEntry{n, 1, c.tag, 1.0});
    std::sort(map.entries.begin(), map.entries.end(),
              [](const LabelEntry& a, const LabelEntry& b) { return a.neuron < b.neuron; });
    return map;
}

}  // namespace neuron_margins
