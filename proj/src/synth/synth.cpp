#include "ooc/synth.hpp"

#include <cmath>
#include <random>

#include "ooc/error.hpp"

namespace ooc::synth {
namespace {

void normalise(std::span<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
}

std::vector<double> gaussian(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(d);
    for (double& x : v) x = g(rng);
    return v;
}

}  // namespace

const std::vector<std::string>& scene_templates() {
    static const std::vector<std::string> t{
        "protesters march through the streets of {place} on {day}",
        "police officers stand guard outside the parliament in {place} on {day}",
        "a large crowd gathers for a rally in {place} on {day}",
        "firefighters battle a blaze near the river in {place} on {day}",
        "the prime minister greets supporters at the airport in {place} on {day}",
        "flood waters cover the main road in {place} on {day}",
    };
    return t;
}

std::string fill_template(const std::string& tmpl, const std::string& place, const std::string& day) {
    std::string out = tmpl;
    auto put = [&](const std::string& key, const std::string& value) {
        const auto pos = out.find(key);
        if (pos != std::string::npos) out.replace(pos, key.size(), value);
    };
    put("{place}", place);
    put("{day}", day);
    return out;
}

SynthDataset make_dataset(const SynthSpec& spec) {
    if (spec.scenes == 0 || spec.scenes > scene_templates().size()) {
        fail(ErrorKind::Contract, "synthetic corpus supports 1.." + std::to_string(scene_templates().size()) +
                                      " scenes");
    }
    if (spec.places.empty() || spec.days.empty()) fail(ErrorKind::Contract, "synthetic corpus needs places and days");
    if (spec.d_vis == 0) fail(ErrorKind::Contract, "synthetic corpus needs d_vis ≥ 1");
    const std::size_t max_obj = std::min(spec.max_objects, spec.n_obj);
    const std::size_t min_obj = std::min(spec.min_objects, max_obj);

    std::mt19937_64 rng(spec.seed);
    std::vector<std::vector<double>> centroid;
    std::vector<std::vector<std::vector<double>>> prototypes;
    for (std::size_t s = 0; s < spec.scenes; ++s) {
        centroid.push_back(gaussian(spec.d_vis, rng));
        normalise(centroid.back());
        prototypes.emplace_back();
        for (std::size_t k = 0; k < max_obj; ++k) {
            prototypes.back().push_back(gaussian(spec.d_vis, rng));
            normalise(prototypes.back().back());
        }
    }
    std::normal_distribution<double> noise(0.0, spec.noise / std::sqrt(static_cast<double>(spec.d_vis)));
    std::uniform_int_distribution<std::size_t> count(min_obj, max_obj);
    std::uniform_real_distribution<double> centre(0.1, 0.9), extent(0.05, 0.2);

    SynthDataset out;
    for (std::size_t s = 0; s < spec.scenes; ++s) {
        for (const auto& place : spec.places) {
            for (const auto& day : spec.days) {
                visual::VisualRecord r;
                r.sample_id = "s" + std::to_string(s) + "-" + place + "-" + day;
                r.image_feat = centroid[s];
                for (double& x : r.image_feat) x += noise(rng);
                normalise(r.image_feat);
                r.object_feats.assign(spec.n_obj * spec.d_vis, 0.0);
                r.object_mask.assign(spec.n_obj, false);
                const std::size_t k = count(rng);
                if (k > 0) r.boxes = std::vector<double>(spec.n_obj * 4, 0.0);
                for (std::size_t o = 0; o < k; ++o) {
                    std::span<double> row(r.object_feats.data() + o * spec.d_vis, spec.d_vis);
                    for (std::size_t c = 0; c < spec.d_vis; ++c) row[c] = prototypes[s][o][c] + noise(rng);
                    normalise(row);
                    r.object_mask[o] = true;
                    double* b = r.boxes->data() + o * 4;
                    b[0] = centre(rng);
                    b[1] = centre(rng);
                    b[2] = extent(rng);
                    b[3] = extent(rng);
                }
                context::NerRecord n;
                n.id = r.sample_id;
                n.caption = fill_template(scene_templates()[s], place, day);
                n.entities.entries["GPE"] = {place};
                n.entities.entries["DATE"] = {day};
                out.features.push_back(std::move(r));
                out.ner.push_back(std::move(n));
                out.scene.push_back(s);
            }
        }
    }
    return out;
}

std::vector<std::string> vocab_corpus(const SynthDataset& data) {
    // Mirrors how contexts are encoded: the bare label, then " tok1 tok2".
    std::vector<std::string> corpus;
    for (const auto& n : data.ner) {
        if (n.caption) corpus.push_back(*n.caption);
        for (const auto& [label, toks] : n.entities.entries) {
            corpus.push_back(label);
            std::string joined;
            for (const auto& t : toks) joined += " " + t;
            corpus.push_back(joined);
        }
    }
    return corpus;
}

}  // namespace ooc::synth
