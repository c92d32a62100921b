#pragma once
// Synthetic captioning corpus. Every sample is one (scene, place, day)
// combination: the scene fixes the visual features (noisy copies of a
// per-scene centroid and object prototypes) and the caption template, while
// place and day appear only in the entity dictionary. A model can therefore
// reproduce a caption only by reading both the visual and the textual input.

#include <cstdint>
#include <string>
#include <vector>

#include "ooc/bpe.hpp"
#include "ooc/context.hpp"
#include "ooc/visual.hpp"

namespace ooc::synth {

struct SynthSpec {
    std::size_t scenes = 4;  // at most scene_templates().size()
    std::vector<std::string> places{"Delhi", "Paris", "Tokyo", "Cairo"};
    std::vector<std::string> days{"Friday", "Monday"};
    std::size_t d_vis = 64;
    std::size_t n_obj = visual::kDefaultObjectSlots;
    std::size_t min_objects = 2;
    std::size_t max_objects = 5;
    double noise = 0.1;
    std::uint64_t seed = 7;
};

struct SynthDataset {
    std::vector<visual::VisualRecord> features;
    std::vector<context::NerRecord> ner;  // captions included
    std::vector<std::size_t> scene;       // per sample
};

// "{place}" and "{day}" mark the entity slots.
const std::vector<std::string>& scene_templates();

// Samples ordered scene-major, then place, then day; ids "s{scene}-{place}-{day}".
SynthDataset make_dataset(const SynthSpec& spec);

std::string fill_template(const std::string& tmpl, const std::string& place, const std::string& day);

// Captions plus entity labels, the corpus the vocabulary is trained on.
std::vector<std::string> vocab_corpus(const SynthDataset& data);

}  // namespace ooc::synth
