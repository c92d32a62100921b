#pragma once
// Precomputed visual features: one image embedding plus a fixed number of
// object slots per sample.
//
// JSON-lines format, one record per line:
//   {"id": str, "image_feat": [f32 x D], "objects": [{"feat": [f32 x D], "box": [cx,cy,w,h]}, ...]}
// "box" is optional but must be present on all objects of a record or none.
//
// Packed binary format (all integers u32 little-endian, floats IEEE f32 LE):
//   "OOCF" | version=1 | D | N_obj | record_count
//   per record: id_len | id bytes | image[D] | mask[N_obj] (u8 0/1)
//               | objects[N_obj*D] | has_boxes (u8) | boxes[N_obj*4] if has_boxes

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ooc::visual {

inline constexpr std::size_t kDefaultObjectSlots = 10;
inline constexpr std::size_t kDefaultFeatureDim = 1024;

struct VisualRecord {
    std::string sample_id;
    std::vector<double> image_feat;       // D
    std::vector<double> object_feats;     // N_obj × D, row-major; masked rows are zero
    std::vector<bool> object_mask;        // N_obj
    std::optional<std::vector<double>> boxes;  // N_obj × 4 (cx, cy, w, h) in [0, 1]

    std::size_t dim() const { return image_feat.size(); }
    std::size_t slots() const { return object_mask.size(); }
    std::size_t real_objects() const;
    std::span<const double> object(std::size_t slot) const;
};

// Throws Schema (shape, padding, box range) or Data (non-finite) errors that
// name the record's sample id.
void validate_record(const VisualRecord& record, std::size_t dim, std::size_t n_obj);

// Detects the format from the leading magic bytes. Every record is validated
// and D must agree across the file.
std::vector<VisualRecord> load_features(const std::filesystem::path& path,
                                        std::size_t n_obj = kDefaultObjectSlots);

struct Problem {
    std::string sample_id;  // empty when the record could not be identified
    std::size_t record_index = 0;
    std::string reason;
};

// Like load_features but collects every rejected record instead of stopping.
std::vector<Problem> validate_features(const std::filesystem::path& path,
                                       std::size_t n_obj = kDefaultObjectSlots);

void write_features_jsonl(const std::filesystem::path& path, std::span<const VisualRecord> records);
void write_features_binary(const std::filesystem::path& path, std::span<const VisualRecord> records);

// Per-sample Gaussian vectors normalised to unit length; object count drawn
// uniformly from [min_objects, max_objects]. Deterministic per seed.
std::vector<VisualRecord> synth_features(std::uint64_t seed, std::size_t n_samples,
                                         std::size_t min_objects, std::size_t max_objects,
                                         std::size_t dim, std::size_t n_obj = kDefaultObjectSlots);

}  // namespace ooc::visual
