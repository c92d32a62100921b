#pragma once
// Model checkpoint file. Little-endian throughout:
//   "OOCK" | u32 version=1 | u32 json_len | json bytes
//   | u32 param_count | per param: u32 name_len, name, u32 rank, u32 dims[rank], f32 values[prod(dims)]
// The JSON holds {"model": ModelConfig, "ablation": ..., "vocab": {"tokens": vocab.json text,
// "merges": merges.txt text}, "extra": free-form}. Parameters are stored at f32 precision, so
// a reloaded model matches the saved one to about 1e-7 relative.

#include <filesystem>

#include "json.hpp"
#include "ooc/bpe.hpp"
#include "ooc/model.hpp"

namespace ooc::model {

struct Checkpoint {
    ModelConfig config;
    Ablation ablation;
    ModelParams params;
    bpe::BpeVocab vocab;
    nlohmann::json extra;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const Ablation& ablation,
                     const ModelParams& params, const bpe::BpeVocab& vocab,
                     const nlohmann::json& extra = nlohmann::json::object());

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ooc::model
