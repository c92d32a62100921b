#pragma once
// Encoder-decoder captioning transformer.
//
// The encoder reads one joint sequence
//   [image | N_obj object slots | N_obj·K edge slots | L_text context tokens]
// where visual rows are projected D_vis → d_model and tagged with a learned
// segment vector, and text rows are token + position + segment embeddings.
// Only unmasked rows take part in attention: encode() drops masked rows, so
// the memory it returns is the compacted set of real positions.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ooc/bpe.hpp"
#include "ooc/context.hpp"
#include "ooc/graph.hpp"
#include "ooc/nn.hpp"
#include "ooc/visual.hpp"

namespace ooc::model {

struct ModelConfig {
    std::size_t d_model = 128;
    std::size_t n_heads = 4;
    std::size_t n_layers = 3;
    std::size_t d_ff = 512;
    std::size_t vocab_size = 0;
    std::size_t l_text = 20;
    std::size_t n_obj = visual::kDefaultObjectSlots;
    std::size_t d_vis = 64;
    std::size_t max_caption_len = 100;
    double dropout = 0.0;
    bool pre_norm = true;
    bool tie_embeddings = false;
    graph::GraphConfig graph{5, 2, 0, 64};
    bpe::Specials specials;

    std::size_t edge_cap() const { return n_obj * graph.k; }
    std::size_t sequence_length() const { return 1 + n_obj + edge_cap() + l_text; }
    // Decoder inputs are [start] ++ caption, so one row more than the caption cap.
    std::size_t max_decoder_len() const { return max_caption_len + 1; }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Which encoder segments exist; disabled segments are masked out and their
// parameters never enter the graph.
struct Ablation {
    bool use_visual = true;
    bool use_textual = true;
    bool use_graph = true;
    bool use_edge_feats = true;
    bool use_object_feats = true;
    bool use_entity_types = true;

    bool operator==(const Ablation&) const = default;
    nlohmann::json to_json() const;
    static Ablation from_json(const nlohmann::json& j);
};

struct Attention {
    nn::Linear q, k, v, o;
};

struct EncoderLayer {
    nn::LayerNorm ln1, ln2;
    Attention attn;
    nn::Linear ff1, ff2;
};

struct DecoderLayer {
    nn::LayerNorm ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    nn::Linear ff1, ff2;
};

struct ModelParams {
    Tensor token_embedding;  // vocab × d_model
    Tensor decoder_position;  // max_decoder_len × d_model
    Tensor text_position;    // l_text × d_model
    Tensor segment_image, segment_object, segment_edge, segment_text;  // d_model each
    nn::Linear visual_projection;
    graph::GraphParams graph;
    std::vector<EncoderLayer> encoder;
    nn::LayerNorm encoder_norm;
    std::vector<DecoderLayer> decoder;
    nn::LayerNorm decoder_norm;
    std::optional<nn::Linear> output_projection;  // absent when tied to the token embedding

    static ModelParams init(const ModelConfig& config, std::uint64_t seed);
    // Stable order; names are unique and double as checkpoint keys.
    nn::ParamList named() const;
};

// Parameter groups in the order named() first mentions them.
std::vector<std::string> param_groups(const ModelConfig& config);
// Groups whose parameters cannot receive gradient under the ablation.
std::vector<std::string> disabled_groups(const Ablation& ablation);

struct EncoderInput {
    Tensor tokens;           // sequence_length × d_model; masked rows are zero
    std::vector<bool> mask;  // true = real
};

// Active only during training when dropout > 0.
struct ForwardContext {
    nn::Rng* dropout_rng = nullptr;
};

EncoderInput build_encoder_input(const visual::VisualRecord& record, const context::TextContext& text,
                                 const ModelConfig& config, const ModelParams& params, const Ablation& ablation,
                                 ForwardContext fc = {});

struct Memory {
    Tensor states;                       // real positions × d_model
    std::vector<std::size_t> positions;  // index into the full encoder sequence
};

// Throws a Contract error when every position is masked.
Memory encode(const EncoderInput& input, const ModelParams& params, const ModelConfig& config,
              ForwardContext fc = {});

// Teacher-forced logits, one row per prefix position.
Tensor decode_logits(std::span<const bpe::TokenId> prefix, const Memory& memory, const ModelParams& params,
                     const ModelConfig& config, ForwardContext fc = {});

struct DecodeOptions {
    std::size_t beam_width = 1;  // 1 → greedy
    std::size_t max_len = 0;     // 0 → max_caption_len
};

// Caption token ids without start/end. Never emits pad or start.
std::vector<bpe::TokenId> generate(const Memory& memory, const ModelParams& params, const ModelConfig& config,
                                   const DecodeOptions& options = {});

// "greedy" or "beam:K".
DecodeOptions parse_decode_mode(const std::string& mode);

}  // namespace ooc::model
