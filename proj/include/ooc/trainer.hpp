#pragma once
// Teacher-forced training: losses, Adam, dataset assembly and the epoch loop.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ooc/bpe.hpp"
#include "ooc/context.hpp"
#include "ooc/model.hpp"
#include "ooc/nn.hpp"
#include "ooc/visual.hpp"

namespace ooc::train {

enum class LossKind { CE, WeightedCE, Focal };

struct LossSpec {
    LossKind kind = LossKind::CE;
    double gamma = 2.0;  // focal only
};

// "ce", "weighted-ce", "focal" or "focal:GAMMA".
LossSpec parse_loss(const std::string& text);
std::string loss_name(const LossSpec& spec);

// Sum over positions of the per-token loss; rows whose label equals `pad`
// are skipped. `weights` (one per vocabulary entry) is required for
// WeightedCE and ignored otherwise.
Tensor loss_sum(const Tensor& logits, std::span<const bpe::TokenId> labels, const LossSpec& spec,
                const std::vector<double>* weights = nullptr, std::optional<bpe::TokenId> pad = std::nullopt);
// loss_sum divided by the number of non-pad positions.
Tensor loss(const Tensor& logits, std::span<const bpe::TokenId> labels, const LossSpec& spec,
            const std::vector<double>* weights = nullptr, std::optional<bpe::TokenId> pad = std::nullopt);

// Inverse label frequency, clipped to [0.1, 10] relative to the mean count,
// then scaled so that the average weight over label occurrences is 1.
std::vector<double> token_weights(const std::vector<std::vector<bpe::TokenId>>& targets, std::size_t vocab_size);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(nn::ParamList params, AdamConfig config);
    // Applies one update from the accumulated gradients. A non-finite
    // gradient raises a Training error and leaves every parameter untouched.
    void step();
    std::size_t steps() const { return t_; }

private:
    nn::ParamList params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

struct TrainSample {
    std::string id;
    visual::VisualRecord visual;
    context::TextContext text;
    std::vector<bpe::TokenId> target;  // [start] ++ caption ++ [end]
};

// Pairs NER records (which carry the captions) with feature records by id.
// Missing feature ids raise a Data error listing them.
std::vector<TrainSample> build_dataset(std::span<const visual::VisualRecord> features,
                                       std::span<const context::NerRecord> ner, const bpe::BpeVocab& vocab,
                                       const model::ModelConfig& config, bool include_types);

std::vector<bpe::TokenId> caption_target(const std::string& caption, const bpe::BpeVocab& vocab,
                                         std::size_t max_caption_len);

// Deterministic by seed; keeps max(1, round(fraction·n)) samples in their original order.
std::vector<TrainSample> subsample(const std::vector<TrainSample>& data, double fraction, std::uint64_t seed);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    LossSpec loss;
    std::uint64_t seed = 0;
    model::Ablation ablation;
    double data_fraction = 1.0;
    // Stop once an epoch's mean loss falls below this; 0 disables.
    double target_loss = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
    std::size_t epoch;
    double loss;
    double tokens_per_sec;
};

struct TrainResult {
    model::ModelParams params;
    std::vector<EpochLog> log;
    std::size_t samples = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// `init` continues from existing parameters; otherwise they are drawn from the seed.
TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& train_config,
                  const model::ModelConfig& model_config, std::optional<model::ModelParams> init = std::nullopt,
                  const EpochCallback& on_epoch = {});

// Per-token loss of one sample, summed, with gradient recording.
Tensor sample_loss_sum(const TrainSample& sample, const model::ModelParams& params, const model::ModelConfig& config,
                       const TrainConfig& train_config, const std::vector<double>* weights,
                       model::ForwardContext fc = {});

// Gradient norm per parameter group after one backward pass over `batch`
// (no update is applied; gradients are cleared afterwards).
std::map<std::string, double> group_gradient_norms(const std::vector<TrainSample>& batch,
                                                   const model::ModelParams& params,
                                                   const model::ModelConfig& config, const TrainConfig& train_config);

std::vector<bpe::TokenId> predict(const TrainSample& sample, const model::ModelParams& params,
                                  const model::ModelConfig& config, const model::Ablation& ablation,
                                  const model::DecodeOptions& options = {});

void write_loss_log(const std::filesystem::path& path, std::span<const EpochLog> log);

// Named presets: "full", "w/o-visual", "w/o-textual", "w/o-net" (no entity
// type labels), "w/o-graph", "w/o-edge-features", "w/o-object-features".
model::Ablation ablation_preset(const std::string& name);
const std::vector<std::string>& ablation_names();

}  // namespace ooc::train
