#include "ooc/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "ooc/error.hpp"
#include "ooc/ops.hpp"

namespace ooc::train {
namespace {

void fisher_yates(std::vector<std::size_t>& v, nn::Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

std::size_t label_count(const TrainSample& s) { return s.target.size() - 1; }

}  // namespace

// --- losses ------------------------------------------------------------------------

LossSpec parse_loss(const std::string& text) {
    if (text == "ce") return {LossKind::CE, 2.0};
    if (text == "weighted-ce") return {LossKind::WeightedCE, 2.0};
    if (text == "focal") return {LossKind::Focal, 2.0};
    if (text.rfind("focal:", 0) == 0) {
        try {
            std::size_t used = 0;
            const double g = std::stod(text.substr(6), &used);
            if (used == text.size() - 6 && g >= 0.0 && std::isfinite(g)) return {LossKind::Focal, g};
        } catch (const std::exception&) {
        }
    }
    fail(ErrorKind::Usage, "loss '" + text + "' is not one of ce, weighted-ce, focal, focal:GAMMA (GAMMA ≥ 0)");
}

std::string loss_name(const LossSpec& spec) {
    switch (spec.kind) {
        case LossKind::CE:
            return "ce";
        case LossKind::WeightedCE:
            return "weighted-ce";
        case LossKind::Focal: {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof buf, spec.gamma);
            return "focal:" + std::string(buf, r.ptr);
        }
    }
    return "ce";
}

Tensor loss_sum(const Tensor& logits, std::span<const bpe::TokenId> labels, const LossSpec& spec,
                const std::vector<double>* weights, std::optional<bpe::TokenId> pad) {
    if (logits.rank() != 2 || logits.rows() != labels.size()) {
        fail(ErrorKind::Dimension, "loss: logits " + shape_string(logits.shape()) + " for " +
                                       std::to_string(labels.size()) + " labels");
    }
    std::vector<std::size_t> rows, cols;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (pad && labels[r] == *pad) continue;
        if (labels[r] >= logits.cols()) {
            fail(ErrorKind::Vocabulary, "loss: label " + std::to_string(labels[r]) + " outside the vocabulary");
        }
        rows.push_back(r);
        cols.push_back(labels[r]);
    }
    if (rows.empty()) return Tensor::scalar(0.0);
    const Tensor kept = rows.size() == labels.size() ? logits : gather_rows(logits, rows);
    const Tensor lp = pick(log_softmax(kept), cols);
    switch (spec.kind) {
        case LossKind::CE:
            return scale(sum(lp), -1.0);
        case LossKind::WeightedCE: {
            if (weights == nullptr || weights->size() != logits.cols()) {
                fail(ErrorKind::Contract, "weighted cross entropy needs one weight per vocabulary entry");
            }
            std::vector<double> w;
            w.reserve(cols.size());
            for (std::size_t c : cols) w.push_back((*weights)[c]);
            return scale(sum(mul(lp, Tensor::from({cols.size(), 1}, std::move(w)))), -1.0);
        }
        case LossKind::Focal: {
            if (!(spec.gamma >= 0.0)) fail(ErrorKind::Contract, "focal loss needs gamma ≥ 0");
            const Tensor focus = pow_scalar(add_scalar(scale(exp(lp), -1.0), 1.0), spec.gamma);
            return scale(sum(mul(focus, lp)), -1.0);
        }
    }
    fail(ErrorKind::Contract, "unknown loss kind");
}

Tensor loss(const Tensor& logits, std::span<const bpe::TokenId> labels, const LossSpec& spec,
            const std::vector<double>* weights, std::optional<bpe::TokenId> pad) {
    std::size_t n = 0;
    for (auto l : labels) n += (!pad || l != *pad) ? 1 : 0;
    const Tensor s = loss_sum(logits, labels, spec, weights, pad);
    return n == 0 ? s : scale(s, 1.0 / static_cast<double>(n));
}

std::vector<double> token_weights(const std::vector<std::vector<bpe::TokenId>>& targets, std::size_t vocab_size) {
    std::vector<double> count(vocab_size, 0.0);
    double total = 0.0;
    for (const auto& t : targets) {
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (t[i] >= vocab_size) fail(ErrorKind::Vocabulary, "token_weights: id outside the vocabulary");
            count[t[i]] += 1.0;
            total += 1.0;
        }
    }
    if (total == 0.0) return std::vector<double>(vocab_size, 1.0);
    std::size_t distinct = 0;
    for (double c : count) distinct += c > 0.0 ? 1 : 0;
    const double mean_count = total / static_cast<double>(distinct);
    std::vector<double> w(vocab_size);
    for (std::size_t v = 0; v < vocab_size; ++v) {
        const double raw = count[v] > 0.0 ? mean_count / count[v] : 10.0;
        w[v] = std::clamp(raw, 0.1, 10.0);
    }
    double occ = 0.0;
    for (std::size_t v = 0; v < vocab_size; ++v) occ += count[v] * w[v];
    const double norm = total / occ;
    for (double& x : w) x *= norm;
    return w;
}

// --- optimiser ------------------------------------------------------------------------

Adam::Adam(nn::ParamList params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.lr > 0.0)) fail(ErrorKind::Contract, "Adam: learning rate must be positive");
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        for (double g : p.tensor.grad()) {
            if (!std::isfinite(g)) {
                fail(ErrorKind::Training, "non-finite gradient in parameter '" + p.name + "' at step " +
                                              std::to_string(t_ + 1));
            }
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor t = params_[i].tensor;
        const auto grad = t.grad();
        auto value = t.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad.empty() ? 0.0 : grad[k];
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
            value[k] -= config_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
        }
    }
}

// --- data ---------------------------------------------------------------------------------

std::vector<bpe::TokenId> caption_target(const std::string& caption, const bpe::BpeVocab& vocab,
                                         std::size_t max_caption_len) {
    auto ids = vocab.encode(caption);
    if (ids.size() > max_caption_len) ids.resize(max_caption_len);
    std::vector<bpe::TokenId> t;
    t.reserve(ids.size() + 2);
    t.push_back(vocab.specials().start);
    t.insert(t.end(), ids.begin(), ids.end());
    t.push_back(vocab.specials().end);
    return t;
}

std::vector<TrainSample> build_dataset(std::span<const visual::VisualRecord> features,
                                       std::span<const context::NerRecord> ner, const bpe::BpeVocab& vocab,
                                       const model::ModelConfig& config, bool include_types) {
    std::unordered_map<std::string, const visual::VisualRecord*> by_id;
    for (const auto& f : features) by_id.emplace(f.sample_id, &f);
    std::vector<std::string> missing;
    for (const auto& r : ner) {
        if (!by_id.count(r.id)) missing.push_back(r.id);
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
        if (missing.size() > 10) list += ", …";
        fail(ErrorKind::Data, std::to_string(missing.size()) + " NER id(s) have no feature record: " + list);
    }
    std::vector<TrainSample> out;
    out.reserve(ner.size());
    for (const auto& r : ner) {
        if (!r.caption) fail(ErrorKind::Input, "NER record '" + r.id + "' has no caption to train on");
        TrainSample s;
        s.id = r.id;
        s.visual = *by_id.at(r.id);
        if (s.visual.dim() != config.d_vis || s.visual.slots() != config.n_obj) {
            fail(ErrorKind::Schema, "record '" + r.id + "': features are " + std::to_string(s.visual.slots()) + "×" +
                                        std::to_string(s.visual.dim()) + ", model expects " +
                                        std::to_string(config.n_obj) + "×" + std::to_string(config.d_vis));
        }
        s.text = context::build_context(r.entities, vocab, config.l_text, include_types);
        s.target = caption_target(*r.caption, vocab, config.max_caption_len);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TrainSample> subsample(const std::vector<TrainSample>& data, double fraction, std::uint64_t seed) {
    if (data.empty()) fail(ErrorKind::Input, "empty training set");
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::Contract, "data fraction must lie in (0, 1]");
    if (fraction == 1.0) return data;
    const std::size_t keep =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size()))));
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    nn::Rng rng(seed);
    fisher_yates(idx, rng);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    std::vector<TrainSample> out;
    for (std::size_t i : idx) out.push_back(data[i]);
    return out;
}

// --- configuration --------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(lr > 0.0)) fail(ErrorKind::Contract, "train config: lr must be positive");
    if (epochs == 0) fail(ErrorKind::Contract, "train config: epochs must be at least 1");
    if (batch_size == 0) fail(ErrorKind::Contract, "train config: batch_size must be at least 1");
    if (!(loss.gamma >= 0.0)) fail(ErrorKind::Contract, "train config: focal gamma must be ≥ 0");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0)) {
        fail(ErrorKind::Contract, "train config: data_fraction must lie in (0, 1]");
    }
    if (!(target_loss >= 0.0)) fail(ErrorKind::Contract, "train config: target_loss must be ≥ 0");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"loss", loss_name(loss)},
            {"seed", seed},
            {"ablation", ablation.to_json()},
            {"data_fraction", data_fraction},
            {"target_loss", target_loss}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.lr = j.value("lr", c.lr);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        if (j.contains("loss")) c.loss = parse_loss(j["loss"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        if (j.contains("ablation")) c.ablation = model::Ablation::from_json(j["ablation"]);
        c.data_fraction = j.value("data_fraction", c.data_fraction);
        c.target_loss = j.value("target_loss", c.target_loss);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Schema, std::string("train config: ") + e.what());
    }
    return c;
}

model::Ablation ablation_preset(const std::string& name) {
    model::Ablation a;
    if (name == "full") return a;
    if (name == "w/o-visual") {
        a.use_visual = false;
    } else if (name == "w/o-textual") {
        a.use_textual = false;
    } else if (name == "w/o-net") {
        a.use_entity_types = false;
    } else if (name == "w/o-graph") {
        a.use_graph = false;
    } else if (name == "w/o-edge-features") {
        a.use_edge_feats = false;
    } else if (name == "w/o-object-features") {
        a.use_object_feats = false;
    } else {
        std::string valid;
        for (const auto& n : ablation_names()) valid += (valid.empty() ? "" : ", ") + n;
        fail(ErrorKind::Usage, "unknown ablation '" + name + "'; valid: " + valid);
    }
    return a;
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names{"full",      "w/o-visual",        "w/o-textual",        "w/o-net",
                                                "w/o-graph", "w/o-edge-features", "w/o-object-features"};
    return names;
}

// --- training ----------------------------------------------------------------------------------

Tensor sample_loss_sum(const TrainSample& sample, const model::ModelParams& params, const model::ModelConfig& config,
                       const TrainConfig& tc, const std::vector<double>* weights, model::ForwardContext fc) {
    if (sample.target.size() < 2) fail(ErrorKind::Input, "sample '" + sample.id + "' has an empty target");
    const auto in = model::build_encoder_input(sample.visual, sample.text, config, params, tc.ablation, fc);
    const auto mem = model::encode(in, params, config, fc);
    const std::span<const bpe::TokenId> t(sample.target);
    const Tensor logits = model::decode_logits(t.first(t.size() - 1), mem, params, config, fc);
    return loss_sum(logits, t.subspan(1), tc.loss, weights, config.specials.pad);
}

TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& tc, const model::ModelConfig& mc,
                  std::optional<model::ModelParams> init, const EpochCallback& on_epoch) {
    tc.validate();
    mc.validate();
    const auto data = subsample(dataset, tc.data_fraction, tc.seed);

    TrainResult result{init ? std::move(*init) : model::ModelParams::init(mc, tc.seed), {}, data.size()};
    const auto& params = result.params;
    const auto named = params.named();

    std::vector<double> weights;
    if (tc.loss.kind == LossKind::WeightedCE) {
        std::vector<std::vector<bpe::TokenId>> targets;
        for (const auto& s : data) targets.push_back(s.target);
        weights = token_weights(targets, mc.vocab_size);
    }
    const std::vector<double>* wp = weights.empty() ? nullptr : &weights;

    Adam adam(named, {tc.lr});
    nn::Rng order_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    nn::Rng dropout_rng(tc.seed + 1);
    const model::ForwardContext fc{mc.dropout > 0.0 ? &dropout_rng : nullptr};
    nn::zero_grads(named);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        fisher_yates(order, order_rng);
        double total = 0.0;
        std::size_t tokens = 0;
        for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
            const std::size_t e = std::min(order.size(), b + tc.batch_size);
            std::size_t batch_tokens = 0;
            for (std::size_t i = b; i < e; ++i) batch_tokens += label_count(data[order[i]]);
            for (std::size_t i = b; i < e; ++i) {
                const Tensor ls = sample_loss_sum(data[order[i]], params, mc, tc, wp, fc);
                total += ls.item();
                scale(ls, 1.0 / static_cast<double>(batch_tokens)).backward();
            }
            adam.step();
            nn::zero_grads(named);
            tokens += batch_tokens;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const EpochLog entry{epoch, total / static_cast<double>(tokens),
                             secs > 0.0 ? static_cast<double>(tokens) / secs : 0.0};
        if (!std::isfinite(entry.loss)) {
            fail(ErrorKind::Training, "loss became non-finite at epoch " + std::to_string(epoch));
        }
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        if (tc.target_loss > 0.0 && entry.loss < tc.target_loss) break;
    }
    return result;
}

std::map<std::string, double> group_gradient_norms(const std::vector<TrainSample>& batch,
                                                   const model::ModelParams& params,
                                                   const model::ModelConfig& config, const TrainConfig& tc) {
    const auto named = params.named();
    nn::zero_grads(named);
    std::vector<double> weights;
    if (tc.loss.kind == LossKind::WeightedCE) {
        std::vector<std::vector<bpe::TokenId>> targets;
        for (const auto& s : batch) targets.push_back(s.target);
        weights = token_weights(targets, config.vocab_size);
    }
    std::size_t tokens = 0;
    for (const auto& s : batch) tokens += label_count(s);
    for (const auto& s : batch) {
        scale(sample_loss_sum(s, params, config, tc, weights.empty() ? nullptr : &weights),
              1.0 / static_cast<double>(tokens))
            .backward();
    }
    std::map<std::string, double> sq;
    for (const auto& p : named) {
        double& acc = sq[p.group];
        for (double g : p.tensor.grad()) acc += g * g;
    }
    nn::zero_grads(named);
    for (auto& [g, v] : sq) v = std::sqrt(v);
    return sq;
}

std::vector<bpe::TokenId> predict(const TrainSample& sample, const model::ModelParams& params,
                                  const model::ModelConfig& config, const model::Ablation& ablation,
                                  const model::DecodeOptions& options) {
    NoGradGuard no_grad;
    const auto in = model::build_encoder_input(sample.visual, sample.text, config, params, ablation);
    return model::generate(model::encode(in, params, config), params, config, options);
}

void write_loss_log(const std::filesystem::path& path, std::span<const EpochLog> log) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write loss log " + path.string());
    out << "epoch,loss,tokens_per_sec\n";
    out.precision(17);
    for (const auto& e : log) out << e.epoch << "," << e.loss << "," << e.tokens_per_sec << "\n";
}

}  // namespace ooc::train
