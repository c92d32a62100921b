#include "ooc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ooc/error.hpp"
#include "ooc/ops.hpp"

namespace ooc::model {
namespace {

constexpr double kEmbeddingStd = 0.02;

Tensor dropout(const Tensor& x, double p, ForwardContext fc) {
    if (p <= 0.0 || fc.dropout_rng == nullptr) return x;
    std::bernoulli_distribution keep(1.0 - p);
    std::vector<double> m(x.size());
    const double s = 1.0 / (1.0 - p);
    for (double& v : m) v = keep(*fc.dropout_rng) ? s : 0.0;
    return mul(x, Tensor::from(x.shape(), std::move(m)));
}

Attention init_attention(std::size_t d, nn::Rng& rng) {
    return {nn::Linear::init(d, d, rng), nn::Linear::init(d, d, rng), nn::Linear::init(d, d, rng),
            nn::Linear::init(d, d, rng)};
}

void collect_attention(nn::ParamList& out, const Attention& a, const std::string& name, const std::string& group) {
    a.q.collect(out, name + ".q", group);
    a.k.collect(out, name + ".k", group);
    a.v.collect(out, name + ".v", group);
    a.o.collect(out, name + ".o", group);
}

// Multi-head scaled dot-product attention. `causal`, when given, marks the
// query×key cells that must not be attended to.
Tensor attend(const Attention& a, const Tensor& xq, const Tensor& xkv, std::size_t heads,
              const std::vector<bool>* causal) {
    const Tensor q = a.q(xq);
    const Tensor k = a.k(xkv);
    const Tensor v = a.v(xkv);
    const std::size_t dh = q.cols() / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
        const Tensor kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
        const Tensor vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul_nt(qh, kh), inv);
        if (causal) scores = masked_fill(scores, *causal, kMaskedScore);
        outs.push_back(matmul(softmax(scores, 1), vh));
    }
    return a.o(heads == 1 ? outs.front() : concat(outs, 1));
}

Tensor feed_forward(const nn::Linear& ff1, const nn::Linear& ff2, const Tensor& x) { return ff2(gelu(ff1(x))); }

}  // namespace

// --- configuration ------------------------------------------------------------

void ModelConfig::validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorKind::Contract, "model config: " + msg); };
    if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) bad("d_model must be a positive multiple of n_heads");
    if (n_layers == 0) bad("n_layers must be at least 1");
    if (d_ff == 0) bad("d_ff must be at least 1");
    if (vocab_size == 0) bad("vocab_size must be set");
    if (l_text == 0) bad("l_text must be at least 1");
    if (n_obj == 0) bad("n_obj must be at least 1");
    if (max_caption_len < 2) bad("max_caption_len must be at least 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
    if (graph.dim != d_vis) bad("graph dimension must equal d_vis");
    graph.validate();
    if (specials.start >= vocab_size || specials.end >= vocab_size || specials.pad >= vocab_size) {
        bad("special token ids must be below vocab_size");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"d_model", d_model},
            {"n_heads", n_heads},
            {"n_layers", n_layers},
            {"d_ff", d_ff},
            {"vocab_size", vocab_size},
            {"l_text", l_text},
            {"n_obj", n_obj},
            {"d_vis", d_vis},
            {"max_caption_len", max_caption_len},
            {"dropout", dropout},
            {"pre_norm", pre_norm},
            {"tie_embeddings", tie_embeddings},
            {"graph_k", graph.k},
            {"graph_steps", graph.steps},
            {"graph_hidden", graph.hidden_dim},
            {"start_id", specials.start},
            {"end_id", specials.end},
            {"pad_id", specials.pad}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.d_model = j.value("d_model", c.d_model);
        c.n_heads = j.value("n_heads", c.n_heads);
        c.n_layers = j.value("n_layers", c.n_layers);
        c.d_ff = j.value("d_ff", c.d_ff);
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.l_text = j.value("l_text", c.l_text);
        c.n_obj = j.value("n_obj", c.n_obj);
        c.d_vis = j.value("d_vis", c.d_vis);
        c.max_caption_len = j.value("max_caption_len", c.max_caption_len);
        c.dropout = j.value("dropout", c.dropout);
        c.pre_norm = j.value("pre_norm", c.pre_norm);
        c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
        c.graph.k = j.value("graph_k", c.graph.k);
        c.graph.steps = j.value("graph_steps", c.graph.steps);
        c.graph.hidden_dim = j.value("graph_hidden", c.graph.hidden_dim);
        c.graph.dim = c.d_vis;
        c.specials.start = j.value("start_id", c.specials.start);
        c.specials.end = j.value("end_id", c.specials.end);
        c.specials.pad = j.value("pad_id", c.specials.pad);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Schema, std::string("model config: ") + e.what());
    }
    return c;
}

nlohmann::json Ablation::to_json() const {
    return {{"use_visual", use_visual},         {"use_textual", use_textual},
            {"use_graph", use_graph},           {"use_edge_feats", use_edge_feats},
            {"use_object_feats", use_object_feats}, {"use_entity_types", use_entity_types}};
}

Ablation Ablation::from_json(const nlohmann::json& j) {
    Ablation a;
    try {
        a.use_visual = j.value("use_visual", true);
        a.use_textual = j.value("use_textual", true);
        a.use_graph = j.value("use_graph", true);
        a.use_edge_feats = j.value("use_edge_feats", true);
        a.use_object_feats = j.value("use_object_feats", true);
        a.use_entity_types = j.value("use_entity_types", true);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Schema, std::string("ablation flags: ") + e.what());
    }
    return a;
}

// --- parameters ------------------------------------------------------------------

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    nn::Rng rng(seed);
    const std::size_t d = config.d_model;
    ModelParams p;
    p.token_embedding = nn::normal_parameter({config.vocab_size, d}, kEmbeddingStd, rng);
    p.decoder_position = nn::normal_parameter({config.max_decoder_len(), d}, kEmbeddingStd, rng);
    p.text_position = nn::normal_parameter({config.l_text, d}, kEmbeddingStd, rng);
    p.segment_image = nn::normal_parameter({d}, kEmbeddingStd, rng);
    p.segment_object = nn::normal_parameter({d}, kEmbeddingStd, rng);
    p.segment_edge = nn::normal_parameter({d}, kEmbeddingStd, rng);
    p.segment_text = nn::normal_parameter({d}, kEmbeddingStd, rng);
    p.visual_projection = nn::Linear::init(config.d_vis, d, rng);
    p.graph = graph::GraphParams::init(config.graph, rng);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        EncoderLayer e;
        e.ln1 = nn::LayerNorm::init(d);
        e.ln2 = nn::LayerNorm::init(d);
        e.attn = init_attention(d, rng);
        e.ff1 = nn::Linear::init(d, config.d_ff, rng);
        e.ff2 = nn::Linear::init(config.d_ff, d, rng);
        p.encoder.push_back(std::move(e));
    }
    p.encoder_norm = nn::LayerNorm::init(d);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        DecoderLayer dl;
        dl.ln1 = nn::LayerNorm::init(d);
        dl.ln2 = nn::LayerNorm::init(d);
        dl.ln3 = nn::LayerNorm::init(d);
        dl.self_attn = init_attention(d, rng);
        dl.cross_attn = init_attention(d, rng);
        dl.ff1 = nn::Linear::init(d, config.d_ff, rng);
        dl.ff2 = nn::Linear::init(config.d_ff, d, rng);
        p.decoder.push_back(std::move(dl));
    }
    p.decoder_norm = nn::LayerNorm::init(d);
    if (!config.tie_embeddings) p.output_projection = nn::Linear::init(d, config.vocab_size, rng);
    return p;
}

nn::ParamList ModelParams::named() const {
    nn::ParamList out;
    out.push_back({"token_embedding", "token_embedding", token_embedding});
    out.push_back({"decoder_position", "decoder_position", decoder_position});
    out.push_back({"text_position", "text_position", text_position});
    out.push_back({"segment.image", "segment_image", segment_image});
    out.push_back({"segment.object", "segment_object", segment_object});
    out.push_back({"segment.edge", "segment_edge", segment_edge});
    out.push_back({"segment.text", "segment_text", segment_text});
    visual_projection.collect(out, "visual_projection", "visual_projection");
    graph.collect(out);
    for (std::size_t l = 0; l < encoder.size(); ++l) {
        const auto& e = encoder[l];
        const std::string n = "encoder." + std::to_string(l);
        e.ln1.collect(out, n + ".ln1", "encoder");
        collect_attention(out, e.attn, n + ".attn", "encoder");
        e.ln2.collect(out, n + ".ln2", "encoder");
        e.ff1.collect(out, n + ".ff1", "encoder");
        e.ff2.collect(out, n + ".ff2", "encoder");
    }
    encoder_norm.collect(out, "encoder.norm", "encoder");
    for (std::size_t l = 0; l < decoder.size(); ++l) {
        const auto& dl = decoder[l];
        const std::string n = "decoder." + std::to_string(l);
        dl.ln1.collect(out, n + ".ln1", "decoder");
        collect_attention(out, dl.self_attn, n + ".self_attn", "decoder");
        dl.ln2.collect(out, n + ".ln2", "decoder");
        collect_attention(out, dl.cross_attn, n + ".cross_attn", "decoder");
        dl.ln3.collect(out, n + ".ln3", "decoder");
        dl.ff1.collect(out, n + ".ff1", "decoder");
        dl.ff2.collect(out, n + ".ff2", "decoder");
    }
    decoder_norm.collect(out, "decoder.norm", "decoder");
    if (output_projection) output_projection->collect(out, "output_projection", "output_projection");
    return out;
}

std::vector<std::string> param_groups(const ModelConfig& config) {
    std::vector<std::string> g{"token_embedding", "decoder_position", "text_position", "segment_image",
                               "segment_object",  "segment_edge",     "segment_text",  "visual_projection",
                               "graph_steps",     "graph_extra",      "encoder",       "decoder"};
    if (!config.tie_embeddings) g.push_back("output_projection");
    return g;
}

std::vector<std::string> disabled_groups(const Ablation& a) {
    std::vector<std::string> off;
    auto add = [&](const char* g) {
        if (std::find(off.begin(), off.end(), g) == off.end()) off.emplace_back(g);
    };
    if (!a.use_visual) {
        for (const char* g : {"segment_image", "segment_object", "segment_edge", "visual_projection", "graph_steps",
                              "graph_extra"}) {
            add(g);
        }
    }
    if (!a.use_textual) {
        add("text_position");
        add("segment_text");
    }
    if (!a.use_graph) {
        add("segment_edge");
        add("graph_steps");
        add("graph_extra");
    }
    if (!a.use_edge_feats) {
        add("segment_edge");
        add("graph_extra");
    }
    if (!a.use_object_feats) add("segment_object");
    if (!a.use_object_feats && !a.use_edge_feats) add("graph_steps");
    return off;
}

// --- forward ------------------------------------------------------------------------

EncoderInput build_encoder_input(const visual::VisualRecord& record, const context::TextContext& text,
                                 const ModelConfig& config, const ModelParams& params, const Ablation& ablation,
                                 ForwardContext fc) {
    const std::size_t n_obj = config.n_obj;
    const std::size_t d_vis = config.d_vis;
    if (record.dim() != d_vis || record.slots() != n_obj || record.object_feats.size() != n_obj * d_vis) {
        fail(ErrorKind::Dimension, "record '" + record.sample_id + "': features are " +
                                       std::to_string(record.slots()) + "×" + std::to_string(record.dim()) +
                                       ", model expects " + std::to_string(n_obj) + "×" + std::to_string(d_vis));
    }
    if (text.ids.size() != config.l_text || text.mask.size() != config.l_text) {
        fail(ErrorKind::Dimension, "text context of length " + std::to_string(text.ids.size()) +
                                       ", model expects " + std::to_string(config.l_text));
    }

    std::vector<Tensor> parts;
    std::vector<std::size_t> positions;
    const std::size_t edge_base = 1 + n_obj;
    const std::size_t text_base = edge_base + config.edge_cap();

    if (ablation.use_visual) {
        const Tensor image = Tensor::from({1, d_vis}, record.image_feat);
        parts.push_back(add_row(params.visual_projection(image), params.segment_image));
        positions.push_back(0);

        const Tensor objects = Tensor::from({n_obj, d_vis}, record.object_feats);
        const bool run = ablation.use_graph && (ablation.use_object_feats || ablation.use_edge_feats);
        graph::GraphOutput g;
        if (run) g = graph::run_graph(objects, record.object_mask, config.graph, params.graph);

        std::vector<std::size_t> slots;
        for (std::size_t s = 0; s < n_obj; ++s) {
            if (record.object_mask[s]) slots.push_back(s);
        }
        if (ablation.use_object_feats && !slots.empty()) {
            const Tensor rows = gather_rows(run ? g.enhanced_nodes : objects, slots);
            parts.push_back(add_row(params.visual_projection(rows), params.segment_object));
            for (std::size_t s : slots) positions.push_back(1 + s);
        }
        if (run && ablation.use_edge_feats && !g.edges.empty()) {
            const std::size_t m = std::min(g.edges.size(), config.edge_cap());
            const Tensor rows = m == g.edges.size() ? g.edge_features : slice_rows(g.edge_features, 0, m);
            parts.push_back(add_row(params.visual_projection(rows), params.segment_edge));
            for (std::size_t e = 0; e < m; ++e) positions.push_back(edge_base + e);
        }
    }

    if (ablation.use_textual) {
        std::vector<std::size_t> ids, pos;
        for (std::size_t p = 0; p < config.l_text; ++p) {
            if (!text.mask[p]) continue;
            if (text.ids[p] >= config.vocab_size) {
                fail(ErrorKind::Vocabulary, "context token id " + std::to_string(text.ids[p]) +
                                                " outside the model vocabulary of " + std::to_string(config.vocab_size));
            }
            ids.push_back(text.ids[p]);
            pos.push_back(p);
        }
        if (!ids.empty()) {
            const Tensor emb = add(gather_rows(params.token_embedding, ids), gather_rows(params.text_position, pos));
            parts.push_back(add_row(emb, params.segment_text));
            for (std::size_t p : pos) positions.push_back(text_base + p);
        }
    }

    EncoderInput in;
    const std::size_t s_len = config.sequence_length();
    in.mask.assign(s_len, false);
    for (std::size_t p : positions) in.mask[p] = true;
    if (parts.empty()) {
        in.tokens = Tensor::zeros({s_len, config.d_model});
        return in;
    }
    const Tensor rows = dropout(parts.size() == 1 ? parts.front() : concat(parts, 0), config.dropout, fc);
    in.tokens = scatter_add_rows(rows, positions, s_len);
    return in;
}

Memory encode(const EncoderInput& input, const ModelParams& params, const ModelConfig& config,
              ForwardContext fc) {
    if (input.tokens.rank() != 2 || input.tokens.rows() != input.mask.size() ||
        input.tokens.cols() != config.d_model) {
        fail(ErrorKind::Dimension, "encode: tokens " + shape_string(input.tokens.shape()) + " with a mask of " +
                                       std::to_string(input.mask.size()));
    }
    Memory mem;
    for (std::size_t p = 0; p < input.mask.size(); ++p) {
        if (input.mask[p]) mem.positions.push_back(p);
    }
    if (mem.positions.empty()) fail(ErrorKind::Contract, "encode: every encoder position is masked");
    Tensor x = gather_rows(input.tokens, mem.positions);
    for (const auto& l : params.encoder) {
        if (config.pre_norm) {
            const Tensor h = l.ln1(x);
            x = add(x, dropout(attend(l.attn, h, h, config.n_heads, nullptr), config.dropout, fc));
            x = add(x, dropout(feed_forward(l.ff1, l.ff2, l.ln2(x)), config.dropout, fc));
        } else {
            x = l.ln1(add(x, dropout(attend(l.attn, x, x, config.n_heads, nullptr), config.dropout, fc)));
            x = l.ln2(add(x, dropout(feed_forward(l.ff1, l.ff2, x), config.dropout, fc)));
        }
    }
    mem.states = params.encoder_norm(x);
    return mem;
}

Tensor decode_logits(std::span<const bpe::TokenId> prefix, const Memory& memory, const ModelParams& params,
                     const ModelConfig& config, ForwardContext fc) {
    const std::size_t t = prefix.size();
    if (t == 0 || t > config.max_decoder_len()) {
        fail(ErrorKind::Contract, "decode: prefix length " + std::to_string(t) + " outside [1, " +
                                      std::to_string(config.max_decoder_len()) + "]");
    }
    std::vector<std::size_t> ids(prefix.begin(), prefix.end());
    for (std::size_t id : ids) {
        if (id >= config.vocab_size) {
            fail(ErrorKind::Vocabulary, "decode: token id " + std::to_string(id) + " outside the vocabulary");
        }
    }
    std::vector<bool> causal(t * t, false);
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = r + 1; c < t; ++c) causal[r * t + c] = true;
    }
    Tensor x = add(gather_rows(params.token_embedding, ids), slice_rows(params.decoder_position, 0, t));
    x = dropout(x, config.dropout, fc);
    const Tensor& mem = memory.states;
    for (const auto& l : params.decoder) {
        if (config.pre_norm) {
            const Tensor h = l.ln1(x);
            x = add(x, dropout(attend(l.self_attn, h, h, config.n_heads, &causal), config.dropout, fc));
            x = add(x, dropout(attend(l.cross_attn, l.ln2(x), mem, config.n_heads, nullptr), config.dropout, fc));
            x = add(x, dropout(feed_forward(l.ff1, l.ff2, l.ln3(x)), config.dropout, fc));
        } else {
            x = l.ln1(add(x, dropout(attend(l.self_attn, x, x, config.n_heads, &causal), config.dropout, fc)));
            x = l.ln2(add(x, dropout(attend(l.cross_attn, x, mem, config.n_heads, nullptr), config.dropout, fc)));
            x = l.ln3(add(x, dropout(feed_forward(l.ff1, l.ff2, x), config.dropout, fc)));
        }
    }
    x = params.decoder_norm(x);
    return params.output_projection ? (*params.output_projection)(x) : matmul_nt(x, params.token_embedding);
}

// --- generation ----------------------------------------------------------------------

namespace {

bool allowed(bpe::TokenId id, const ModelConfig& config) {
    return id != config.specials.pad && id != config.specials.start;
}

std::span<const double> last_row(const Tensor& logits) {
    return logits.data().subspan((logits.rows() - 1) * logits.cols(), logits.cols());
}

std::vector<bpe::TokenId> greedy(const Memory& memory, const ModelParams& params, const ModelConfig& config,
                                 std::size_t max_len) {
    std::vector<bpe::TokenId> seq{config.specials.start};
    for (std::size_t step = 0; step < max_len; ++step) {
        const Tensor logits = decode_logits(seq, memory, params, config);
        const auto row = last_row(logits);
        bpe::TokenId best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        bool found = false;
        for (bpe::TokenId id = 0; id < row.size(); ++id) {
            if (!allowed(id, config)) continue;
            if (!found || row[id] > best_v) {
                best = id;
                best_v = row[id];
                found = true;
            }
        }
        if (best == config.specials.end) break;
        seq.push_back(best);
    }
    return {seq.begin() + 1, seq.end()};
}

struct Hypothesis {
    std::vector<bpe::TokenId> seq;  // starts with the start token, never holds end
    double log_prob = 0.0;
    std::size_t length = 0;  // generated tokens, counting a final end token
    bool done = false;
    double last_logit = 0.0;
    bpe::TokenId last_id = 0;

    double score() const { return length == 0 ? 0.0 : log_prob / static_cast<double>(length); }
};

bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    if (a.last_logit != b.last_logit) return a.last_logit > b.last_logit;
    if (a.last_id != b.last_id) return a.last_id < b.last_id;
    return a.seq < b.seq;
}

std::vector<bpe::TokenId> beam(const Memory& memory, const ModelParams& params, const ModelConfig& config,
                               std::size_t width, std::size_t max_len) {
    std::vector<Hypothesis> beams{{{config.specials.start}, 0.0, 0, false, 0.0, 0}};
    for (std::size_t step = 0; step < max_len; ++step) {
        std::vector<Hypothesis> cands;
        for (const auto& h : beams) {
            if (h.done) {
                cands.push_back(h);
                continue;
            }
            const Tensor logits = decode_logits(h.seq, memory, params, config);
            const auto row = last_row(logits);
            double mx = -std::numeric_limits<double>::infinity();
            for (double v : row) mx = std::max(mx, v);
            double z = 0.0;
            for (double v : row) z += std::exp(v - mx);
            const double lse = mx + std::log(z);
            std::vector<Hypothesis> local;
            for (bpe::TokenId id = 0; id < row.size(); ++id) {
                if (!allowed(id, config)) continue;
                Hypothesis n{h.seq, h.log_prob + (row[id] - lse), h.length + 1, id == config.specials.end, row[id], id};
                if (!n.done) n.seq.push_back(id);
                local.push_back(std::move(n));
            }
            // Candidates of one parent share a length, so its best `width` suffice.
            const std::size_t keep = std::min(width, local.size());
            std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), better);
            cands.insert(cands.end(), std::make_move_iterator(local.begin()),
                         std::make_move_iterator(local.begin() + static_cast<std::ptrdiff_t>(keep)));
        }
        std::sort(cands.begin(), cands.end(), better);
        if (cands.size() > width) cands.resize(width);
        beams = std::move(cands);
        if (std::all_of(beams.begin(), beams.end(), [](const Hypothesis& h) { return h.done; })) break;
    }
    const auto& best = *std::min_element(beams.begin(), beams.end(), better);
    return {best.seq.begin() + 1, best.seq.end()};
}

}  // namespace

std::vector<bpe::TokenId> generate(const Memory& memory, const ModelParams& params, const ModelConfig& config,
                                   const DecodeOptions& options) {
    const std::size_t max_len = options.max_len == 0 ? config.max_caption_len : options.max_len;
    if (max_len > config.max_caption_len) {
        fail(ErrorKind::Contract, "generate: max_len " + std::to_string(max_len) + " exceeds max_caption_len " +
                                      std::to_string(config.max_caption_len));
    }
    NoGradGuard no_grad;
    if (options.beam_width <= 1) return greedy(memory, params, config, max_len);
    return beam(memory, params, config, options.beam_width, max_len);
}

DecodeOptions parse_decode_mode(const std::string& mode) {
    DecodeOptions o;
    if (mode == "greedy") return o;
    if (mode.rfind("beam:", 0) == 0) {
        const std::string n = mode.substr(5);
        if (!n.empty() && std::all_of(n.begin(), n.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
            n.size() < 6) {
            o.beam_width = std::stoul(n);
            if (o.beam_width >= 1) return o;
        }
    }
    fail(ErrorKind::Usage, "decode mode '" + mode + "' is not 'greedy' or 'beam:K' with K ≥ 1");
}

}  // namespace ooc::model
