#include "ooc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ooc/error.hpp"
#include "ooc/ops.hpp"

namespace ooc::graph {

void GraphConfig::validate() const {
    if (k < 1) fail(ErrorKind::Contract, "graph: K must be at least 1");
    if (steps < 1) fail(ErrorKind::Contract, "graph: T must be at least 1");
    if (dim < 1) fail(ErrorKind::Contract, "graph: feature dimension must be at least 1");
}

GraphParams GraphParams::init(const GraphConfig& config, nn::Rng& rng) {
    config.validate();
    GraphParams p;
    for (std::size_t t = 0; t < config.steps; ++t) {
        p.steps.push_back(nn::Mlp::init(2 * config.dim, config.hidden(), config.dim, rng));
    }
    p.extra = nn::Mlp::init(2 * config.dim, config.hidden(), config.dim, rng);
    return p;
}

void GraphParams::collect(nn::ParamList& out) const {
    for (std::size_t t = 0; t < steps.size(); ++t) {
        steps[t].collect(out, "graph.step" + std::to_string(t), "graph_steps");
    }
    extra.collect(out, "graph.extra", "graph_extra");
}

EdgeIndex build_edges(const Tensor& object_feats, const std::vector<bool>& object_mask, std::size_t k) {
    const std::size_t n = object_feats.rows();
    const std::size_t d = object_feats.cols();
    if (object_mask.size() != n) {
        fail(ErrorKind::Dimension, "build_edges: mask of " + std::to_string(object_mask.size()) + " for " +
                                       std::to_string(n) + " nodes");
    }
    const auto x = object_feats.data();
    std::vector<std::size_t> real;
    for (std::size_t i = 0; i < n; ++i) {
        if (object_mask[i]) real.push_back(i);
    }
    std::vector<double> norm(n, 0.0);
    for (std::size_t i : real) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += x[i * d + c] * x[i * d + c];
        norm[i] = std::sqrt(s);
    }
    auto cosine = [&](std::size_t i, std::size_t j) {
        if (norm[i] == 0.0 || norm[j] == 0.0) return 0.0;
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += x[i * d + c] * x[j * d + c];
        return s / (norm[i] * norm[j]);
    };

    EdgeIndex edges;
    const std::size_t degree = real.empty() ? 0 : std::min(k, real.size() - 1);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i : real) {
        cand.clear();
        for (std::size_t j : real) {
            if (j != i) cand.emplace_back(cosine(i, j), j);
        }
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t r = 0; r < degree; ++r) edges.push_back({i, cand[r].second});
    }
    return edges;
}

Tensor message_step(const Tensor& nodes, const EdgeIndex& edges, const EdgeFn& f) {
    std::vector<std::size_t> src, dst;
    src.reserve(edges.size());
    dst.reserve(edges.size());
    for (const auto& e : edges) {
        src.push_back(e.src);
        dst.push_back(e.dst);
    }
    const Tensor vi = gather_rows(nodes, src);
    const Tensor vj = gather_rows(nodes, dst);
    return f(concat({vi, sub(vj, vi)}, 1));
}

Tensor aggregate(const Tensor& messages, const EdgeIndex& edges, std::size_t n_nodes) {
    if (messages.rows() != edges.size()) {
        fail(ErrorKind::Dimension, "aggregate: " + std::to_string(messages.rows()) + " messages for " +
                                       std::to_string(edges.size()) + " edges");
    }
    std::vector<std::size_t> src;
    src.reserve(edges.size());
    for (const auto& e : edges) src.push_back(e.src);
    return scatter_add_rows(messages, src, n_nodes);
}

GraphOutput run_graph(const Tensor& object_feats, const std::vector<bool>& object_mask,
                      const GraphConfig& config, const GraphParams& params) {
    config.validate();
    const std::size_t n = object_feats.rows();
    const std::size_t d = object_feats.cols();
    if (d != config.dim) {
        fail(ErrorKind::Dimension, "run_graph: features of dimension " + std::to_string(d) + ", graph expects " +
                                       std::to_string(config.dim));
    }
    if (params.steps.size() != config.steps) {
        fail(ErrorKind::Contract, "run_graph: parameters hold " + std::to_string(params.steps.size()) +
                                      " steps, config asks for " + std::to_string(config.steps));
    }
    GraphOutput out;
    out.edges = build_edges(object_feats, object_mask, config.k);

    // Masked rows are forced to zero so that nothing stored there can leak
    // into the skip path.
    std::vector<bool> masked_cells(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill_n(masked_cells.begin() + static_cast<std::ptrdiff_t>(i * d), d, !object_mask[i]);
    }
    const Tensor v0 = masked_fill(object_feats, masked_cells, 0.0);

    if (out.edges.empty()) {
        out.enhanced_nodes = v0;
        out.edge_features = Tensor::zeros({0, d});
        return out;
    }
    Tensor v = v0;
    for (const auto& f : params.steps) {
        v = aggregate(message_step(v, out.edges, f), out.edges, n);
    }
    out.enhanced_nodes = add(v, v0);
    out.edge_features = message_step(out.enhanced_nodes, out.edges, params.extra);
    return out;
}

}  // namespace ooc::graph
