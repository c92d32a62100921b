#pragma once
// Object-relationship graph network. Nodes are object features; every real
// object gets directed edges to its K most similar real objects, messages
// f([v_i, v_j - v_i]) are summed back onto the source node for T steps, the
// result is added to the input features, and one more message pass over the
// enhanced nodes yields per-edge relation features.

#include <cstddef>
#include <functional>
#include <vector>

#include "ooc/nn.hpp"
#include "ooc/tensor.hpp"

namespace ooc::graph {

struct GraphConfig {
    std::size_t k = 5;
    std::size_t steps = 2;
    std::size_t hidden_dim = 0;  // 0 → dim
    std::size_t dim = 1024;

    std::size_t hidden() const { return hidden_dim == 0 ? dim : hidden_dim; }
    void validate() const;
};

struct Edge {
    std::size_t src;
    std::size_t dst;
    bool operator==(const Edge&) const = default;
};
using EdgeIndex = std::vector<Edge>;

struct GraphParams {
    std::vector<nn::Mlp> steps;  // 2·dim → hidden → dim, one per step
    nn::Mlp extra;               // final relation-feature pass

    static GraphParams init(const GraphConfig& config, nn::Rng& rng);
    void collect(nn::ParamList& out) const;
};

using EdgeFn = std::function<Tensor(const Tensor&)>;

// Edges grouped by source in node order; within a source, neighbours by
// decreasing cosine similarity, ties to the lower index. Zero vectors have
// similarity 0 to everything.
EdgeIndex build_edges(const Tensor& object_feats, const std::vector<bool>& object_mask, std::size_t k);

// One row per edge: f(concat(v_src, v_dst - v_src)).
Tensor message_step(const Tensor& nodes, const EdgeIndex& edges, const EdgeFn& f);

// Sums each edge's message onto its source node.
Tensor aggregate(const Tensor& messages, const EdgeIndex& edges, std::size_t n_nodes);

struct GraphOutput {
    Tensor enhanced_nodes;  // N_obj × dim, masked rows zero
    Tensor edge_features;   // edges.size() × dim
    EdgeIndex edges;
};

GraphOutput run_graph(const Tensor& object_feats, const std::vector<bool>& object_mask,
                      const GraphConfig& config, const GraphParams& params);

}  // namespace ooc::graph
