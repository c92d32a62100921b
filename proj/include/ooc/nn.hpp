#pragma once
// Small trainable building blocks shared by the graph network and the
// captioning transformer, plus the named-parameter list used by the
// optimiser, gradient checks and checkpoints.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ooc/tensor.hpp"

namespace ooc::nn {

using Rng = std::mt19937_64;

Tensor normal_parameter(Shape shape, double stddev, Rng& rng);

struct NamedParam {
    std::string name;
    std::string group;
    Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// y = x·W + b with W stored in×out.
struct Linear {
    Tensor weight;
    Tensor bias;

    static Linear init(std::size_t in, std::size_t out, Rng& rng);
    std::size_t in() const { return weight.rows(); }
    std::size_t out() const { return weight.cols(); }
    Tensor operator()(const Tensor& x) const;
    void collect(ParamList& out, const std::string& name, const std::string& group) const;
};

// Linear → GELU → Linear.
struct Mlp {
    Linear fc1;
    Linear fc2;

    static Mlp init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(ParamList& out, const std::string& name, const std::string& group) const;
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    static LayerNorm init(std::size_t n);
    Tensor operator()(const Tensor& x) const;
    void collect(ParamList& out, const std::string& name, const std::string& group) const;
};

void zero_grads(const ParamList& params);

}  // namespace ooc::nn
