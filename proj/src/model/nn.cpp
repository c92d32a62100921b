#include "ooc/nn.hpp"

#include <cmath>

#include "ooc/ops.hpp"

namespace ooc::nn {

Tensor normal_parameter(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, stddev);
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = gauss(rng);
    return Tensor::parameter(std::move(shape), std::move(values));
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
    return {normal_parameter({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng),
            Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

Tensor Linear::operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

void Linear::collect(ParamList& out, const std::string& name, const std::string& group) const {
    out.push_back({name + ".w", group, weight});
    out.push_back({name + ".b", group, bias});
}

Mlp Mlp::init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    Mlp m;
    m.fc1 = Linear::init(in, hidden, rng);
    m.fc2 = Linear::init(hidden, out, rng);
    return m;
}

Tensor Mlp::operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }

void Mlp::collect(ParamList& out, const std::string& name, const std::string& group) const {
    fc1.collect(out, name + ".fc1", group);
    fc2.collect(out, name + ".fc2", group);
}

LayerNorm LayerNorm::init(std::size_t n) {
    return {Tensor::parameter({n}, std::vector<double>(n, 1.0)),
            Tensor::parameter({n}, std::vector<double>(n, 0.0))};
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

void LayerNorm::collect(ParamList& out, const std::string& name, const std::string& group) const {
    out.push_back({name + ".g", group, gamma});
    out.push_back({name + ".b", group, beta});
}

void zero_grads(const ParamList& params) {
    for (const auto& p : params) p.tensor.zero_grad();
}

}  // namespace ooc::nn
