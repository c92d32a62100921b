#include "ooc/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "ooc/error.hpp"

namespace ooc {
namespace {

thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool trainable) {
    if (shape_size(shape) != values.size()) {
        fail(ErrorKind::Dimension, "tensor shape " + shape_string(shape) + " holds " +
                                       std::to_string(shape_size(shape)) + " values, got " +
                                       std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = trainable;
    return node;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::vector<double>& detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor::Tensor() : node_(make_leaf({0}, {}, false)) {}

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_size(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::filled(Shape shape, double value) {
    const std::size_t n = shape_size(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), false));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::scalar(double value) { return Tensor(make_leaf({}, {value}, false)); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

std::size_t Tensor::rows() const {
    const Shape& s = node_->shape;
    if (s.size() == 2) return s[0];
    if (s.size() <= 1) return 1;
    fail(ErrorKind::Dimension, "rows() on tensor of shape " + shape_string(s));
}

std::size_t Tensor::cols() const {
    const Shape& s = node_->shape;
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    if (s.empty()) return 1;
    fail(ErrorKind::Dimension, "cols() on tensor of shape " + shape_string(s));
}

std::span<double> Tensor::mutable_data() {
    if (!is_leaf()) fail(ErrorKind::Contract, "mutable_data() on a non-leaf tensor");
    return node_->value;
}

double Tensor::item() const {
    if (node_->value.size() != 1) {
        fail(ErrorKind::Contract, "item() on tensor of shape " + shape_string(node_->shape));
    }
    return node_->value[0];
}

void Tensor::zero_grad() const { node_->grad.clear(); }

void Tensor::backward() const {
    if (node_->value.size() != 1) {
        fail(ErrorKind::Contract,
             "backward() needs a scalar loss, got shape " + shape_string(node_->shape));
    }
    if (!node_->requires_grad) {
        fail(ErrorKind::Contract, "backward() on a tensor that does not require grad");
    }

    // Iterative post-order DFS; `order` ends up topologically sorted with
    // inputs before outputs.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

Tensor Tensor::detach() const {
    return Tensor(make_leaf(node_->shape, node_->value, false));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

std::string_view error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Contract: return "contract error";
        case ErrorKind::Vocabulary: return "vocabulary error";
        case ErrorKind::Input: return "input error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Schema: return "schema error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Training: return "training error";
        case ErrorKind::Io: return "io error";
        case ErrorKind::Usage: return "usage error";
    }
    return "error";
}

}  // namespace ooc
