#pragma once
// Dense row-major tensor with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a shared node. Nodes created by ops while
// gradient recording is enabled keep references to their inputs and a local
// backward rule; Tensor::backward() walks that graph once in reverse
// topological order. Values are immutable after creation except for
// parameter leaves, which the optimiser updates in place.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ooc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
public:
    Tensor();

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);
    // Trainable leaf.
    static Tensor parameter(Shape shape, std::vector<double> values);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    // Rank-2 accessors; a rank-1 tensor of length n reads as 1×n.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return node_->value; }
    // Leaves only; throws on op outputs.
    std::span<double> mutable_data();
    double operator[](std::size_t i) const { return node_->value[i]; }
    double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return !node_->backward_fn; }
    bool has_grad() const { return !node_->grad.empty(); }
    // Zero-length span until a gradient has been accumulated.
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() const;

    // Populates gradients of every trainable leaf reachable from this scalar.
    void backward() const;

    // Same values, no history, not trainable.
    Tensor detach() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }
    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace ooc
