#pragma once

#include "allocnas/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace allocnas {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded value in the computation graph.
struct Node {
    Tensor value;
    Tensor grad; // empty until something flows into it
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    /// Pushes `self.grad` into the grads of `self.inputs`.
    std::function<void(Node& self)> backward;

    /// Gradient slot, zero-allocated on first use.
    Tensor& grad_slot();
};

/// Handle to a graph node. Copies share the node; use `detached_copy` for a
/// deep copy.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    bool defined() const noexcept { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad_slot() { return node_->grad_slot(); }
    bool requires_grad() const { return node_->requires_grad; }
    const Shape& shape() const { return node_->value.shape(); }
    const NodePtr& node() const noexcept { return node_; }

    /// Fresh leaf with copied value (and copied grad if present).
    Var detached_copy() const;

private:
    NodePtr node_;
};

/// Whether ops record the graph on this thread.
bool grad_enabled() noexcept;

/// RAII scope that disables graph recording on the current thread.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Result node for an op. Records inputs and the backward closure only when
/// recording is on and some input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Reverse sweep from a scalar loss (seed 1). Throws ContractError when the
/// loss is not a scalar.
void backward(const Var& loss);

/// Reverse sweep from an arbitrary output with an explicit seed gradient.
void backward(const Var& output, const Tensor& seed);

} // namespace allocnas
