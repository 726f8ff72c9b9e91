#include "allocnas/autograd.hpp"

#include "allocnas/errors.hpp"

#include <unordered_set>

namespace allocnas {

namespace {
thread_local bool t_grad_enabled = true;
}

Tensor& Node::grad_slot()
{
    if (grad.empty())
        grad = Tensor::zeros_like(value);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::detached_copy() const
{
    Var copy(node_->value, node_->requires_grad);
    copy.node_->grad = node_->grad;
    return copy;
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn)
{
    Var out(std::move(value), false);
    if (!t_grad_enabled)
        return out;
    bool any = false;
    for (const auto& in : inputs)
        any = any || in.requires_grad();
    if (!any)
        return out;
    auto& node = *out.node();
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& in : inputs)
        node.inputs.push_back(in.node());
    node.backward = std::move(backward_fn);
    return out;
}

namespace {

std::vector<Node*> topo_order(Node* root)
{
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // iterative post-order DFS
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

} // namespace

void backward(const Var& output, const Tensor& seed)
{
    if (!output.defined())
        throw ContractError("backward: undefined output");
    if (seed.shape() != output.shape())
        throw DimensionError("backward: seed " + shape_to_string(seed.shape()) + " vs output " + shape_to_string(output.shape()));
    Node* root = output.node().get();
    if (!root->requires_grad)
        return;
    const auto order = topo_order(root);
    auto& g = root->grad_slot();
    for (std::size_t i = 0; i < g.numel(); ++i)
        g[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty())
            node->backward(*node);
    }
}

void backward(const Var& loss)
{
    if (!loss.defined() || loss.value().numel() != 1)
        throw ContractError("backward: loss must be a scalar");
    backward(loss, Tensor(loss.shape(), 1.0f));
}

} // namespace allocnas
