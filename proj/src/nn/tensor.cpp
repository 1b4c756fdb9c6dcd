#include "fslab/nn/tensor.hpp"

#include <unordered_set>

namespace fslab::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

Mat& Node::ensure_grad()
{
    if (!has_grad()) {
        grad = Mat::Zero(value.rows(), value.cols());
    }
    return grad;
}

void Var::zero_grad()
{
    if (node_ && node_->has_grad()) {
        node_->grad.setZero();
    }
}

Var constant(Mat value)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var leaf(Mat value, bool requires_grad)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(std::move(node));
}

Var make_node(Mat value, std::vector<Var> parents, std::function<void(Node&)> fn)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (!g_grad_enabled) {
        return Var(std::move(node));
    }
    bool any = false;
    for (const auto& p : parents) {
        any = any || p.requires_grad();
    }
    if (!any) {
        return Var(std::move(node));
    }
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
        node->parents.push_back(p.shared());
    }
    node->backward_fn = std::move(fn);
    return Var(std::move(node));
}

void backward(const Var& root)
{
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS; `order` ends up with parents before children.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad().array() += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward_fn || !node->has_grad()) {
            continue;
        }
        for (auto& p : node->parents) {
            if (p->requires_grad) {
                p->ensure_grad();
            }
        }
        node->backward_fn(*node);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace fslab::nn
