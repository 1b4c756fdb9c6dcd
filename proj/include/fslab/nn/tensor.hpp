#pragma once

#include "fslab/core/matrix.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace fslab::nn {

using Mat = fslab::Matrix;
using Vec = Eigen::VectorXd;

/// One vertex of the reverse-mode graph. Every value is a 2D row-major matrix;
/// sequences are laid out as rows and features as columns.
struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Mat& ensure_grad();
    bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
};

/// Shared handle to a graph node. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Mat& value() const { return node_->value; }
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const { return node_->grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    double scalar() const { return node_->value(0, 0); }
    bool defined() const { return static_cast<bool>(node_); }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }

    void zero_grad();

private:
    std::shared_ptr<Node> node_;
};

/// Leaf holding data that never receives gradient.
Var constant(Mat value);
/// Leaf that accumulates gradient across backward passes until zero_grad().
Var leaf(Mat value, bool requires_grad = true);

/// Builds an interior node. When gradients are disabled or no parent needs
/// one, the result is a plain constant and `fn` is dropped.
Var make_node(Mat value, std::vector<Var> parents, std::function<void(Node&)> fn);

/// Seeds d(root)/d(root) = 1 and propagates in reverse topological order.
void backward(const Var& root);

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace fslab::nn
