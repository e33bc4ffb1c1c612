#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mouthtrace/tensor.hpp"

namespace mouthtrace::nn {

struct Node;

// Receives the gradient flowing into a node and pushes contributions to the
// node's parents through Node::accumulate.
using BackwardFn = std::function<void(const Tensor& grad_out, const std::vector<std::shared_ptr<Node>>& parents)>;

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  const char* op = "leaf";

  /// Adds g into this node's gradient; no-op for nodes outside the graph.
  void accumulate(const Tensor& g);
  void accumulate(Tensor&& g);
};

/// Handle to a value in a dynamically recorded computation graph.
///
/// Operations whose inputs all have requires_grad == false produce plain
/// constants and record nothing, so frozen sub-networks cost no memory for
/// the backward pass.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->has_grad; }
  /// Gradient after backward(); zeros if nothing reached this node.
  Tensor grad() const;

  bool valid() const { return node_ != nullptr; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Var make_result(Tensor value, const std::vector<Var>& inputs, BackwardFn fn, const char* op);

  std::shared_ptr<Node> node_;
};

/// Wraps an op output. The backward closure is kept only when some input
/// requires a gradient.
Var make_result(Tensor value, const std::vector<Var>& inputs, BackwardFn fn, const char* op);

/// Reverse sweep from a scalar. Throws NumericError when the loss is NaN or
/// when no recorded graph leads to it (backward without a train-mode forward).
void backward(const Var& loss);

}  // namespace mouthtrace::nn
