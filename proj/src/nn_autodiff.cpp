#include "mouthtrace/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace mouthtrace::nn {

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (g.shape() != value.shape()) {
    throw ShapeError(std::string("gradient shape ") + shape_string(g.shape()) + " does not match value " +
                     shape_string(value.shape()) + " in op " + op);
  }
  if (!has_grad) {
    grad = g;
    has_grad = true;
    return;
  }
  auto dst = grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Node::accumulate(Tensor&& g) {
  if (!requires_grad) return;
  if (!has_grad && g.shape() == value.shape()) {
    grad = std::move(g);
    has_grad = true;
    return;
  }
  accumulate(static_cast<const Tensor&>(g));
}

Var Var::constant(Tensor value) { return leaf(std::move(value), false); }

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Tensor Var::grad() const {
  if (node_->has_grad) return node_->grad;
  return Tensor(node_->value.shape());
}

Var make_result(Tensor value, const std::vector<Var>& inputs, BackwardFn fn, const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.valid()) throw NumericError("backward on an empty variable");
  const auto& root = loss.node();
  if (root->value.numel() != 1) throw ShapeError("backward expects a scalar, got " + shape_string(root->value.shape()));
  if (std::isnan(root->value[0])) throw NumericError("NaN in loss");
  if (!root->requires_grad || (!root->backward && root->parents.empty())) {
    throw NumericError("backward without forward: loss has no recorded graph");
  }

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->accumulate(Tensor(root->value.shape(), 1.0f));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->has_grad || !node->backward) continue;
    node->backward(node->grad, node->parents);
  }
}

}  // namespace mouthtrace::nn
