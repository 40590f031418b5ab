#pragma once

#include "sdfl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sdfl {

namespace detail {

template <typename T>
struct Node {
  Tensor<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Handle to a value in a reverse-mode computation graph.
///
/// Leaves are either constants (no gradient) or parameters (gradient
/// accumulated by backprop). Op results require a gradient iff some input
/// does; results that don't record no parents and no backward closure, so
/// evaluating a frozen network on constant inputs builds no graph.
template <typename T>
class Var {
 public:
  using Node = detail::Node<T>;

  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  static Var parameter(Tensor<T> value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Tensor<T>& value() const { return node_->value; }
  /// For optimizers and loaders; never mutate a value an unconsumed graph
  /// still depends on.
  Tensor<T>& mutable_value() { return node_->value; }

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  const char* op() const { return node_->op; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }

  /// Accumulated gradient; zeros if backprop never reached this value.
  std::vector<T> grad() const {
    if (has_grad()) return node_->grad;
    return std::vector<T>(node_->value.size(), T(0));
  }
  std::span<const T> grad_view() const { return node_->grad; }

  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  /// Copy of the value with no gradient link.
  Var detached() const { return constant(node_->value); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result. `backward` is stored only if a parent needs it.
template <typename T>
Var<T> make_result(const char* op, Tensor<T> value,
                   std::vector<std::shared_ptr<detail::Node<T>>> parents,
                   std::function<void(detail::Node<T>&)> backward) {
  auto n = std::make_shared<detail::Node<T>>();
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const auto& p) { return p->requires_grad; });
  if (any) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

/// Reverse-mode sweep from a scalar loss.
///
/// Intermediate gradients are recomputed from scratch on every call; leaf
/// (parameter) gradients accumulate across calls until zero_grad().
template <typename T>
void backprop(const Var<T>& loss) {
  using Node = detail::Node<T>;
  if (!loss) throw std::invalid_argument("backprop: empty loss handle");
  if (loss.size() != 1) {
    throw std::invalid_argument("backprop: loss must be scalar, got shape " +
                                shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), T(0));
  }
  loss.node()->ensure_grad()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->leaf) continue;
    if (!n->backward) {
      throw std::logic_error(std::string("backprop: no backward rule for op '") + n->op + "'");
    }
    n->backward(*n);
  }
}

}  // namespace sdfl
