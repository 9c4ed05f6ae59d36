#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "diffmvr/error.hpp"

namespace diffmvr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "x" : "") << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads `grad` of this node and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward;

  bool is_leaf() const { return !backward; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T{0});
  }
};

}  // namespace detail

/// RAII switch that disables tape recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Dense row-major array with optional participation in the reverse-mode tape.
///
/// Copies share storage (handle semantics); ops never mutate their inputs, so
/// a produced tensor is effectively immutable. Only optimizers and explicit
/// parameter loaders write through mutable_data().
template <class T>
class BasicTensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T{0}, requires_grad);
  }

  static BasicTensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> values(shape_numel(shape), value);
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (values.size() != shape_numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    for (auto extent : shape) {
      if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
  }

  static BasicTensor scalar(T value, bool requires_grad = false) {
    return from(Shape{}, std::vector<T>{value}, requires_grad);
  }

  /// Builds an op result. Tape edges are only recorded when grad mode is on
  /// and some parent requires grad.
  static BasicTensor make_result(Shape shape, std::vector<T> values,
                                 std::vector<BasicTensor> parents,
                                 std::function<void(Node&)> backward_fn) {
    BasicTensor out = from(std::move(shape), std::move(values));
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward = std::move(backward_fn);
    return out;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }
  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool value) {
    if (!node_->is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
    node_->requires_grad = value;
  }

  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const T> grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient buffer");
    return node_->grad;
  }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  /// Allocates (if needed) and zeroes the gradient accumulator.
  void zero_grad() { node_->grad.assign(node_->data.size(), T{0}); }
  void drop_grad() { node_->grad.clear(); }

  /// Deep copy with no tape history.
  BasicTensor detach() const { return from(shape(), node_->data, false); }

  bool all_finite() const {
    for (const T& v : node_->data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_node(const BasicTensor& other) const { return node_ == other.node_; }

  // Internal: op implementations need the node to wire backward closures.
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls until zero_grad(); interior gradients are recomputed each call.
template <class T>
void backward(const BasicTensor<T>& loss) {
  using Node = detail::TensorNode<T>;
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any requires_grad leaf");
  }
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
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
  for (Node* node : order) {
    if (node->is_leaf()) {
      node->ensure_grad();
    } else {
      node->grad.assign(node->data.size(), T{0});
    }
  }
  loss.node()->grad[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

template <class T>
void check_finite(const BasicTensor<T>& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace diffmvr
