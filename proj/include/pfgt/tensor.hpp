#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace pfgt {

template <typename T>
struct NodeT;

// Dense row-major tensor with reverse-mode gradient tracking. Copies alias
// the same buffers, so tensors are cheap to pass by value. Values are
// immutable once created except through the optimizer.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::shared_ptr<std::vector<T>> data;
  bool requires_grad = false;
  std::shared_ptr<std::vector<T>> grad;  // same length as data when present
  std::shared_ptr<NodeT<T>> node;        // set when produced by a tracked op

  TensorT() = default;

  static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
    TensorT t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(numel_of(t.shape), T(0));
    t.set_requires_grad(requires_grad);
    return t;
  }

  static TensorT from_values(std::vector<int> shape, std::vector<T> values,
                             bool requires_grad = false) {
    if (numel_of(shape) != values.size()) {
      throw std::invalid_argument("Tensor: shape does not match value count");
    }
    TensorT t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
  }

  static TensorT scalar(T v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  void set_requires_grad(bool rg) {
    requires_grad = rg;
    if (rg && !grad) grad = std::make_shared<std::vector<T>>(data->size(), T(0));
    if (!rg) grad.reset();
  }

  std::size_t numel() const { return data ? data->size() : 0; }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return numel() == 1; }

  T value() const {
    if (!is_scalar()) throw std::logic_error("Tensor::value: tensor is not scalar");
    return (*data)[0];
  }

  T at(std::size_t i) const { return (*data)[i]; }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }

  static std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
};

template <typename T>
struct NodeT {
  std::vector<TensorT<T>> parents;
  std::function<void(const NodeT<T>&)> backprop;
  std::shared_ptr<std::vector<T>> out_data;
  std::shared_ptr<std::vector<T>> out_grad;  // aliases the output tensor's grad
};

inline thread_local bool g_grad_enabled = true;

// Disables graph construction in scope. Inference paths use this so forward
// passes allocate no nodes or gradient buffers.
struct NoGradGuard {
  bool saved;
  NoGradGuard() : saved(g_grad_enabled) { g_grad_enabled = false; }
  ~NoGradGuard() { g_grad_enabled = saved; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Attaches a graph node to `out` when any parent tracks gradients. The
// backprop callable reads node.out_grad and must accumulate (never assign)
// into the parents' grads.
template <typename T, typename F>
TensorT<T> track(TensorT<T> out, std::vector<TensorT<T>> parents, F&& backprop) {
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) {
    if (p.requires_grad) any = true;
  }
  if (!any) return out;
  out.set_requires_grad(true);
  auto node = std::make_shared<NodeT<T>>();
  node->parents = std::move(parents);
  node->backprop = std::forward<F>(backprop);
  node->out_data = out.data;
  node->out_grad = out.grad;
  out.node = std::move(node);
  return out;
}

// Reverse-mode sweep from a scalar loss. Gradients of leaf tensors
// (parameters, inputs without a producing op) accumulate additively across
// calls; intermediate grads are transient and reset on every call.
template <typename T>
void backward(const TensorT<T>& loss) {
  if (!loss.is_scalar()) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss.requires_grad) throw std::invalid_argument("backward: loss does not track gradients");
  if (!loss.node) {
    (*loss.grad)[0] += T(1);
    return;
  }

  std::vector<NodeT<T>*> order;
  std::unordered_set<NodeT<T>*> seen;
  std::vector<std::pair<NodeT<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node.get(), 0);
  seen.insert(loss.node.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      NodeT<T>* parent = node->parents[idx].node.get();
      ++idx;
      if (parent && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT<T>* n : order) std::fill(n->out_grad->begin(), n->out_grad->end(), T(0));
  (*loss.node->out_grad)[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    (*it)->backprop(**it);
  }
}

using Tensor = TensorT<float>;

}  // namespace pfgt
