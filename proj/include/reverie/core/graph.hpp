// Reverse-mode automatic differentiation on 2-D Eigen matrices.
//
// A Graph is a tape: ops append nodes eagerly during the forward pass and
// backward() walks the tape in reverse. Trainable parameters are "leased"
// into the tape per forward pass; after backward() their accumulated
// gradients are flushed back into the owning Param's grad buffer.
#pragma once

#include "reverie/core/common.hpp"

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace reverie {

// A persistent trainable array. Modules own Params; optimizers step them.
template <class T>
struct Param {
  Mat<T> value;
  Mat<T> grad;
  bool trainable = true;

  void zero_grad() {
    grad.resize(value.rows(), value.cols());
    grad.setZero();
  }
};

// Named views over a module's parameters, used by optimizers, checkpoints
// and checksum tests.
template <class T>
struct ParamMap {
  std::vector<std::pair<std::string, Param<T>*>> items;

  void add(const std::string& name, Param<T>& p) { items.push_back({name, &p}); }
  void merge(const ParamMap& other, const std::string& prefix) {
    for (const auto& [n, p] : other.items) items.push_back({prefix + n, p});
  }
  Index total_size() const {
    Index n = 0;
    for (const auto& [_, p] : items) n += p->value.size();
    return n;
  }
  void set_trainable(bool on) {
    for (auto& [_, p] : items) p->trainable = on;
  }
};

template <class T>
class Graph;

template <class T>
struct Node {
  Mat<T> value;
  Mat<T> grad;  // allocated lazily on first accumulation
  bool needs_grad = false;
  std::function<void(Graph<T>&, Node<T>&)> backward;

  bool has_grad() const { return grad.size() > 0; }
  void accumulate(const Mat<T>& g) {
    if (!has_grad()) {
      grad = g;
    } else {
      grad += g;
    }
  }
  // Accumulate from an arbitrary Eigen expression without materializing it.
  template <class Expr>
  void accumulate_expr(const Expr& g) {
    if (!has_grad()) {
      grad = g;
    } else {
      grad += g;
    }
  }
  Mat<T>& ensure_grad() {
    if (!has_grad()) {
      grad.resize(value.rows(), value.cols());
      grad.setZero();
    }
    return grad;
  }
};

template <class T>
using Var = Node<T>*;

template <class T>
class Graph {
 public:
  // When false, ops still compute values but record no backward closures.
  bool recording = true;

  Var<T> make(Mat<T> value, bool needs_grad,
              std::function<void(Graph<T>&, Node<T>&)> backward = nullptr) {
    nodes_.emplace_back();
    Node<T>& n = nodes_.back();
    n.value = std::move(value);
    n.needs_grad = recording && needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
    return &n;
  }

  Var<T> constant(Mat<T> value) { return make(std::move(value), false); }

  Var<T> constant_scalar(T v) {
    Mat<T> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  // Brings a parameter into the tape. Gradients flow back into p.grad when
  // backward() runs; frozen (non-trainable) params enter as constants.
  Var<T> lease(Param<T>& p) {
    if (!recording || !p.trainable) return constant(p.value);
    Var<T> n = make(p.value, true, nullptr);
    leases_.push_back({&p, n});
    return n;
  }

  void backward(Var<T> root) {
    require(root->value.size() == 1, "backward: root must be a scalar");
    root->ensure_grad();
    root->grad(0, 0) = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = *it;
      if (n.needs_grad && n.backward && n.has_grad()) n.backward(*this, n);
    }
    for (auto& [p, n] : leases_) {
      if (!n->has_grad()) continue;
      if (p->grad.size() == 0) p->zero_grad();
      p->grad += n->grad;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node<T>> nodes_;
  std::vector<std::pair<Param<T>*, Var<T>>> leases_;
};

}  // namespace reverie
