// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csdn/tensor.hpp"

namespace csdn::ad {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t index) : graph_(graph), index_(index) {}

  Graph<T>& graph() const;
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  const Tensor<T>& grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t index_ = 0;
};

/// A differentiable primitive. forward() may cache data needed by backward()
/// (argmax positions, matched pairs); backward() accumulates vector-Jacobian
/// products into the non-null entries of `grad_in`.
template <typename T>
class Op {
 public:
  virtual ~Op() = default;
  virtual std::string_view name() const = 0;
  virtual Tensor<T> forward(std::span<const Tensor<T>* const> in) = 0;
  virtual void backward(std::span<const Tensor<T>* const> in, const Tensor<T>& out,
                        const Tensor<T>& grad_out, std::span<Tensor<T>* const> grad_in) const = 0;
};

/// Reverse-mode tape. Nodes are evaluated eagerly as they are recorded, so the
/// node list is always in topological order; eval() replays the recorded
/// primitives after named inputs are rebound.
template <typename T>
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Named leaf that can be rebound by eval(). Gradients are kept only when
  /// requires_grad is set.
  Var<T> input(std::string name, Tensor<T> value, bool requires_grad = false);
  /// Anonymous leaf without gradient.
  Var<T> constant(Tensor<T> value);
  /// Leaf that borrows an externally owned parameter tensor. Recording the
  /// same tensor twice returns the same node, so fan-out accumulates.
  Var<T> param(const Tensor<T>& value, std::string name);

  Var<T> apply(std::unique_ptr<Op<T>> op, std::vector<Var<T>> inputs);

  void mark_output(std::string name, Var<T> v);

  /// Rebinds named inputs without recomputing; the graph is stale until eval().
  void set_input(const std::string& name, Tensor<T> value);
  /// Recomputes every primitive in recorded order and returns marked outputs.
  std::map<std::string, Tensor<T>> eval();
  std::map<std::string, Tensor<T>> eval(const std::map<std::string, Tensor<T>>& inputs);

  /// Backpropagates from a scalar node. Gradients of earlier calls are cleared.
  void backward(Var<T> output);

  const Tensor<T>& value(Var<T> v) const;
  /// Gradient of the last backward() output with respect to v; zeros when v
  /// did not contribute. Throws for nodes that do not require gradients.
  const Tensor<T>& grad(Var<T> v) const;
  bool requires_grad(Var<T> v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool stale() const noexcept { return stale_; }
  std::string_view op_name(Var<T> v) const;

  /// Parameter leaves in recording order.
  const std::vector<std::pair<const Tensor<T>*, Var<T>>>& params() const noexcept {
    return params_;
  }

  /// Verify every produced value is finite (debug aid; off by default).
  void set_check_finite(bool on) noexcept { check_finite_ = on; }

 private:
  struct Node {
    std::unique_ptr<Op<T>> op;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::string name;
  };

  std::size_t check(Var<T> v) const;
  const Tensor<T>& node_value(const Node& n) const { return n.borrowed ? *n.borrowed : n.value; }
  Tensor<T> run_forward(std::size_t index, Node& node);
  void verify_finite(std::size_t index, const Node& node) const;

  std::deque<Node> nodes_;  // stable addresses: Var::value() hands out references
  std::unordered_map<std::string, std::size_t> named_inputs_;
  std::unordered_map<const Tensor<T>*, std::size_t> param_index_;
  std::vector<std::pair<const Tensor<T>*, Var<T>>> params_;
  std::vector<std::pair<std::string, std::size_t>> outputs_;
  bool stale_ = false;
  bool check_finite_ = false;
};

namespace testing {
/// Negative-control hook for gradient checks: when set, the named primitive's
/// vector-Jacobian product is scaled by (1 + factor). Empty name disables.
void set_vjp_perturbation(std::string primitive, double factor = 1e-2);
const std::string& vjp_perturbation_target();
double vjp_perturbation_factor();
}  // namespace testing

template <typename T>
Graph<T>& Var<T>::graph() const {
  if (!graph_) throw std::logic_error("Var: handle is not bound to a graph");
  return *graph_;
}
template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph().value(*this);
}
template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return graph().grad(*this);
}

}  // namespace csdn::ad
