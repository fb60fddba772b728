// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace csdn {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

namespace ad {

namespace testing {
namespace {
std::string& target() {
  static std::string name;
  return name;
}
double& factor() {
  static double f = 0.0;
  return f;
}
}  // namespace

void set_vjp_perturbation(std::string primitive, double f) {
  target() = std::move(primitive);
  factor() = f;
}
const std::string& vjp_perturbation_target() { return target(); }
double vjp_perturbation_factor() { return factor(); }
}  // namespace testing

template <typename T>
Graph<T>::Graph() = default;

template <typename T>
std::size_t Graph<T>::check(Var<T> v) const {
  if (&v.graph() != this) throw std::logic_error("graph: handle belongs to a different graph");
  if (v.index() >= nodes_.size()) throw std::logic_error("graph: stale node handle");
  return v.index();
}

template <typename T>
Var<T> Graph<T>::input(std::string name, Tensor<T> value, bool requires_grad) {
  if (named_inputs_.count(name)) throw std::invalid_argument("graph: duplicate input '" + name + "'");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.name = name;
  nodes_.push_back(std::move(n));
  named_inputs_.emplace(std::move(name), nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::param(const Tensor<T>& value, std::string name) {
  if (auto it = param_index_.find(&value); it != param_index_.end()) return Var<T>(this, it->second);
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  const std::size_t idx = nodes_.size() - 1;
  param_index_.emplace(&value, idx);
  params_.emplace_back(&value, Var<T>(this, idx));
  return Var<T>(this, idx);
}

template <typename T>
Tensor<T> Graph<T>::run_forward(std::size_t index, Node& node) {
  std::vector<const Tensor<T>*> in;
  in.reserve(node.inputs.size());
  for (auto i : node.inputs) in.push_back(&node_value(nodes_[i]));
  try {
    return node.op->forward(in);
  } catch (const ShapeError& e) {
    std::ostringstream os;
    os << "node " << index << " (" << node.op->name() << "): " << e.what();
    throw ShapeError(os.str());
  }
}

template <typename T>
void Graph<T>::verify_finite(std::size_t index, const Node& node) const {
  if (!check_finite_) return;
  if (!all_finite<T>(node_value(node).data())) {
    std::ostringstream os;
    os << "node " << index << " (" << (node.op ? node.op->name() : std::string_view("leaf"))
       << ") produced a non-finite value";
    throw NumericError(os.str());
  }
}

template <typename T>
Var<T> Graph<T>::apply(std::unique_ptr<Op<T>> op, std::vector<Var<T>> inputs) {
  if (stale_) throw std::logic_error("graph: inputs were rebound; call eval() before recording");
  Node n;
  n.op = std::move(op);
  for (auto& v : inputs) {
    const std::size_t i = check(v);
    n.inputs.push_back(i);
    n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  }
  const std::size_t idx = nodes_.size();
  n.value = run_forward(idx, n);
  nodes_.push_back(std::move(n));
  verify_finite(idx, nodes_.back());
  return Var<T>(this, idx);
}

template <typename T>
void Graph<T>::mark_output(std::string name, Var<T> v) {
  outputs_.emplace_back(std::move(name), check(v));
}

template <typename T>
void Graph<T>::set_input(const std::string& name, Tensor<T> value) {
  auto it = named_inputs_.find(name);
  if (it == named_inputs_.end()) throw std::invalid_argument("graph: unknown input '" + name + "'");
  nodes_[it->second].value = std::move(value);
  for (auto& n : nodes_) n.has_grad = false;
  stale_ = true;
}

template <typename T>
std::map<std::string, Tensor<T>> Graph<T>::eval() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.op) continue;
    n.value = run_forward(i, n);
    verify_finite(i, n);
  }
  stale_ = false;
  std::map<std::string, Tensor<T>> out;
  for (auto& [name, idx] : outputs_) out[name] = node_value(nodes_[idx]);
  return out;
}

template <typename T>
std::map<std::string, Tensor<T>> Graph<T>::eval(const std::map<std::string, Tensor<T>>& inputs) {
  for (auto& [name, t] : inputs) set_input(name, t);
  return eval();
}

template <typename T>
void Graph<T>::backward(Var<T> output) {
  const std::size_t root = check(output);
  if (stale_) throw std::logic_error("graph: backward on an unevaluated graph; call eval() first");
  if (node_value(nodes_[root]).numel() != 1) {
    throw ShapeError("backward: output node " + std::to_string(root) + " is not scalar, shape " +
                     shape_str(node_value(nodes_[root]).shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>();
  }
  auto ensure_grad = [this](Node& n) {
    if (!n.has_grad) {
      n.grad = Tensor<T>(node_value(n).shape());
      n.has_grad = true;
    }
  };
  Node& r = nodes_[root];
  ensure_grad(r);
  r.grad[0] = T{1};

  const std::string& perturbed = testing::vjp_perturbation_target();
  std::vector<const Tensor<T>*> in;
  std::vector<Tensor<T>*> gin;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.op || !n.has_grad || !n.requires_grad) continue;
    in.clear();
    gin.clear();
    for (auto j : n.inputs) {
      in.push_back(&node_value(nodes_[j]));
      if (nodes_[j].requires_grad) {
        ensure_grad(nodes_[j]);
        gin.push_back(&nodes_[j].grad);
      } else {
        gin.push_back(nullptr);
      }
    }
    if (!perturbed.empty() && n.op->name() == perturbed) {
      std::vector<Tensor<T>> before;
      for (auto* g : gin) before.push_back(g ? *g : Tensor<T>());
      n.op->backward(in, node_value(n), n.grad, gin);
      const T f = static_cast<T>(1.0 + testing::vjp_perturbation_factor());
      for (std::size_t k = 0; k < gin.size(); ++k) {
        if (!gin[k]) continue;
        for (std::size_t e = 0; e < gin[k]->numel(); ++e) {
          (*gin[k])[e] = before[k][e] + f * ((*gin[k])[e] - before[k][e]);
        }
      }
    } else {
      n.op->backward(in, node_value(n), n.grad, gin);
    }
  }
  for (auto& n : nodes_)
    if (n.requires_grad) ensure_grad(n);
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var<T> v) const {
  return node_value(nodes_[check(v)]);
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var<T> v) const {
  const Node& n = nodes_[check(v)];
  if (!n.requires_grad) throw std::logic_error("graph: node does not require gradients");
  if (!n.has_grad) throw std::logic_error("graph: backward() has not run");
  return n.grad;
}

template <typename T>
bool Graph<T>::requires_grad(Var<T> v) const {
  return nodes_[check(v)].requires_grad;
}

template <typename T>
std::string_view Graph<T>::op_name(Var<T> v) const {
  const Node& n = nodes_[check(v)];
  return n.op ? n.op->name() : std::string_view("leaf");
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ad
}  // namespace csdn
