// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "csdn/autodiff.hpp"
#include "csdn/random.hpp"
#include "csdn/tensor.hpp"

namespace csdn {

/// Named learnable tensors in creation order. Element addresses are stable, so
/// graphs may borrow them across steps.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> value);
  /// Glorot-uniform weight [in x out] at name/w, zero bias [out] at name/b.
  void add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  /// Glorot-uniform kernel [k x k x cin x cout] at name/w, zero bias at name/b.
  void add_conv(const std::string& name, std::size_t k, std::size_t cin, std::size_t cout,
                Rng& rng);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);

  std::deque<Entry>& entries() noexcept { return entries_; }
  const std::deque<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Fills `t` uniformly in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

namespace nn {

/// Row-wise affine map x * W + b for x [N x in].
template <typename T>
ad::Var<T> linear(ad::Graph<T>& g, const ParamStore<T>& p, const std::string& name, ad::Var<T> x);

/// Chain of linear layers name/l0, name/l1, ... with relu between; the last
/// layer is left linear.
template <typename T>
ad::Var<T> mlp(ad::Graph<T>& g, const ParamStore<T>& p, const std::string& name,
               std::size_t layers, ad::Var<T> x);

/// Registers the layers for mlp(): widths[0] is the input width.
template <typename T>
void add_mlp(ParamStore<T>& p, const std::string& name, const std::vector<std::size_t>& widths,
             Rng& rng);

}  // namespace nn
}  // namespace csdn
