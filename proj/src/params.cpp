// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/params.hpp"

#include <cmath>
#include <stdexcept>

#include "csdn/ops.hpp"

namespace csdn {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw std::invalid_argument("params: duplicate parameter '" + name + "'");
  entries_.push_back({name, std::move(value)});
  index_.emplace(name, entries_.size() - 1);
  return entries_.back().value;
}

template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void ParamStore<T>::add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Tensor<T> w({in, out});
  glorot_uniform(w, in, out, rng);
  add(name + "/w", std::move(w));
  add(name + "/b", Tensor<T>({out}));
}

template <typename T>
void ParamStore<T>::add_conv(const std::string& name, std::size_t k, std::size_t cin,
                             std::size_t cout, Rng& rng) {
  Tensor<T> w({k, k, cin, cout});
  glorot_uniform(w, k * k * cin, k * k * cout, rng);
  add(name + "/w", std::move(w));
  add(name + "/b", Tensor<T>({cout}));
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: no parameter '" + name + "'");
  return entries_[it->second].value;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: no parameter '" + name + "'");
  return entries_[it->second].value;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;
template void glorot_uniform(Tensor<float>&, std::size_t, std::size_t, Rng&);
template void glorot_uniform(Tensor<double>&, std::size_t, std::size_t, Rng&);

namespace nn {

template <typename T>
ad::Var<T> linear(ad::Graph<T>& g, const ParamStore<T>& p, const std::string& name, ad::Var<T> x) {
  const auto w = g.param(p.get(name + "/w"), name + "/w");
  const auto b = g.param(p.get(name + "/b"), name + "/b");
  const auto y = ad::matmul(x, w);
  return ad::add(y, ad::broadcast_to(b, y.shape()));
}

template <typename T>
ad::Var<T> mlp(ad::Graph<T>& g, const ParamStore<T>& p, const std::string& name,
               std::size_t layers, ad::Var<T> x) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = linear(g, p, name + "/l" + std::to_string(i), x);
    if (i + 1 < layers) x = ad::relu(x);
  }
  return x;
}

template <typename T>
void add_mlp(ParamStore<T>& p, const std::string& name, const std::vector<std::size_t>& widths,
             Rng& rng) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    p.add_linear(name + "/l" + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

#define CSDN_INSTANTIATE(T)                                                                  \
  template ad::Var<T> linear(ad::Graph<T>&, const ParamStore<T>&, const std::string&,        \
                             ad::Var<T>);                                                    \
  template ad::Var<T> mlp(ad::Graph<T>&, const ParamStore<T>&, const std::string&,           \
                          std::size_t, ad::Var<T>);                                          \
  template void add_mlp(ParamStore<T>&, const std::string&, const std::vector<std::size_t>&, \
                        Rng&);
CSDN_INSTANTIATE(float)
CSDN_INSTANTIATE(double)
#undef CSDN_INSTANTIATE

}  // namespace nn
}  // namespace csdn
