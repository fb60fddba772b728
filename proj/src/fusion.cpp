// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "csdn/ops.hpp"

namespace csdn {

std::pair<std::size_t, std::size_t> grid_dims(std::size_t n) {
  if (n == 0) throw std::invalid_argument("surface grid: zero points");
  std::size_t rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (rows > 1 && n % rows != 0) --rows;
  if (rows == 0) rows = 1;
  return {rows, n / rows};
}

template <typename T>
Tensor<T> surface_grid(std::size_t n) {
  const auto [rows, cols] = grid_dims(n);
  auto coord = [](std::size_t i, std::size_t count) {
    return count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
  };
  Tensor<T> grid({n, 2});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      grid(r * cols + c, 0) = static_cast<T>(coord(r, rows));
      grid(r * cols + c, 1) = static_cast<T>(coord(c, cols));
    }
  }
  return grid;
}

template <typename T>
ad::Var<T> ipadain(ad::Var<T> f, ad::Var<T> gamma, ad::Var<T> beta, double eps) {
  auto& g = f.graph();
  const Shape& s = f.shape();
  const Shape stat{1, s.at(1)};
  if (gamma.shape() != stat || beta.shape() != stat) {
    throw ShapeError("ipadain: features " + shape_str(s) + " need gamma/beta " + shape_str(stat) +
                     ", got " + shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  const auto mean = ad::instance_mean(f);
  const auto denom = ad::add(ad::instance_std(f), g.constant(Tensor<T>::full(stat, static_cast<T>(eps))));
  const auto normalized = ad::div(ad::sub(f, ad::broadcast_to(mean, s)), ad::broadcast_to(denom, s));
  return ad::add(ad::mul(ad::broadcast_to(gamma, s), normalized), ad::broadcast_to(beta, s));
}

namespace {

std::vector<std::size_t> fold_widths(const ModelConfig& cfg) {
  std::vector<std::size_t> w{cfg.feature_dim + 2};
  w.insert(w.end(), cfg.fold_widths.begin(), cfg.fold_widths.end());
  w.push_back(3);
  return w;
}

std::string layer_name(std::size_t surface, std::size_t layer) {
  return "fold/s" + std::to_string(surface) + "/l" + std::to_string(layer);
}

}  // namespace

template <typename T>
void add_fusion(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng) {
  const auto widths = fold_widths(cfg);
  const VariantTraits vt = traits(cfg.variant);
  const std::size_t c = cfg.feature_dim;
  for (std::size_t s = 0; s < cfg.surfaces; ++s) {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::string name = layer_name(s, l);
      const std::size_t out = widths[l + 1];
      p.add_linear(name, widths[l], out, rng);
      if (vt.ipadain) {
        nn::add_mlp(p, name + "/style_a", {c, c / 2, out}, rng);
        nn::add_mlp(p, name + "/style_b", {c, c / 2, out}, rng);
        // gamma = 1 + L_a(F) at init
        p.get(name + "/style_a/l1/b").fill(T{1});
      } else {
        p.add(name + "/gamma", Tensor<T>::full({1, out}, T{1}));
        p.add(name + "/beta", Tensor<T>({1, out}));
      }
    }
  }
}

template <typename T>
ad::Var<T> fold_surfaces(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                         ad::Var<T> fold_feature, ad::Var<T> style_feature) {
  const Shape global{1, cfg.feature_dim};
  if (fold_feature.shape() != global) {
    throw ShapeError("fold_surfaces: expected a " + shape_str(global) + " feature, got " +
                     shape_str(fold_feature.shape()));
  }
  const bool styled = traits(cfg.variant).ipadain;
  if (styled && (!style_feature.valid() || style_feature.shape() != global)) {
    throw ShapeError("fold_surfaces: IPAdaIN needs a " + shape_str(global) + " style feature");
  }
  const auto widths = fold_widths(cfg);
  const std::size_t n = cfg.surface_points;
  const auto grid = g.constant(surface_grid<T>(n));
  const auto tiled = ad::broadcast_to(fold_feature, Shape{n, cfg.feature_dim});
  const auto input = ad::concat<T>({grid, tiled}, 1);

  std::vector<ad::Var<T>> surfaces;
  for (std::size_t s = 0; s < cfg.surfaces; ++s) {
    ad::Var<T> x = input;
    const std::size_t layers = widths.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string name = layer_name(s, l);
      x = nn::linear(g, p, name, x);
      // Normalizing before the activation would subtract the fold feature,
      // which is constant across the grid, out of the first layer entirely.
      if (l + 1 < layers) x = ad::relu(x);
      ad::Var<T> gamma, beta;
      if (styled) {
        gamma = nn::mlp(g, p, name + "/style_a", 2, style_feature);
        beta = nn::mlp(g, p, name + "/style_b", 2, style_feature);
      } else {
        gamma = g.param(p.get(name + "/gamma"), name + "/gamma");
        beta = g.param(p.get(name + "/beta"), name + "/beta");
      }
      x = ipadain(x, gamma, beta, cfg.ipadain_eps);
    }
    surfaces.push_back(x);
  }
  return surfaces.size() == 1 ? surfaces.front() : ad::concat(surfaces, 0);
}

template Tensor<float> surface_grid(std::size_t);
template Tensor<double> surface_grid(std::size_t);

#define CSDN_INSTANTIATE(T)                                                                  \
  template ad::Var<T> ipadain(ad::Var<T>, ad::Var<T>, ad::Var<T>, double);                   \
  template void add_fusion(ParamStore<T>&, const ModelConfig&, Rng&);                        \
  template ad::Var<T> fold_surfaces(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&, \
                                    ad::Var<T>, ad::Var<T>);
CSDN_INSTANTIATE(float)
CSDN_INSTANTIATE(double)
#undef CSDN_INSTANTIATE

}  // namespace csdn
