// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/encoders.hpp"

#include <stdexcept>

#include "csdn/ops.hpp"

namespace csdn {

std::vector<std::size_t> conv_sizes(std::size_t size) {
  std::vector<std::size_t> out;
  const std::size_t pad = kConvKernel / 2;
  for (std::size_t stride : kImageStrides) {
    size = (size + 2 * pad - kConvKernel) / stride + 1;
    out.push_back(size);
  }
  return out;
}

namespace {

std::vector<std::size_t> conv_channels(const ModelConfig& cfg) {
  std::vector<std::size_t> ch{3};
  ch.insert(ch.end(), cfg.image_channels.begin(), cfg.image_channels.end());
  ch.push_back(cfg.feature_dim);
  ch.push_back(cfg.feature_dim);
  return ch;
}

std::vector<std::size_t> point_widths(const ModelConfig& cfg) {
  std::vector<std::size_t> w{3};
  w.insert(w.end(), cfg.point_widths.begin(), cfg.point_widths.end());
  w.push_back(cfg.feature_dim);
  return w;
}

}  // namespace

template <typename T>
void add_point_encoder(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng) {
  nn::add_mlp(p, "point", point_widths(cfg), rng);
}

template <typename T>
void add_image_encoder(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng) {
  const auto ch = conv_channels(cfg);
  for (std::size_t i = 0; i < kImageConvLayers; ++i) {
    p.add_conv("image/conv" + std::to_string(i + 1), kConvKernel, ch[i], ch[i + 1], rng);
  }
}

template <typename T>
ad::Var<T> encode_points(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                         ad::Var<T> partial) {
  const Shape& s = partial.shape();
  if (s.size() != 2 || s[1] != 3) {
    throw ShapeError("encode_points: expected [N x 3], got " + shape_str(s));
  }
  if (s[0] == 0) throw std::invalid_argument("encode_points: empty point cloud");
  const auto features = nn::mlp(g, p, "point", point_widths(cfg).size() - 1, partial);
  return ad::group_max(features, s[0]);
}

template <typename T>
ImageFeatures<T> encode_image(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                              ad::Var<T> image) {
  const Shape& s = image.shape();
  if (s.size() != 3 || s[2] != 3) {
    throw ShapeError("encode_image: expected [H x W x 3], got " + shape_str(s));
  }
  if (s[0] != cfg.image_size || s[1] != cfg.image_size) {
    throw ShapeError("encode_image: configured for " + std::to_string(cfg.image_size) + "x" +
                     std::to_string(cfg.image_size) + " images, got " + shape_str(s));
  }
  const auto ch = conv_channels(cfg);
  const auto sizes = conv_sizes(cfg.image_size);
  ImageFeatures<T> out;
  ad::Var<T> x = image;
  for (std::size_t i = 0; i < kImageConvLayers; ++i) {
    const std::string name = "image/conv" + std::to_string(i + 1);
    x = ad::conv2d(x, g.param(p.get(name + "/w"), name + "/w"), kImageStrides[i]);
    x = ad::add(x, ad::broadcast_to(g.param(p.get(name + "/b"), name + "/b"), x.shape()));
    x = ad::relu(x);
    if (x.shape() != Shape{sizes[i], sizes[i], ch[i + 1]}) {
      throw std::logic_error("encode_image: conv" + std::to_string(i + 1) + " produced " +
                             shape_str(x.shape()));
    }
    if (i >= 1 && i <= kPyramidLevels) out.pyramid.push_back(x);
  }
  const std::size_t last = sizes.back();
  out.global = ad::reshape(ad::avg_pool2d(x, last, last), Shape{1, cfg.feature_dim});
  return out;
}

#define CSDN_INSTANTIATE(T)                                                                  \
  template void add_point_encoder(ParamStore<T>&, const ModelConfig&, Rng&);                 \
  template void add_image_encoder(ParamStore<T>&, const ModelConfig&, Rng&);                 \
  template ad::Var<T> encode_points(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&, \
                                    ad::Var<T>);                                             \
  template ImageFeatures<T> encode_image(ad::Graph<T>&, const ParamStore<T>&,                \
                                         const ModelConfig&, ad::Var<T>);
CSDN_INSTANTIATE(float)
CSDN_INSTANTIATE(double)
#undef CSDN_INSTANTIATE

}  // namespace csdn
