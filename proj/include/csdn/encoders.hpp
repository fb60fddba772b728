// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "csdn/autodiff.hpp"
#include "csdn/config.hpp"
#include "csdn/params.hpp"

namespace csdn {

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kImageConvLayers = 7;
inline constexpr std::size_t kPyramidLevels = 4;

/// Stride of conv1..conv7.
inline constexpr std::size_t kImageStrides[kImageConvLayers] = {2, 2, 2, 2, 2, 1, 1};

/// Spatial size after each conv layer for a square input of side `size`.
std::vector<std::size_t> conv_sizes(std::size_t size);

template <typename T>
struct ImageFeatures {
  ad::Var<T> global;                // [1 x C]
  std::vector<ad::Var<T>> pyramid;  // conv2..conv5 outputs, [S_l x S_l x c_l]
};

template <typename T>
void add_point_encoder(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng);
template <typename T>
void add_image_encoder(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng);

/// Shared point-wise MLP followed by a channel max over all points: [N x 3] -> [1 x C].
template <typename T>
ad::Var<T> encode_points(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                         ad::Var<T> partial);

/// Seven 3x3 convolutions with relu; [S x S x 3] image.
template <typename T>
ImageFeatures<T> encode_image(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                              ad::Var<T> image);

}  // namespace csdn
