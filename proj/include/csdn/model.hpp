// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "csdn/encoders.hpp"
#include "csdn/fusion.hpp"
#include "csdn/refine.hpp"

namespace csdn {

template <typename T>
struct ModelOutputs {
  ad::Var<T> partial;
  ad::Var<T> image;  // invalid when the variant skips the image encoder
  ad::Var<T> point_feature;
  ImageFeatures<T> image_features;
  ad::Var<T> coarse;
  RefineResult<T> refined;

  ad::Var<T> out() const { return refined.out; }
};

/// Whole network: encoders, shape fusion and dual refinement for one sample.
template <typename T>
class CsdnModel {
 public:
  /// Fresh parameters drawn from `seed`.
  CsdnModel(ModelConfig cfg, std::uint64_t seed);
  /// Adopts existing parameters; throws if any name or shape differs from
  /// what `cfg` lays out.
  CsdnModel(ModelConfig cfg, ParamStore<T> params);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }

  /// Records the forward pass; inputs become graph inputs "partial" and "image".
  ModelOutputs<T> forward(ad::Graph<T>& g, const Tensor<T>& partial, const Tensor<T>& image,
                          const Camera& camera, StructureCache* cache = nullptr) const;

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
};

template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Describes the first name/shape difference between two parameter sets, or
/// returns an empty string when they agree.
template <typename T>
std::string layout_mismatch(const ParamStore<T>& expected, const ParamStore<T>& actual);

}  // namespace csdn
