// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/model.hpp"

#include <stdexcept>

namespace csdn {

template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore<T> p;
  Rng rng(derive_seed(seed, 1));
  add_point_encoder(p, cfg, rng);
  if (traits(cfg.variant).image) add_image_encoder(p, cfg, rng);
  add_fusion(p, cfg, rng);
  add_refine(p, cfg, rng);
  return p;
}

template <typename T>
std::string layout_mismatch(const ParamStore<T>& expected, const ParamStore<T>& actual) {
  const auto& a = expected.entries();
  const auto& b = actual.entries();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i].name != b[i].name) {
      return "parameter " + std::to_string(i) + " is '" + b[i].name + "', expected '" +
             a[i].name + "'";
    }
    if (a[i].value.shape() != b[i].value.shape()) {
      return "parameter '" + a[i].name + "' has shape " + shape_str(b[i].value.shape()) +
             ", expected " + shape_str(a[i].value.shape());
    }
  }
  if (a.size() != b.size()) {
    return "parameter count " + std::to_string(b.size()) + ", expected " + std::to_string(a.size());
  }
  return {};
}

template <typename T>
CsdnModel<T>::CsdnModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(init_params<T>(cfg_, seed)) {}

template <typename T>
CsdnModel<T>::CsdnModel(ModelConfig cfg, ParamStore<T> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  const std::string diff = layout_mismatch(init_params<T>(cfg_, 0), params_);
  if (!diff.empty()) throw std::invalid_argument("model parameters do not fit the config: " + diff);
}

template <typename T>
ModelOutputs<T> CsdnModel<T>::forward(ad::Graph<T>& g, const Tensor<T>& partial,
                                      const Tensor<T>& image, const Camera& camera,
                                      StructureCache* cache) const {
  const VariantTraits vt = traits(cfg_.variant);
  ModelOutputs<T> o;
  o.partial = g.input("partial", partial);
  o.point_feature = encode_points(g, params_, cfg_, o.partial);
  if (vt.image) {
    o.image = g.input("image", image);
    o.image_features = encode_image(g, params_, cfg_, o.image);
  }
  ad::Var<T> fold = o.point_feature;
  ad::Var<T> style;
  if (vt.swap) {
    fold = o.image_features.global;
    style = o.point_feature;
  } else if (vt.ipadain) {
    style = o.image_features.global;
  }
  o.coarse = fold_surfaces(g, params_, cfg_, fold, style);
  o.refined = refine(g, params_, cfg_, o.coarse, o.partial, o.image_features.pyramid, camera, cache);
  return o;
}

template class CsdnModel<float>;
template class CsdnModel<double>;
template ParamStore<float> init_params(const ModelConfig&, std::uint64_t);
template ParamStore<double> init_params(const ModelConfig&, std::uint64_t);
template std::string layout_mismatch(const ParamStore<float>&, const ParamStore<float>&);
template std::string layout_mismatch(const ParamStore<double>&, const ParamStore<double>&);

}  // namespace csdn
