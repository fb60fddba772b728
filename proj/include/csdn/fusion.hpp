// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "csdn/autodiff.hpp"
#include "csdn/config.hpp"
#include "csdn/params.hpp"

namespace csdn {

/// Most-square factorization rows x cols = n with rows <= cols.
std::pair<std::size_t, std::size_t> grid_dims(std::size_t n);

/// Fixed lattice over [0,1]^2 with n points, row-major, [n x 2].
template <typename T>
Tensor<T> surface_grid(std::size_t n);

/// gamma * (f - mean) / (std + eps) + beta, statistics per channel over the
/// rows of f. gamma and beta are [1 x C'].
template <typename T>
ad::Var<T> ipadain(ad::Var<T> f, ad::Var<T> gamma, ad::Var<T> beta, double eps);

template <typename T>
void add_fusion(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng);

/// M folding networks over the fixed grid, each conditioned on `fold_feature`
/// by concatenation and styled from `style_feature` through IPAdaIN. Variants
/// without image style pass an invalid `style_feature`. Returns P_0, [M*N_r' x 3].
template <typename T>
ad::Var<T> fold_surfaces(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                         ad::Var<T> fold_feature, ad::Var<T> style_feature);

}  // namespace csdn
