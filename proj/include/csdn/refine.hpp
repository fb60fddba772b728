// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "csdn/autodiff.hpp"
#include "csdn/config.hpp"
#include "csdn/geometry.hpp"
#include "csdn/params.hpp"

namespace csdn {

/// Per coarse point, k neighbors in P_in followed by k neighbors in P_0
/// (self included). Row-major [N_r x 2k].
struct DualGraph {
  std::size_t k = 0;
  std::vector<std::uint32_t> neighbors;

  std::size_t rows() const { return k ? neighbors.size() / (2 * k) : 0; }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return std::span<const std::uint32_t>(neighbors).subspan(2 * k * i, 2 * k);
  }
  std::span<const std::uint32_t> partial_block(std::size_t i) const { return row(i).first(k); }
  std::span<const std::uint32_t> coarse_block(std::size_t i) const { return row(i).last(k); }
};

/// Data-dependent structure of one refinement pass: neighbor graphs and point
/// projections. Recording it once and replaying it turns the forward pass into
/// the function whose gradient backward() computes (both are constants there),
/// which is what finite-difference checks need.
struct StructureCache {
  bool replay = false;
  std::vector<DualGraph> graphs;
  std::vector<Projection> projections;
  std::size_t next_graph = 0, next_projection = 0;

  void rewind() {
    replay = true;
    next_graph = next_projection = 0;
  }
};

template <typename T>
DualGraph build_dual_graph(std::span<const T> coarse, std::span<const T> partial, std::size_t k);

template <typename T>
void add_refine(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng);

/// Edge features [p_i, p_j - p_i] through the shared edge MLP, max over the 2k
/// edges of each point: F_P^off, [N_r x R].
template <typename T>
ad::Var<T> local_refine(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                        ad::Var<T> coarse, const DualGraph& graph, ad::Var<T> partial);

/// Projects the points once, samples all pyramid levels bilinearly and maps the
/// concatenation through the residual block: F_I^off, [N_r x R].
template <typename T>
ad::Var<T> global_constrain(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                            ad::Var<T> coarse, const std::vector<ad::Var<T>>& pyramid,
                            const Camera& camera, StructureCache* cache = nullptr);

/// Point-wise MLP with tanh output: offsets in (-1, 1), [N_r x 3]. `head` is
/// the parameter prefix ("offset", or "offset2" for the serial second stage).
template <typename T>
ad::Var<T> regress_offsets(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                           const std::string& head, ad::Var<T> features);

template <typename T>
struct RefineResult {
  ad::Var<T> out;
  ad::Var<T> offsets;       // last stage
  ad::Var<T> intermediate;  // serial: P' after the local stage
};

/// P_out = P_0 + dC, wired per cfg.variant.
template <typename T>
RefineResult<T> refine(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                       ad::Var<T> coarse, ad::Var<T> partial,
                       const std::vector<ad::Var<T>>& pyramid, const Camera& camera,
                       StructureCache* cache = nullptr);

}  // namespace csdn
