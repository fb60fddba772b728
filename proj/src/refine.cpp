// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/refine.hpp"

#include <stdexcept>

#include "csdn/encoders.hpp"
#include "csdn/ops.hpp"

namespace csdn {

template <typename T>
DualGraph build_dual_graph(std::span<const T> coarse, std::span<const T> partial, std::size_t k) {
  const std::size_t nr = coarse.size() / 3;
  if (k == 0 || k > partial.size() / 3 || k > nr) {
    throw std::invalid_argument("dual graph: k=" + std::to_string(k) + " exceeds min(|P_in|=" +
                                std::to_string(partial.size() / 3) + ", |P_0|=" +
                                std::to_string(nr) + ")");
  }
  const KnnTable a = knn<T>(coarse, partial, k);
  const KnnTable b = knn<T>(coarse, coarse, k);
  DualGraph graph;
  graph.k = k;
  graph.neighbors.resize(nr * 2 * k);
  for (std::size_t i = 0; i < nr; ++i) {
    auto* row = graph.neighbors.data() + 2 * k * i;
    std::copy(a.row(i).begin(), a.row(i).end(), row);
    std::copy(b.row(i).begin(), b.row(i).end(), row + k);
  }
  return graph;
}

namespace {

std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

template <typename T>
void add_refine(ParamStore<T>& p, const ModelConfig& cfg, Rng& rng) {
  const VariantTraits vt = traits(cfg.variant);
  if (!vt.refine) return;
  const std::size_t r = cfg.refine_width;
  if (vt.local) nn::add_mlp(p, "local", with_ends(6, cfg.local_widths, r), rng);
  if (vt.global) {
    p.add_linear("global/proj", cfg.pyramid_channels(), r, rng);
    p.add_linear("global/res1", r, r, rng);
    p.add_linear("global/res2", r, r, rng);
  }
  nn::add_mlp(p, "offset", with_ends(r, cfg.offset_widths, 3), rng);
  if (vt.serial) nn::add_mlp(p, "offset2", with_ends(r, cfg.offset_widths, 3), rng);
}

template <typename T>
ad::Var<T> local_refine(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                        ad::Var<T> coarse, const DualGraph& graph, ad::Var<T> partial) {
  const std::size_t nr = coarse.shape().at(0);
  const std::size_t n = partial.shape().at(0);
  const std::size_t k2 = 2 * graph.k;
  if (graph.rows() != nr) {
    throw ShapeError("local_refine: graph has " + std::to_string(graph.rows()) + " rows for " +
                     std::to_string(nr) + " points");
  }
  std::vector<std::uint32_t> center_idx(nr * k2), nbr_idx(nr * k2);
  for (std::size_t i = 0; i < nr; ++i) {
    const auto row = graph.row(i);
    for (std::size_t j = 0; j < k2; ++j) {
      center_idx[i * k2 + j] = static_cast<std::uint32_t>(i);
      nbr_idx[i * k2 + j] = j < graph.k ? row[j] : static_cast<std::uint32_t>(n + row[j]);
    }
  }
  const auto pool = ad::concat<T>({partial, coarse}, 0);
  const auto centers = ad::gather_rows(coarse, std::move(center_idx));
  const auto nbrs = ad::gather_rows(pool, std::move(nbr_idx));
  const auto edges = ad::concat<T>({centers, ad::sub(nbrs, centers)}, 1);
  const auto h = nn::mlp(g, p, "local", cfg.local_widths.size() + 1, edges);
  return ad::group_max(h, k2);
}

template <typename T>
ad::Var<T> global_constrain(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                            ad::Var<T> coarse, const std::vector<ad::Var<T>>& pyramid,
                            const Camera& camera, StructureCache* cache) {
  if (pyramid.size() != kPyramidLevels) {
    throw ShapeError("global_constrain: expected " + std::to_string(kPyramidLevels) +
                     " pyramid levels, got " + std::to_string(pyramid.size()));
  }
  Projection proj;
  if (cache && cache->replay) {
    proj = cache->projections.at(cache->next_projection++);
  } else {
    proj = project<T>(coarse.value().data(), camera);
    if (cache) cache->projections.push_back(proj);
  }
  const std::size_t nr = coarse.shape().at(0);
  std::vector<ad::Var<T>> sampled;
  for (const auto& level : pyramid) {
    const double sx = static_cast<double>(level.shape().at(1)) / static_cast<double>(camera.width);
    const double sy = static_cast<double>(level.shape().at(0)) / static_cast<double>(camera.height);
    std::vector<T> uv(2 * nr);
    for (std::size_t i = 0; i < nr; ++i) {
      uv[2 * i] = static_cast<T>(proj.uv[2 * i] * sx);
      uv[2 * i + 1] = static_cast<T>(proj.uv[2 * i + 1] * sy);
    }
    sampled.push_back(ad::bilinear_sample(level, std::move(uv), proj.valid));
  }
  const auto x = ad::concat(sampled, 1);
  if (x.shape().at(1) != cfg.pyramid_channels()) {
    throw ShapeError("global_constrain: pyramid has " + std::to_string(x.shape().at(1)) +
                     " channels, expected " + std::to_string(cfg.pyramid_channels()));
  }
  const auto base = ad::relu(nn::linear(g, p, "global/proj", x));
  const auto branch = nn::linear(g, p, "global/res2", ad::relu(nn::linear(g, p, "global/res1", base)));
  return ad::add(base, branch);
}

template <typename T>
ad::Var<T> regress_offsets(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                           const std::string& head, ad::Var<T> features) {
  return ad::tanh(nn::mlp(g, p, head, cfg.offset_widths.size() + 1, features));
}

template <typename T>
RefineResult<T> refine(ad::Graph<T>& g, const ParamStore<T>& p, const ModelConfig& cfg,
                       ad::Var<T> coarse, ad::Var<T> partial,
                       const std::vector<ad::Var<T>>& pyramid, const Camera& camera,
                       StructureCache* cache) {
  const VariantTraits vt = traits(cfg.variant);
  RefineResult<T> r;
  if (!vt.refine) {
    r.out = coarse;
    return r;
  }
  auto local = [&](ad::Var<T> pts) {
    DualGraph graph;
    if (cache && cache->replay) {
      graph = cache->graphs.at(cache->next_graph++);
    } else {
      graph = build_dual_graph<T>(pts.value().data(), partial.value().data(), cfg.k_neighbors);
      if (cache) cache->graphs.push_back(graph);
    }
    return local_refine(g, p, cfg, pts, graph, partial);
  };
  if (vt.serial) {
    const auto first = regress_offsets(g, p, cfg, "offset", local(coarse));
    r.intermediate = ad::add(coarse, first);
    r.offsets = regress_offsets(g, p, cfg, "offset2",
                                global_constrain(g, p, cfg, r.intermediate, pyramid, camera, cache));
    r.out = ad::add(r.intermediate, r.offsets);
    return r;
  }
  ad::Var<T> features;
  if (vt.local && vt.global) {
    const auto f_local = local(coarse);
    features = ad::add(f_local, global_constrain(g, p, cfg, coarse, pyramid, camera, cache));
  } else if (vt.local) {
    features = local(coarse);
  } else {
    features = global_constrain(g, p, cfg, coarse, pyramid, camera, cache);
  }
  r.offsets = regress_offsets(g, p, cfg, "offset", features);
  r.out = ad::add(coarse, r.offsets);
  return r;
}

template DualGraph build_dual_graph(std::span<const float>, std::span<const float>, std::size_t);
template DualGraph build_dual_graph(std::span<const double>, std::span<const double>, std::size_t);

#define CSDN_INSTANTIATE(T)                                                                     \
  template void add_refine(ParamStore<T>&, const ModelConfig&, Rng&);                           \
  template ad::Var<T> local_refine(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&,     \
                                   ad::Var<T>, const DualGraph&, ad::Var<T>);                   \
  template ad::Var<T> global_constrain(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&, \
                                       ad::Var<T>, const std::vector<ad::Var<T>>&,              \
                                       const Camera&, StructureCache*);                         \
  template ad::Var<T> regress_offsets(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&,  \
                                      const std::string&, ad::Var<T>);                          \
  template RefineResult<T> refine(ad::Graph<T>&, const ParamStore<T>&, const ModelConfig&,      \
                                  ad::Var<T>, ad::Var<T>, const std::vector<ad::Var<T>>&,       \
                                  const Camera&, StructureCache*);
CSDN_INSTANTIATE(float)
CSDN_INSTANTIATE(double)
#undef CSDN_INSTANTIATE

}  // namespace csdn
