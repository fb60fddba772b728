// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "csdn/config.hpp"
#include "csdn/encoders.hpp"
#include "csdn/fusion.hpp"
#include "csdn/model.hpp"
#include "csdn/ops.hpp"
#include "csdn/random.hpp"
#include "csdn/refine.hpp"
#include "csdn/render.hpp"

using namespace csdn;
using ad::Graph;

namespace {

ModelConfig micro() { return preset_config(Preset::kMicro).model; }

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -0.5, double hi = 0.5) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
void jitter(ParamStore<T>& p, Rng& rng, double amount) {
  for (auto& e : p.entries())
    for (auto& v : e.value.data()) v += static_cast<T>(rng.uniform(-amount, amount));
}

}  // namespace

// ---- encoders

TEST(PointEncoder, PermutationAndMultiplicityInvariant) {
  const ModelConfig cfg = micro();
  Rng rng(1);
  ParamStore<float> p;
  add_point_encoder(p, cfg, rng);
  jitter(p, rng, 0.1);
  const auto pts = random_tensor<float>({cfg.input_points, 3}, rng);
  auto encode = [&](const Tensor<float>& x) {
    Graph<float> g;
    return encode_points(g, p, cfg, g.constant(x)).value();
  };
  const auto base = encode(pts);
  EXPECT_EQ(base.shape(), (Shape{1, cfg.feature_dim}));
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<float> perm(pts.shape());
    std::vector<std::size_t> order(pts.dim(0));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < order.size(); ++i)
      for (int d = 0; d < 3; ++d) perm(i, d) = pts(order[i], d);
    EXPECT_EQ(encode(perm), base);
  }
  Tensor<float> twice({2 * pts.dim(0), 3});
  std::copy(pts.data().begin(), pts.data().end(), twice.data().begin());
  std::copy(pts.data().begin(), pts.data().end(), twice.data().begin() + pts.numel());
  EXPECT_EQ(encode(twice), base);
}

TEST(ImageEncoder, FullScalePyramidSizes) {
  const auto s = conv_sizes(224);
  ASSERT_EQ(s.size(), kImageConvLayers);
  EXPECT_EQ((std::vector<std::size_t>(s.begin() + 1, s.begin() + 5)),
            (std::vector<std::size_t>{56, 28, 14, 7}));
  const auto d = conv_sizes(64);
  EXPECT_EQ((std::vector<std::size_t>(d.begin() + 1, d.begin() + 5)), (std::vector<std::size_t>{16, 8, 4, 2}));
}

TEST(ImageEncoder, ZeroImageGivesZeroFeatures) {
  ModelConfig cfg = micro();
  Rng rng(2);
  ParamStore<float> p;
  add_image_encoder(p, cfg, rng);
  Graph<float> g;
  const auto f = encode_image(g, p, cfg, g.constant(Tensor<float>({16, 16, 3})));
  ASSERT_EQ(f.pyramid.size(), kPyramidLevels);
  for (const auto& level : f.pyramid)
    for (float v : level.value().data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(f.global.shape(), (Shape{1, cfg.feature_dim}));
  for (float v : f.global.value().data()) EXPECT_EQ(v, 0.0f);
}

TEST(ImageEncoder, PyramidKeepsSpatialLayout) {
  ModelConfig cfg = micro();
  cfg.image_size = 32;
  Rng rng(3);
  ParamStore<float> p;
  add_image_encoder(p, cfg, rng);
  auto level1 = [&](std::size_t y, std::size_t x) {
    Tensor<float> img({32, 32, 3});
    for (int c = 0; c < 3; ++c) img.data()[(y * 32 + x) * 3 + c] = 1.0f;
    Graph<float> g;
    return encode_image(g, p, cfg, g.constant(img)).pyramid[0].value();
  };
  // Level 1 has total stride 4: moving the pixel by 8 moves responses by 2 cells.
  const auto a = level1(9, 9), b = level1(17, 17);
  ASSERT_EQ(a.dim(0), 8u);
  auto energy = [](const Tensor<float>& t, std::size_t y, std::size_t x) {
    double s = 0;
    for (std::size_t c = 0; c < t.dim(2); ++c) s += std::abs(t.data()[(y * t.dim(1) + x) * t.dim(2) + c]);
    return s;
  };
  auto argmax = [&](const Tensor<float>& t) {
    std::pair<std::size_t, std::size_t> best{0, 0};
    for (std::size_t y = 0; y < t.dim(0); ++y)
      for (std::size_t x = 0; x < t.dim(1); ++x)
        if (energy(t, y, x) > energy(t, best.first, best.second)) best = {y, x};
    return best;
  };
  const auto ma = argmax(a), mb = argmax(b);
  EXPECT_GT(energy(a, ma.first, ma.second), 0.0);
  EXPECT_EQ(mb.first, ma.first + 2);
  EXPECT_EQ(mb.second, ma.second + 2);
}

// ---- fusion

TEST(Fusion, GridFactorization) {
  EXPECT_EQ(grid_dims(512), (std::pair<std::size_t, std::size_t>{16, 32}));
  EXPECT_EQ(grid_dims(128), (std::pair<std::size_t, std::size_t>{8, 16}));
  EXPECT_EQ(grid_dims(16), (std::pair<std::size_t, std::size_t>{4, 4}));
  EXPECT_EQ(grid_dims(7), (std::pair<std::size_t, std::size_t>{1, 7}));
  const auto grid = surface_grid<double>(6);
  std::set<std::pair<double, double>> seen;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_GE(grid(i, 0), 0.0);
    EXPECT_LE(grid(i, 1), 1.0);
    seen.insert({grid(i, 0), grid(i, 1)});
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Ipadain, ConstantChannelGivesBeta) {
  Graph<double> g;
  Tensor<double> f({5, 2});
  for (std::size_t i = 0; i < 5; ++i) {
    f(i, 0) = 3.0;
    f(i, 1) = static_cast<double>(i);
  }
  const auto out = ipadain(g.constant(f), g.constant(Tensor<double>({1, 2}, {2.0, 1.0})),
                           g.constant(Tensor<double>({1, 2}, {-0.7, 0.0})), 1e-5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out.value()(i, 0), -0.7);
}

TEST(Ipadain, UnitStyleNormalizes) {
  Rng rng(4);
  Graph<double> g;
  const auto f = random_tensor<double>({40, 3}, rng, -3, 5);
  const auto out = ipadain(g.constant(f), g.constant(Tensor<double>({1, 3}, 1.0)),
                           g.constant(Tensor<double>({1, 3})), 1e-5).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 40; ++i) m += out(i, c) / 40;
    for (std::size_t i = 0; i < 40; ++i) v += (out(i, c) - m) * (out(i, c) - m) / 40;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(v), 1.0, 1e-4);
  }
}

namespace {

struct FoldSetup {
  ModelConfig cfg;
  ParamStore<double> p;
  Tensor<double> fp, fi;
};

FoldSetup fold_setup(std::size_t surfaces, std::size_t points, Variant v = Variant::kFull) {
  FoldSetup s;
  s.cfg = micro();
  s.cfg.surfaces = surfaces;
  s.cfg.surface_points = points;
  s.cfg.variant = v;
  Rng rng(5);
  add_fusion(s.p, s.cfg, rng);
  jitter(s.p, rng, 0.05);
  s.fp = random_tensor<double>({1, s.cfg.feature_dim}, rng);
  s.fi = random_tensor<double>({1, s.cfg.feature_dim}, rng);
  return s;
}

Tensor<double> fold(const FoldSetup& s, const Tensor<double>& fi) {
  Graph<double> g;
  const bool styled = traits(s.cfg.variant).ipadain;
  return fold_surfaces(g, s.p, s.cfg, g.constant(s.fp), styled ? g.constant(fi) : ad::Var<double>())
      .value();
}

}  // namespace

TEST(Fusion, CoarseCloudSizeAndDeterminism) {
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{1, 4}, {2, 6}, {4, 9}}) {
    const auto s = fold_setup(m, n);
    const auto a = fold(s, s.fi);
    EXPECT_EQ(a.shape(), (Shape{m * n, 3}));
    EXPECT_EQ(a, fold(s, s.fi));
  }
}

TEST(Fusion, ImageFeatureMovesCoarseCloud) {
  const auto s = fold_setup(2, 6);
  Tensor<double> other = s.fi;
  other[0] += 0.25;
  const auto a = fold(s, s.fi), b = fold(s, other);
  double moved = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) moved = std::max(moved, std::abs(a[i] - b[i]));
  EXPECT_GT(moved, 1e-6);
}

TEST(Fusion, SurfacesHaveIndependentParameters) {
  auto s = fold_setup(3, 4);
  const auto base = fold(s, s.fi);
  for (auto& e : s.p.entries())
    if (e.name.rfind("fold/s1/", 0) == 0) e.value.fill(0.0);
  const auto changed = fold(s, s.fi);
  for (std::size_t r = 0; r < 12; ++r) {
    bool same = true;
    for (int d = 0; d < 3; ++d) same = same && base(r, d) == changed(r, d);
    EXPECT_EQ(same, r < 4 || r >= 8) << "row " << r;
  }
}

TEST(Fusion, NoIpadainVariantIgnoresImage) {
  const auto s = fold_setup(2, 4, Variant::kNoIpadain);
  EXPECT_TRUE(s.p.contains("fold/s0/l0/gamma"));
  EXPECT_FALSE(s.p.contains("fold/s0/l0/style_a/l0/w"));
  EXPECT_EQ(fold(s, s.fi).shape(), (Shape{8, 3}));
}

// ---- refine

TEST(DualGraph, BlocksMatchKnnAndCoincidentPointComesFirst) {
  Rng rng(6);
  const auto coarse = random_tensor<double>({40, 3}, rng);
  auto partial = random_tensor<double>({50, 3}, rng);
  for (int d = 0; d < 3; ++d) partial(17, d) = coarse(5, d);
  const auto graph = build_dual_graph<double>(coarse.data(), partial.data(), 16);
  ASSERT_EQ(graph.rows(), 40u);
  EXPECT_EQ(graph.row(0).size(), 32u);
  EXPECT_EQ(graph.partial_block(5)[0], 17u);
  EXPECT_EQ(graph.coarse_block(5)[0], 5u);
  const auto a = knn<double>(coarse.data(), partial.data(), 16);
  const auto b = knn<double>(coarse.data(), coarse.data(), 16);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_TRUE(std::ranges::equal(graph.partial_block(i), a.row(i)));
    EXPECT_TRUE(std::ranges::equal(graph.coarse_block(i), b.row(i)));
    const auto p = graph.partial_block(i), c = graph.coarse_block(i);
    EXPECT_EQ(std::set<std::uint32_t>(p.begin(), p.end()).size(), 16u);
    EXPECT_EQ(std::set<std::uint32_t>(c.begin(), c.end()).size(), 16u);
  }
}

namespace {

ModelConfig refine_cfg() {
  ModelConfig cfg = micro();
  cfg.k_neighbors = 1;
  cfg.surfaces = 1;
  cfg.surface_points = 4;
  return cfg;
}

}  // namespace

TEST(LocalRefine, MatchesHandUnrolledMicroInstance) {
  const ModelConfig cfg = refine_cfg();
  Rng rng(7);
  ParamStore<double> p;
  add_refine(p, cfg, rng);
  jitter(p, rng, 0.2);
  const auto coarse = random_tensor<double>({4, 3}, rng), partial = random_tensor<double>({5, 3}, rng);
  const auto graph = build_dual_graph<double>(coarse.data(), partial.data(), 1);
  Graph<double> g;
  const auto f = local_refine(g, p, cfg, g.constant(coarse), graph, g.constant(partial)).value();
  ASSERT_EQ(f.shape(), (Shape{4, cfg.refine_width}));

  auto layer = [&](const std::vector<double>& x, const std::string& name, bool act) {
    const auto& w = p.get(name + "/w");
    const auto& b = p.get(name + "/b");
    std::vector<double> y(w.dim(1));
    for (std::size_t o = 0; o < y.size(); ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, o);
      y[o] = act ? std::max(s, 0.0) : s;
    }
    return y;
  };
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> best(cfg.refine_width, -1e300);
    for (int j = 0; j < 2; ++j) {
      const std::uint32_t idx = graph.row(i)[j];
      const Tensor<double>& src = j == 0 ? partial : coarse;
      std::vector<double> e(6);
      for (int d = 0; d < 3; ++d) {
        e[d] = coarse(i, d);
        e[3 + d] = src(idx, d) - coarse(i, d);
      }
      const auto h = layer(layer(layer(e, "local/l0", true), "local/l1", true), "local/l2", false);
      for (std::size_t c = 0; c < h.size(); ++c) best[c] = std::max(best[c], h[c]);
    }
    for (std::size_t c = 0; c < best.size(); ++c) EXPECT_NEAR(f(i, c), best[c], 1e-12);
  }
}

TEST(LocalRefine, EdgeOrderAndPointOrderDoNotMatter) {
  ModelConfig cfg = micro();
  cfg.k_neighbors = 3;
  Rng rng(8);
  ParamStore<float> p;
  add_refine(p, cfg, rng);
  jitter(p, rng, 0.1);
  const auto coarse = random_tensor<float>({12, 3}, rng), partial = random_tensor<float>({16, 3}, rng);
  auto run = [&](const Tensor<float>& c, const DualGraph& graph) {
    Graph<float> g;
    return local_refine(g, p, cfg, g.constant(c), graph, g.constant(partial)).value();
  };
  const auto graph = build_dual_graph<float>(coarse.data(), partial.data(), 3);
  const auto base = run(coarse, graph);

  DualGraph reversed = graph;
  for (std::size_t i = 0; i < reversed.rows(); ++i) {
    auto row = reversed.neighbors.begin() + 6 * i;
    std::reverse(row, row + 3);
    std::reverse(row + 3, row + 6);
  }
  EXPECT_EQ(run(coarse, reversed), base);

  std::vector<std::size_t> order(12);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  Tensor<float> permuted(coarse.shape());
  for (std::size_t i = 0; i < 12; ++i)
    for (int d = 0; d < 3; ++d) permuted(i, d) = coarse(order[i], d);
  const auto out = run(permuted, build_dual_graph<float>(permuted.data(), partial.data(), 3));
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t c = 0; c < out.dim(1); ++c) EXPECT_EQ(out(i, c), base(order[i], c));
}

TEST(GlobalConstrain, ZeroPyramidGivesIdenticalRows) {
  ModelConfig cfg = micro();
  Rng rng(9);
  ParamStore<float> p;
  add_refine(p, cfg, rng);
  jitter(p, rng, 0.1);
  Graph<float> g;
  std::vector<ad::Var<float>> pyramid;
  const std::size_t sizes[] = {4, 2, 1, 1};
  for (std::size_t l = 0; l < kPyramidLevels; ++l)
    pyramid.push_back(g.constant(Tensor<float>({sizes[l], sizes[l], cfg.image_channels[l + 1]})));
  const auto coarse = random_tensor<float>({cfg.coarse_points(), 3}, rng, -0.4, 0.4);
  const auto f = global_constrain(g, p, cfg, g.constant(coarse), pyramid, view_camera(0, 16)).value();
  for (std::size_t i = 1; i < f.dim(0); ++i)
    for (std::size_t c = 0; c < f.dim(1); ++c) EXPECT_EQ(f(i, c), f(0, c));
}

TEST(GlobalConstrain, AlignedPixelCenterSamplesExactly) {
  // Projects to pixel (8, 8) of a 16-pixel image, i.e. (4, 4) of an 8-cell level.
  Camera cam;
  cam.translation = {0, 0, 2};
  cam.fx = cam.fy = 16;
  cam.cx = cam.cy = 7.5;
  cam.height = cam.width = 16;
  const std::vector<double> pt{0.0625, 0.0625, 0};
  const auto proj = project<double>(pt, cam);
  ASSERT_TRUE(proj.valid[0]);
  ASSERT_EQ(proj.uv[0], 8.0);
  Rng rng(10);
  Graph<double> g;
  const auto map = random_tensor<double>({8, 8, 2}, rng);
  const auto out = ad::bilinear_sample<double>(g.constant(map), {proj.uv[0] / 2, proj.uv[1] / 2}, {1});
  for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(out.value()(0, c), map.data()[(4 * 8 + 4) * 2 + c]);
}

TEST(Offsets, ZeroHeadAndStrictBounds) {
  ModelConfig cfg = micro();
  Rng rng(11);
  ParamStore<float> p;
  add_refine(p, cfg, rng);
  const auto features = random_tensor<float>({10, cfg.refine_width}, rng, -50, 50);
  const std::string last = "offset/l" + std::to_string(cfg.offset_widths.size());
  {
    ParamStore<float> q = p;
    q.get(last + "/w").fill(0);
    Graph<float> g;
    for (float v : regress_offsets(g, q, cfg, "offset", g.constant(features)).value().data()) EXPECT_EQ(v, 0.0f);
  }
  for (auto& e : p.entries())
    for (auto& v : e.value.data()) v *= 1000.0f;
  Graph<float> g;
  for (float v : regress_offsets(g, p, cfg, "offset", g.constant(features)).value().data()) {
    EXPECT_LT(std::abs(v), 1.0f);
  }
}

// ---- whole model

namespace {

struct Inputs {
  Tensor<float> partial, image;
  Camera camera;
};

Inputs micro_inputs(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return {random_tensor<float>({cfg.input_points, 3}, rng, -0.4, 0.4),
          random_tensor<float>({cfg.image_size, cfg.image_size, 3}, rng, 0, 1),
          view_camera(2, cfg.image_size)};
}

}  // namespace

TEST(Model, CoarseOnlyPassesCoarseThrough) {
  ModelConfig cfg = micro();
  cfg.variant = Variant::kCoarseOnly;
  const CsdnModel<float> model(cfg, 3);
  const auto in = micro_inputs(cfg, 1);
  Graph<float> g;
  const auto o = model.forward(g, in.partial, in.image, in.camera);
  EXPECT_EQ(o.out().value(), o.coarse.value());
  EXPECT_FALSE(model.params().contains("offset/l0/w"));
}

TEST(Model, ZeroOffsetHeadKeepsCoarse) {
  const ModelConfig cfg = micro();
  CsdnModel<float> model(cfg, 3);
  const std::string last = "offset/l" + std::to_string(cfg.offset_widths.size());
  model.params().get(last + "/w").fill(0);
  const auto in = micro_inputs(cfg, 2);
  Graph<float> g;
  const auto o = model.forward(g, in.partial, in.image, in.camera);
  EXPECT_EQ(o.out().value(), o.coarse.value());
  EXPECT_EQ(o.out().shape(), (Shape{cfg.coarse_points(), 3}));
}

TEST(Model, SumDecompositionAgainstNoLocal) {
  ModelConfig full = micro(), no_local = micro();
  no_local.variant = Variant::kNoLocal;
  CsdnModel<float> a(full, 4);
  const CsdnModel<float> b(no_local, 4);
  for (const auto& e : b.params().entries()) a.params().get(e.name) = e.value;
  const std::string last = "local/l" + std::to_string(full.local_widths.size());
  a.params().get(last + "/w").fill(0);
  a.params().get(last + "/b").fill(0);
  const auto in = micro_inputs(full, 3);
  Graph<float> ga, gb;
  const auto oa = a.forward(ga, in.partial, in.image, in.camera);
  const auto ob = b.forward(gb, in.partial, in.image, in.camera);
  EXPECT_EQ(oa.out().value(), ob.out().value());
}

TEST(Model, EveryVariantRunsAndStaysBounded) {
  for (Variant v : all_variants()) {
    ModelConfig cfg = micro();
    cfg.variant = v;
    const CsdnModel<float> model(cfg, 5);
    const auto in = micro_inputs(cfg, 4);
    Graph<float> g;
    const auto o = model.forward(g, in.partial, in.image, in.camera);
    ASSERT_EQ(o.out().shape(), (Shape{cfg.coarse_points(), 3})) << to_string(v);
    if (o.refined.offsets.valid()) {
      for (float d : o.refined.offsets.value().data()) EXPECT_LT(std::abs(d), 1.0f) << to_string(v);
    }
    EXPECT_EQ(traits(v).image, model.params().contains("image/conv1/w")) << to_string(v);
  }
}

TEST(Model, RejectsForeignParameters) {
  ModelConfig a = micro(), b = micro();
  b.refine_width = 9;
  const CsdnModel<float> m(a, 1);
  try {
    CsdnModel<float> bad(b, m.params());
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("local/l2/w"), std::string::npos) << e.what();
  }
}
