// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "csdn/geometry.hpp"
#include "csdn/model.hpp"
#include "csdn/ops.hpp"
#include "csdn/render.hpp"
#include "csdn/train.hpp"

namespace csdn::verify {

namespace {

using Clock = std::chrono::steady_clock;
using D = double;
using VarD = ad::Var<D>;

Tensor<D> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<D> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values with |v| >= margin, to stay away from relu's kink.
Tensor<D> away_from_zero(Rng& rng, Shape shape, double margin = 0.1) {
  Tensor<D> t(std::move(shape));
  for (auto& v : t.data()) {
    const double m = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Weighted sum with fixed random weights, so every output element carries a
// distinct upstream gradient.
VarD reduce(ad::Graph<D>& g, VarD x, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(x, g.constant(random_tensor(rng, x.shape(), 0.5, 1.5))));
}

double rel_error(std::span<const D> a, std::span<const D> b, double floor = 1e-12) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), floor});
  return std::sqrt(diff) / scale;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Recorder {
  const Options& opts;
  std::vector<CheckResult> out;

  template <typename F>
  void run(const std::string& suite, const std::string& name, F&& f) {
    CheckResult r;
    r.suite = suite;
    r.name = name;
    const auto t0 = Clock::now();
    try {
      f(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (opts.on_result) opts.on_result(r);
    out.push_back(std::move(r));
  }
};

}  // namespace

double gradcheck(const std::vector<Tensor<D>>& inputs, const ScalarFn& f, double h) {
  auto evaluate = [&](const std::vector<Tensor<D>>& xs, std::vector<Tensor<D>>* grads) {
    ad::Graph<D> g;
    std::vector<VarD> leaves;
    for (std::size_t i = 0; i < xs.size(); ++i) leaves.push_back(g.input("x" + std::to_string(i), xs[i], true));
    const VarD out = f(g, leaves);
    if (grads) {
      g.backward(out);
      for (auto& l : leaves) grads->push_back(l.grad());
    }
    return out.value()[0];
  };
  std::vector<Tensor<D>> analytic;
  evaluate(inputs, &analytic);
  double worst = 0;
  std::vector<Tensor<D>> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Tensor<D> numeric(xs[i].shape());
    for (std::size_t j = 0; j < xs[i].numel(); ++j) {
      const D orig = xs[i][j];
      xs[i][j] = orig + h;
      const D up = evaluate(xs, nullptr);
      xs[i][j] = orig - h;
      const D down = evaluate(xs, nullptr);
      xs[i][j] = orig;
      numeric[j] = (up - down) / (2 * h);
    }
    worst = std::max(worst, rel_error(analytic[i].data(), numeric.data()));
  }
  return worst;
}

EndToEndResult end_to_end_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double h) {
  CsdnModel<D> model(cfg, seed);
  Rng rng(derive_seed(seed, 7));
  // Zero biases put whole rows exactly on relu kinks (empty rows, padded
  // borders, invalid projections); move to a generic point first.
  for (auto& e : model.params().entries()) {
    if (e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, "/b") == 0)
      for (auto& v : e.value.data()) v += rng.uniform(-0.1, 0.1);
  }
  const Tensor<D> partial = random_tensor(rng, {cfg.input_points, 3}, -0.45, 0.45);
  const Tensor<D> gt = random_tensor(rng, {cfg.gt_points, 3}, -0.45, 0.45);
  const Tensor<D> image = random_tensor(rng, {cfg.image_size, cfg.image_size, 3}, 0.0, 1.0);
  const Camera camera = view_camera(3, cfg.image_size);
  const double alpha = 0.7;
  const bool coarse_only = !traits(cfg.variant).refine;

  StructureCache cache;
  auto loss_of = [&](ad::Graph<D>& g) {
    const auto o = model.forward(g, partial, image, camera, &cache);
    const auto target = g.constant(gt);
    return coarse_only ? ad::chamfer(o.coarse, target, ChamferVariant::kL2)
                       : completion_loss(o.coarse, o.out(), target, alpha);
  };

  ad::Graph<D> g;
  const auto loss = loss_of(g);
  g.backward(loss);
  std::vector<Tensor<D>> analytic;
  auto& entries = model.params().entries();
  for (auto& e : entries) {
    bool found = false;
    for (const auto& [ptr, var] : g.params()) {
      if (ptr == &e.value) {
        analytic.push_back(var.grad());
        found = true;
      }
    }
    if (!found) analytic.emplace_back(e.value.shape());
  }

  EndToEndResult res;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = entries[i].value;
    Tensor<D> numeric(p.shape());
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const D orig = p[j];
      p[j] = orig + h;
      cache.rewind();
      ad::Graph<D> gu;
      const D up = loss_of(gu).value()[0];
      p[j] = orig - h;
      cache.rewind();
      ad::Graph<D> gd;
      const D down = loss_of(gd).value()[0];
      p[j] = orig;
      numeric[j] = (up - down) / (2 * h);
    }
    res.scalars += p.numel();
    const double e = rel_error(analytic[i].data(), numeric.data(), kEndToEndFloor);
    if (e >= res.worst) {
      res.worst = e;
      res.worst_param = entries[i].name;
    }
  }
  return res;
}


namespace {

struct PrimitiveCase {
  std::string name;
  std::vector<Tensor<D>> inputs;
  ScalarFn fn;
};

std::vector<PrimitiveCase> primitive_cases(Rng& rng) {
  std::vector<PrimitiveCase> c;
  auto seed = [&] { return rng.next(); };
  auto unary = [&](std::string name, Tensor<D> x, std::function<VarD(VarD)> op) {
    const auto s = seed();
    c.push_back({std::move(name), {std::move(x)},
                 [op, s](ad::Graph<D>& g, const std::vector<VarD>& v) { return reduce(g, op(v[0]), s); }});
  };
  auto binary = [&](std::string name, Tensor<D> x, Tensor<D> y, std::function<VarD(VarD, VarD)> op) {
    const auto s = seed();
    c.push_back({std::move(name), {std::move(x), std::move(y)},
                 [op, s](ad::Graph<D>& g, const std::vector<VarD>& v) { return reduce(g, op(v[0], v[1]), s); }});
  };
  binary("add", random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4}), ad::add<D>);
  binary("sub", random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4}), ad::sub<D>);
  binary("mul", random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4}), ad::mul<D>);
  binary("div", random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4}, 0.5, 2.0), ad::div<D>);
  unary("scale", random_tensor(rng, {2, 5}), [](VarD x) { return ad::scale(x, 1.7); });
  binary("matmul", random_tensor(rng, {3, 5}), random_tensor(rng, {5, 4}), ad::matmul<D>);
  binary("matmul", random_tensor(rng, {9, 7}), random_tensor(rng, {7, 21}), ad::matmul<D>);
  binary("concat", random_tensor(rng, {2, 3}), random_tensor(rng, {4, 3}),
         [](VarD a, VarD b) { return ad::concat<D>({a, b}, 0); });
  binary("concat", random_tensor(rng, {3, 2}), random_tensor(rng, {3, 5}),
         [](VarD a, VarD b) { return ad::concat<D>({a, b}, 1); });
  binary("concat", random_tensor(rng, {2, 2, 3}), random_tensor(rng, {2, 2, 1}),
         [](VarD a, VarD b) { return ad::concat<D>({a, b}, 2); });
  unary("slice", random_tensor(rng, {4, 6}), [](VarD x) { return ad::slice(x, 1, 1, 4); });
  unary("slice", random_tensor(rng, {5, 2, 3}), [](VarD x) { return ad::slice(x, 0, 2, 5); });
  unary("broadcast", random_tensor(rng, {4}), [](VarD x) { return ad::broadcast_to(x, Shape{3, 4}); });
  unary("broadcast", random_tensor(rng, {1, 3}), [](VarD x) { return ad::broadcast_to(x, Shape{2, 5, 3}); });
  unary("reshape", random_tensor(rng, {2, 6}), [](VarD x) { return ad::reshape(x, Shape{3, 4}); });
  unary("relu", away_from_zero(rng, {4, 5}), ad::relu<D>);
  unary("tanh", random_tensor(rng, {4, 5}, -2.0, 2.0), ad::tanh<D>);
  unary("sum", random_tensor(rng, {3, 3}), ad::sum<D>);
  binary("conv2d", random_tensor(rng, {7, 6, 3}), random_tensor(rng, {3, 3, 3, 4}),
         [](VarD x, VarD w) { return ad::conv2d(x, w, 1); });
  binary("conv2d", random_tensor(rng, {7, 6, 3}), random_tensor(rng, {3, 3, 3, 2}),
         [](VarD x, VarD w) { return ad::conv2d(x, w, 2); });
  unary("avg_pool2d", random_tensor(rng, {6, 4, 3}), [](VarD x) { return ad::avg_pool2d(x, 2, 2); });
  unary("avg_pool2d", random_tensor(rng, {7, 5, 2}), [](VarD x) { return ad::avg_pool2d(x, 3, 2); });
  unary("instance_mean", random_tensor(rng, {6, 4}), ad::instance_mean<D>);
  unary("instance_std", random_tensor(rng, {6, 4}), ad::instance_std<D>);
  {
    // Distinct values spaced well apart inside each group.
    Tensor<D> x({12, 3});
    std::vector<double> pool(36);
    std::iota(pool.begin(), pool.end(), 0.0);
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    for (std::size_t i = 0; i < 36; ++i) x[i] = 0.1 * pool[i];
    unary("group_max", x, [](VarD v) { return ad::group_max(v, 4); });
  }
  unary("gather_rows", random_tensor(rng, {5, 3}),
        [](VarD x) { return ad::gather_rows(x, std::vector<std::uint32_t>{4, 0, 0, 2, 4, 1}); });
  {
    std::vector<D> uv;
    std::vector<std::uint8_t> valid;
    for (int i = 0; i < 12; ++i) {
      uv.push_back(rng.uniform(-1.0, 7.0));
      uv.push_back(rng.uniform(-1.0, 6.0));
      valid.push_back(i % 5 == 4 ? 0 : 1);
    }
    unary("bilinear_sample", random_tensor(rng, {5, 6, 3}),
          [uv, valid](VarD m) { return ad::bilinear_sample(m, uv, valid); });
  }
  c.push_back({"chamfer", {random_tensor(rng, {8, 3}), random_tensor(rng, {10, 3})},
               [](ad::Graph<D>&, const std::vector<VarD>& v) { return ad::chamfer(v[0], v[1], ChamferVariant::kL2); }});
  c.push_back({"chamfer", {random_tensor(rng, {9, 3}), random_tensor(rng, {6, 3})},
               [](ad::Graph<D>&, const std::vector<VarD>& v) {
                 return ad::chamfer(v[0], v[1], ChamferVariant::kSquaredL2);
               }});
  return c;
}

// Random chains of four shape-preserving nodes over [4 x 4] operands.
PrimitiveCase random_graph(Rng& rng, std::size_t index) {
  std::vector<int> kinds;
  for (int i = 0; i < 4; ++i) kinds.push_back(static_cast<int>(rng.below(10)));
  const Tensor<D> w = random_tensor(rng, {4, 4});
  const auto s = rng.next();
  ScalarFn fn = [kinds, w, s](ad::Graph<D>& g, const std::vector<VarD>& v) {
    VarD x = v[0];
    const VarD y = v[1];
    for (int k : kinds) {
      switch (k) {
        case 0: x = ad::tanh(x); break;
        case 1: x = ad::scale(x, -0.8); break;
        case 2: x = ad::mul(x, y); break;
        case 3: x = ad::add(x, ad::tanh(y)); break;
        case 4: x = ad::matmul(x, g.constant(w)); break;
        case 5: x = ad::sub(x, ad::broadcast_to(ad::instance_mean(x), x.shape())); break;
        case 6: {
          const auto sd = ad::add(ad::instance_std(x), g.constant(Tensor<D>::full({1, 4}, 1.0)));
          x = ad::div(x, ad::broadcast_to(sd, x.shape()));
          break;
        }
        case 7: x = ad::gather_rows(x, std::vector<std::uint32_t>{2, 0, 3, 1}); break;
        case 8: x = ad::slice(ad::concat<D>({x, y}, 1), 1, 2, 6); break;
        default: x = ad::reshape(ad::reshape(x, Shape{2, 8}), Shape{4, 4}); break;
      }
    }
    return reduce(g, x, s);
  };
  return {"graph#" + std::to_string(index), {random_tensor(rng, {4, 4}), random_tensor(rng, {4, 4})}, fn};
}

}  // namespace

std::vector<CheckResult> gradient_suite(const Options& opts) {
  Recorder rec{opts, {}};
  ad::testing::set_vjp_perturbation(opts.perturb_vjp);
  Rng rng(derive_seed(opts.seed, 11));
  for (auto& c : primitive_cases(rng)) {
    rec.run("gradient", c.name, [&](CheckResult& r) {
      const double e = gradcheck(c.inputs, c.fn);
      r.pass = e <= kPrimitiveTol;
      r.detail = "rel err " + fmt("%.2e", e) + (r.pass ? "" : " > 1e-6 in primitive '" + c.name + "'");
    });
  }
  rec.run("gradient", "random 4-node graphs x20", [&](CheckResult& r) {
    double worst = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      auto c = random_graph(rng, i);
      worst = std::max(worst, gradcheck(c.inputs, c.fn));
    }
    r.pass = worst <= kPrimitiveTol;
    r.detail = "worst rel err " + fmt("%.2e", worst);
  });
  for (Variant v : {Variant::kFull, Variant::kSerial, Variant::kNoIpadain, Variant::kSwapFeatures}) {
    rec.run("gradient", "end-to-end micro (" + std::string(to_string(v)) + ")", [&](CheckResult& r) {
      ModelConfig cfg = preset_config(Preset::kMicro).model;
      cfg.variant = v;
      const auto res = end_to_end_gradcheck(cfg, derive_seed(opts.seed, 12));
      r.pass = res.worst <= kEndToEndTol;
      r.detail = std::to_string(res.scalars) + " scalars, worst rel err " + fmt("%.2e", res.worst) +
                 " (" + res.worst_param + ")";
    });
  }
  ad::testing::set_vjp_perturbation("");
  return rec.out;
}


namespace {

// Coordinates on a coarse lattice so exact ties occur regularly.
std::vector<D> random_cloud(Rng& rng, std::size_t n, bool lattice) {
  std::vector<D> xyz(3 * n);
  for (auto& v : xyz) v = lattice ? static_cast<double>(rng.below(5)) * 0.25 : rng.uniform(-1.0, 1.0);
  return xyz;
}

std::vector<std::uint32_t> sort_oracle(std::span<const D> q, std::span<const D> ref, std::size_t k) {
  const std::size_t nq = q.size() / 3, nr = ref.size() / 3;
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < nr; ++j) {
      double d = 0;
      for (int c = 0; c < 3; ++c) d += (q[3 * i + c] - ref[3 * j + c]) * (q[3 * i + c] - ref[3 * j + c]);
      all.emplace_back(d, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(all[j].second);
  }
  return out;
}

double nearest_oracle(const D* p, std::span<const D> cloud, bool squared) {
  double best = 1e300;
  for (std::size_t j = 0; j < cloud.size() / 3; ++j) {
    double d = 0;
    for (int c = 0; c < 3; ++c) d += (p[c] - cloud[3 * j + c]) * (p[c] - cloud[3 * j + c]);
    best = std::min(best, d);
  }
  return squared ? best : std::sqrt(best);
}

double chamfer_oracle(std::span<const D> x, std::span<const D> y, bool squared) {
  double a = 0, b = 0;
  for (std::size_t i = 0; i < x.size() / 3; ++i) a += nearest_oracle(&x[3 * i], y, squared);
  for (std::size_t i = 0; i < y.size() / 3; ++i) b += nearest_oracle(&y[3 * i], x, squared);
  return a / static_cast<double>(x.size() / 3) + b / static_cast<double>(y.size() / 3);
}

double fscore_oracle(std::span<const D> p, std::span<const D> g, double tau) {
  std::size_t hp = 0, hg = 0;
  for (std::size_t i = 0; i < p.size() / 3; ++i) hp += nearest_oracle(&p[3 * i], g, false) <= tau;
  for (std::size_t i = 0; i < g.size() / 3; ++i) hg += nearest_oracle(&g[3 * i], p, false) <= tau;
  const double pr = static_cast<double>(hp) / static_cast<double>(p.size() / 3);
  const double rc = static_cast<double>(hg) / static_cast<double>(g.size() / 3);
  return pr + rc == 0 ? 0.0 : 2 * pr * rc / (pr + rc);
}

std::size_t size_in(Rng& rng, std::size_t lo) { return lo + rng.below(kOracleMaxSize - lo + 1); }

}  // namespace

std::vector<CheckResult> oracle_suite(const Options& opts) {
  Recorder rec{opts, {}};
  Rng rng(derive_seed(opts.seed, 21));
  rec.run("oracle", "knn vs full sort", [&](CheckResult& r) {
    std::size_t bad = 0;
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const auto q = random_cloud(rng, size_in(rng, 1), t % 2 == 0);
      const auto ref = random_cloud(rng, size_in(rng, 1), t % 2 == 0);
      const std::size_t k = 1 + rng.below(ref.size() / 3);
      if (knn<D>(q, ref, k).indices != sort_oracle(q, ref, k)) ++bad;
    }
    r.pass = bad == 0;
    r.detail = std::to_string(kOracleInstances - bad) + "/" + std::to_string(kOracleInstances) + " identical";
  });
  for (bool squared : {false, true}) {
    rec.run("oracle", std::string("chamfer ") + (squared ? "squared_l2" : "l2") + " vs brute force",
            [&](CheckResult& r) {
              double worst = 0;
              for (std::size_t t = 0; t < kOracleInstances; ++t) {
                const auto x = random_cloud(rng, size_in(rng, 1), t % 3 == 0);
                const auto y = random_cloud(rng, size_in(rng, 1), t % 3 == 0);
                const double got = chamfer<D>(x, y, squared ? ChamferVariant::kSquaredL2 : ChamferVariant::kL2);
                worst = std::max(worst, std::abs(got - chamfer_oracle(x, y, squared)));
              }
              r.pass = worst <= kOracleValueTol;
              r.detail = "max abs diff " + fmt("%.2e", worst);
            });
  }
  rec.run("oracle", "f_score vs direct count", [&](CheckResult& r) {
    double worst = 0;
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const auto p = random_cloud(rng, size_in(rng, 1), false);
      const auto g = random_cloud(rng, size_in(rng, 1), false);
      const double tau = rng.uniform(0.01, 0.6);
      worst = std::max(worst, std::abs(f_score<D>(p, g, tau) - fscore_oracle(p, g, tau)));
    }
    r.pass = worst <= kOracleValueTol;
    r.detail = "max abs diff " + fmt("%.2e", worst);
  });
  rec.run("oracle", "dual graph vs per-block sort", [&](CheckResult& r) {
    std::size_t bad = 0;
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const auto coarse = random_cloud(rng, size_in(rng, 2), t % 2 == 0);
      const auto partial = random_cloud(rng, size_in(rng, 2), t % 2 == 0);
      const std::size_t k = 1 + rng.below(std::min(coarse.size(), partial.size()) / 3);
      const DualGraph dg = build_dual_graph<D>(coarse, partial, k);
      const auto a = sort_oracle(coarse, partial, k);
      const auto b = sort_oracle(coarse, coarse, k);
      bool ok = dg.rows() == coarse.size() / 3;
      for (std::size_t i = 0; ok && i < dg.rows(); ++i) {
        ok = std::equal(dg.partial_block(i).begin(), dg.partial_block(i).end(), a.begin() + static_cast<std::ptrdiff_t>(i * k)) &&
             std::equal(dg.coarse_block(i).begin(), dg.coarse_block(i).end(), b.begin() + static_cast<std::ptrdiff_t>(i * k));
      }
      if (!ok) ++bad;
    }
    r.pass = bad == 0;
    r.detail = std::to_string(kOracleInstances - bad) + "/" + std::to_string(kOracleInstances) + " identical";
  });
  return rec.out;
}


std::vector<CheckResult> ipadain_suite(const Options& opts) {
  Recorder rec{opts, {}};
  rec.run("ipadain", "output statistics x" + std::to_string(kIpadainPairs) + " (32-bit)", [&](CheckResult& r) {
    Rng rng(derive_seed(opts.seed, 31));
    const std::size_t c = 16;
    const double eps = 1e-5;
    double worst_mean = 0, worst_std = 0;
    for (std::size_t t = 0; t < kIpadainPairs; ++t) {
      const std::size_t n = 8 + rng.below(121), width = 3 + rng.below(30);
      ParamStore<float> p;
      nn::add_mlp(p, "a", {c, c / 2, width}, rng);
      nn::add_mlp(p, "b", {c, c / 2, width}, rng);
      for (auto& e : p.entries())
        for (auto& v : e.value.data()) v = static_cast<float>(rng.uniform(-0.6, 0.6));
      Tensor<float> f({n, width}), feat({1, c});
      for (std::size_t ch = 0; ch < width; ++ch) {
        const double scale = std::exp(rng.uniform(-3.0, 1.0)), shift = rng.uniform(-2.0, 2.0);
        for (std::size_t i = 0; i < n; ++i) f(i, ch) = static_cast<float>(shift + scale * rng.uniform(-1.0, 1.0));
      }
      for (auto& v : feat.data()) v = static_cast<float>(rng.uniform(0.0, 2.0));
      ad::Graph<float> g;
      const auto fv = g.input("f", f);
      const auto style = g.input("F_I", feat);
      const auto gamma = nn::mlp(g, p, "a", 2, style);
      const auto beta = nn::mlp(g, p, "b", 2, style);
      const auto out = ipadain(fv, gamma, beta, eps).value();
      for (std::size_t ch = 0; ch < width; ++ch) {
        double mf = 0, mo = 0;
        for (std::size_t i = 0; i < n; ++i) {
          mf += f(i, ch);
          mo += out(i, ch);
        }
        mf /= static_cast<double>(n);
        mo /= static_cast<double>(n);
        double vf = 0, vo = 0;
        for (std::size_t i = 0; i < n; ++i) {
          vf += (f(i, ch) - mf) * (f(i, ch) - mf);
          vo += (out(i, ch) - mo) * (out(i, ch) - mo);
        }
        const double sf = std::sqrt(vf / static_cast<double>(n)), so = std::sqrt(vo / static_cast<double>(n));
        const double gc = gamma.value()(0, ch), bc = beta.value()(0, ch);
        worst_mean = std::max(worst_mean, std::abs(mo - bc));
        worst_std = std::max(worst_std, std::abs(so - std::abs(gc) * sf / (sf + eps)));
      }
    }
    r.pass = worst_mean <= kIpadainMeanTol && worst_std <= kIpadainStdTol;
    r.detail = "max |mean-beta| " + fmt("%.2e", worst_mean) + ", max std err " + fmt("%.2e", worst_std);
  });
  return rec.out;
}


std::vector<CheckResult> invariant_suite(const Options& opts) {
  Recorder rec{opts, {}};
  const ModelConfig desk = preset_config(Preset::kDesk).model;
  rec.run("invariant", "point encoder permutation/multiplicity (bitwise)", [&](CheckResult& r) {
    Rng rng(derive_seed(opts.seed, 41));
    ParamStore<float> p;
    add_point_encoder(p, desk, rng);
    const std::size_t n = desk.input_points;
    Tensor<float> pts({n, 3});
    for (auto& v : pts.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor<float> shuffled({n, 3}), doubled({2 * n, 3});
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        shuffled(i, c) = pts(perm[i], c);
        doubled(2 * i, c) = doubled(2 * i + 1, c) = pts(i, c);
      }
    }
    auto encode = [&](const Tensor<float>& x) {
      ad::Graph<float> g;
      return encode_points(g, p, desk, g.input("p", x)).value();
    };
    const auto base = encode(pts);
    const bool perm_ok = encode(shuffled) == base;
    const bool dup_ok = encode(doubled) == base;
    r.pass = perm_ok && dup_ok && base.shape() == Shape{1, desk.feature_dim};
    r.detail = std::string("permutation ") + (perm_ok ? "identical" : "DIFFERS") + ", duplication " +
               (dup_ok ? "identical" : "DIFFERS");
  });
  rec.run("invariant", "offsets strictly inside (-1, 1)", [&](CheckResult& r) {
    Rng rng(derive_seed(opts.seed, 42));
    double worst = 0;
    for (double gain : {1.0, 1e3}) {
      CsdnModel<float> model(desk, derive_seed(opts.seed, 43));
      for (auto& e : model.params().entries()) {
        if (e.name.rfind("offset/", 0) == 0)
          for (auto& v : e.value.data()) v = static_cast<float>(v * gain);
      }
      Tensor<float> partial({desk.input_points, 3}), image({desk.image_size, desk.image_size, 3});
      for (auto& v : partial.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
      for (auto& v : image.data()) v = static_cast<float>(rng.uniform());
      ad::Graph<float> g;
      const auto o = model.forward(g, partial, image, view_camera(0, desk.image_size));
      for (float v : o.refined.offsets.value().data()) worst = std::max(worst, static_cast<double>(std::abs(v)));
    }
    r.pass = worst < 1.0;
    r.detail = "max |dC| = " + fmt("%.9g", worst) + " (including saturated heads)";
  });
  rec.run("invariant", "|P_0| = M * N_r'", [&](CheckResult& r) {
    Rng rng(derive_seed(opts.seed, 44));
    std::string detail;
    bool ok = true;
    for (auto [m, nr] : {std::pair<std::size_t, std::size_t>{1, 4}, {2, 6}, {4, 128}, {3, 10}}) {
      ModelConfig cfg = preset_config(Preset::kMicro).model;
      cfg.surfaces = m;
      cfg.surface_points = nr;
      ParamStore<float> p;
      add_fusion(p, cfg, rng);
      ad::Graph<float> g;
      Tensor<float> fp({1, cfg.feature_dim}), fi({1, cfg.feature_dim});
      for (auto& v : fp.data()) v = static_cast<float>(rng.uniform());
      for (auto& v : fi.data()) v = static_cast<float>(rng.uniform());
      const auto p0 = fold_surfaces(g, p, cfg, g.input("fp", fp), g.input("fi", fi));
      ok = ok && p0.shape() == Shape{m * nr, 3};
      detail += std::to_string(m) + "x" + std::to_string(nr) + "->" + std::to_string(p0.shape()[0]) + " ";
    }
    r.pass = ok;
    r.detail = detail;
  });
  rec.run("invariant", "pyramid 56/28/14/7 and F_I 1x1024 at full config", [&](CheckResult& r) {
    const ModelConfig full = preset_config(Preset::kFull).model;
    Rng rng(derive_seed(opts.seed, 45));
    ParamStore<float> p;
    add_image_encoder(p, full, rng);
    Tensor<float> image({full.image_size, full.image_size, 3});
    for (auto& v : image.data()) v = static_cast<float>(rng.uniform());
    ad::Graph<float> g;
    const auto f = encode_image(g, p, full, g.input("image", image));
    const std::size_t expect[] = {56, 28, 14, 7};
    bool ok = f.pyramid.size() == 4 && f.global.shape() == Shape{1, 1024};
    std::string detail;
    for (std::size_t l = 0; l < f.pyramid.size(); ++l) {
      const auto& s = f.pyramid[l].shape();
      ok = ok && s[0] == expect[l] && s[1] == expect[l];
      detail += std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + " ";
    }
    r.pass = ok;
    r.detail = detail + "F_I " + shape_str(f.global.shape());
  });
  return rec.out;
}

std::vector<CheckResult> run_all(const Options& opts) {
  std::vector<CheckResult> all;
  for (auto* suite : {&gradient_suite, &oracle_suite, &ipadain_suite, &invariant_suite}) {
    auto part = suite(opts);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

std::string format_matrix(const std::vector<CheckResult>& results) {
  std::string out;
  char line[512];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-10s %-52s %s  %7.2fs  %s\n", r.suite.c_str(), r.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
    out += line;
  }
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

}  // namespace csdn::verify
