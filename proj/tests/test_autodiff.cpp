// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "csdn/autodiff.hpp"
#include "csdn/kernels.hpp"
#include "csdn/ops.hpp"
#include "csdn/random.hpp"
#include "csdn/verify.hpp"

using namespace csdn;
using ad::Graph;
using ad::Var;

namespace {

Tensor<double> randn(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum so every output element gets a distinct cotangent.
Var<double> weigh(Graph<double>& g, Var<double> x, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(x, g.constant(randn(x.shape(), rng))));
}

}  // namespace

TEST(Autodiff, ProductRule) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>::scalar(3), true);
  auto y = g.input("y", Tensor<double>::scalar(4), true);
  auto z = ad::mul(x, y);
  EXPECT_EQ(z.value()[0], 12);
  g.backward(z);
  EXPECT_EQ(x.grad()[0], 4);
  EXPECT_EQ(y.grad()[0], 3);
}

TEST(Autodiff, TanhAtZero) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>::scalar(0), true);
  auto y = ad::tanh(x);
  EXPECT_EQ(y.value()[0], 0);
  g.backward(y);
  EXPECT_EQ(x.grad()[0], 1);
}

TEST(Autodiff, SumGradientIsOnes) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>({3}, {1, -2, 5}), true);
  g.backward(ad::sum(x));
  EXPECT_EQ(x.grad(), Tensor<double>({3}, 1.0));
}

TEST(Autodiff, GroupMaxGradientIsOneHot) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>({4, 1}, {0.5, 3, -1, 2}), true);
  g.backward(ad::sum(ad::group_max(x, 4)));
  EXPECT_EQ(x.grad(), Tensor<double>({4, 1}, {0, 1, 0, 0}));
}

TEST(Autodiff, GroupMaxTiesGoToLowestRow) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>({3, 1}, {2, 2, 2}), true);
  g.backward(ad::sum(ad::group_max(x, 3)));
  EXPECT_EQ(x.grad(), Tensor<double>({3, 1}, {1, 0, 0}));
}

TEST(Autodiff, FanOutAccumulates) {
  // y = x*x + 3x, hand-expanded: dy/dx = 2x + 3.
  Graph<double> g;
  auto x = g.input("x", Tensor<double>({2}, {1.5, -2}), true);
  auto y = ad::sum(ad::add(ad::mul(x, x), ad::scale(x, 3.0)));
  g.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -1.0);
}

TEST(Autodiff, EvalIsBitwiseRepeatable) {
  Rng rng(4);
  Graph<double> g;
  auto x = g.input("x", randn({5, 7}, rng));
  auto w = g.constant(randn({7, 3}, rng));
  auto y = ad::tanh(ad::matmul(x, w));
  g.mark_output("y", y);
  const auto a = g.eval();
  const auto b = g.eval();
  EXPECT_EQ(a.at("y"), b.at("y"));
  EXPECT_EQ(a.at("y"), y.value());
}

TEST(Autodiff, EvalRebindsInputs) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>::scalar(2));
  g.mark_output("y", ad::mul(x, x));
  const auto out = g.eval({{"x", Tensor<double>::scalar(5)}});
  EXPECT_EQ(out.at("y")[0], 25);
}

TEST(Autodiff, BackwardClearsEarlierGradients) {
  Graph<double> g;
  auto x = g.input("x", Tensor<double>::scalar(2), true);
  auto y = ad::scale(x, 3.0);
  g.backward(y);
  g.backward(y);
  EXPECT_EQ(x.grad()[0], 3);
}

TEST(Autodiff, ShapeErrorNamesShapes) {
  Graph<double> g;
  auto a = g.constant(Tensor<double>({2, 3}));
  auto b = g.constant(Tensor<double>({4, 3}));
  try {
    ad::matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ad::add(a, b), ShapeError);
}

TEST(Autodiff, ConvOutputSize) {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({9, 9, 2}));
  auto w = g.constant(Tensor<double>({3, 3, 2, 4}));
  EXPECT_EQ(ad::conv2d(x, w, 2).shape(), (Shape{5, 5, 4}));
  EXPECT_EQ(ad::conv2d(x, w, 1).shape(), (Shape{9, 9, 4}));
}

TEST(Autodiff, BilinearExactAndMidpoint) {
  Graph<double> g;
  Tensor<double> map({2, 2, 1}, {1, 2, 3, 4});
  auto m = g.constant(map);
  auto at = ad::bilinear_sample<double>(m, {1, 0, 0.5, 0.5}, {1, 1});
  EXPECT_EQ(at.value()(0, 0), 2);
  EXPECT_EQ(at.value()(1, 0), 2.5);
}

TEST(Autodiff, InstanceStdIsPopulation) {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({4, 1}, {1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(ad::instance_std(x).value()[0], std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(ad::instance_mean(x).value()[0], 2.5);
}

// Random-input gradient property for every primitive, 64-bit.
TEST(AutodiffProperty, PrimitivesMatchFiniteDifferences) {
  Rng rng(11);
  using Fn = verify::ScalarFn;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Fn f;
  };
  const std::vector<Case> cases = {
      {"add", {{3, 4}, {3, 4}}, [](auto& g, auto& v) { return weigh(g, ad::add(v[0], v[1]), 1); }},
      {"div", {{3, 4}, {3, 4}},
       [](auto& g, auto& v) {
         auto d = ad::add(ad::mul(v[1], v[1]), g.constant(Tensor<double>({3, 4}, 1.0)));
         return weigh(g, ad::div(v[0], d), 2);
       }},
      {"matmul", {{5, 7}, {7, 3}}, [](auto& g, auto& v) { return weigh(g, ad::matmul(v[0], v[1]), 3); }},
      {"concat", {{2, 3}, {4, 3}},
       [](auto& g, auto& v) { return weigh(g, ad::concat<double>({v[0], v[1]}, 0), 4); }},
      {"broadcast", {{1, 3}}, [](auto& g, auto& v) { return weigh(g, ad::broadcast_to(v[0], {4, 3}), 5); }},
      {"conv2d", {{5, 5, 2}, {3, 3, 2, 3}},
       [](auto& g, auto& v) { return weigh(g, ad::conv2d(v[0], v[1], 2), 6); }},
      {"instance_std", {{6, 3}}, [](auto& g, auto& v) { return weigh(g, ad::instance_std(v[0]), 7); }},
      {"avg_pool2d", {{4, 6, 2}}, [](auto& g, auto& v) { return weigh(g, ad::avg_pool2d(v[0], 2, 3), 8); }},
      {"gather_rows", {{4, 2}},
       [](auto& g, auto& v) { return weigh(g, ad::gather_rows<double>(v[0], {3, 0, 3, 1}), 9); }},
  };
  for (const auto& c : cases) {
    std::vector<Tensor<double>> inputs;
    for (const auto& s : c.shapes) inputs.push_back(randn(s, rng));
    EXPECT_LE(verify::gradcheck(inputs, c.f), verify::kPrimitiveTol) << c.name;
  }
}

TEST(AutodiffProperty, FloatGradientsWithinLooseTolerance) {
  Rng rng(12);
  Graph<float> g;
  auto a = g.input("a", randn({6, 5}, rng).cast<float>(), true);
  auto b = g.input("b", randn({5, 4}, rng).cast<float>(), true);
  auto y = ad::sum(ad::tanh(ad::matmul(a, b)));
  g.backward(y);
  // Compare against the 64-bit gradient of the same function.
  Graph<double> gd;
  auto ad_ = gd.input("a", a.value().cast<double>(), true);
  auto bd = gd.input("b", b.value().cast<double>(), true);
  gd.backward(ad::sum(ad::tanh(ad::matmul(ad_, bd))));
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.grad().numel(); ++i) {
    num += std::pow(a.grad()[i] - ad_.grad()[i], 2);
    den += std::pow(ad_.grad()[i], 2);
  }
  EXPECT_LE(std::sqrt(num / den), 1e-2);
}

TEST(AutodiffProperty, PerturbedVjpIsDetected) {
  ad::testing::set_vjp_perturbation("tanh");
  Rng rng(13);
  const double err = verify::gradcheck({randn({4, 4}, rng)}, [](auto& g, auto& v) {
    return weigh(g, ad::tanh(v[0]), 1);
  });
  ad::testing::set_vjp_perturbation("");
  EXPECT_GT(err, verify::kPrimitiveTol);
}

TEST(Kernels, BlockAndTailPathsAgreeBitwise) {
  // Row 0 of a large product (vector block path) must equal the same row
  // computed alone (row path) and through the scalar column tail.
  Rng rng(5);
  const std::size_t m = 13, k = 300, n = 37;
  std::vector<float> a(m * k), b(k * n), c(m * n);
  for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
  kernels::gemm<float>(a, b, c, m, k, n, false);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<float> row(n);
    kernels::gemm<float>(std::span<const float>(a).subspan(i * k, k), b, row, 1, k, n, false);
    for (std::size_t j = 0; j < n; ++j) {
      ASSERT_EQ(row[j], c[i * n + j]) << i << "," << j;
      float acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * k + p], b[p * n + j], acc);
      ASSERT_EQ(acc, c[i * n + j]) << i << "," << j;
    }
  }
}

TEST(Kernels, TransposedLeftOperandMatches) {
  Rng rng(6);
  const std::size_t m = 17, k = 520, n = 40;
  std::vector<double> at(k * m), a(m * k), b(k * n), c1(m * n, 0.5), c2(m * n, 0.5);
  for (auto& v : at) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  kernels::transpose<double>(at, a, k, m);
  kernels::gemm<double>(a, b, c1, m, k, n, true);
  kernels::gemm_tn<double>(at, b, c2, m, k, n, true);
  EXPECT_EQ(c1, c2);
}
