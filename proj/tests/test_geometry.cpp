// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "csdn/geometry.hpp"
#include "csdn/ops.hpp"
#include "csdn/random.hpp"
#include "csdn/render.hpp"
#include "csdn/verify.hpp"

using namespace csdn;

namespace {

std::vector<double> cloud(std::size_t n, Rng& rng, double extent = 0.5) {
  std::vector<double> xyz(3 * n);
  for (auto& v : xyz) v = rng.uniform(-extent, extent);
  return xyz;
}

double dist(std::span<const double> a, std::size_t i, std::span<const double> b, std::size_t j) {
  double s = 0;
  for (int d = 0; d < 3; ++d) s += (a[3 * i + d] - b[3 * j + d]) * (a[3 * i + d] - b[3 * j + d]);
  return std::sqrt(s);
}

std::vector<double> shuffled(const std::vector<double>& xyz, Rng& rng) {
  const std::size_t n = xyz.size() / 3;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<double> out(xyz.size());
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) out[3 * i + d] = xyz[3 * perm[i] + d];
  return out;
}

}  // namespace

TEST(Knn, ColinearPoints) {
  const std::vector<double> q{0, 0, 0}, r{1, 0, 0, 2, 0, 0, 3, 0, 0};
  EXPECT_EQ(knn<double>(q, r, 2).indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(Knn, ExhaustiveRowIsSortedPermutation) {
  Rng rng(1);
  const auto q = cloud(5, rng), r = cloud(9, rng);
  const auto t = knn<double>(q, r, 9);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto row = t.row(i);
    EXPECT_EQ(std::set<std::uint32_t>(row.begin(), row.end()).size(), 9u);
    for (std::size_t j = 1; j < 9; ++j) EXPECT_LE(dist(q, i, r, row[j - 1]), dist(q, i, r, row[j]));
  }
}

TEST(Knn, MatchesSortOracle) {
  Rng rng(2);
  const auto q = cloud(64, rng), r = cloud(96, rng);
  const auto t = knn<double>(q, r, 7);
  for (std::size_t i = 0; i < 64; ++i) {
    std::vector<std::uint32_t> idx(96);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return dist(q, i, r, a) < dist(q, i, r, b); });
    const auto row = t.row(i);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), idx.begin())) << "row " << i;
  }
}

TEST(Chamfer, AnalyticCases) {
  Rng rng(3);
  const auto x = cloud(20, rng);
  EXPECT_EQ(chamfer<double>(x, x, ChamferVariant::kL2), 0.0);
  EXPECT_EQ(chamfer<double>(x, x, ChamferVariant::kSquaredL2), 0.0);
  const std::vector<double> a{0, 0, 0}, b{1, 0, 0};
  EXPECT_EQ(chamfer<double>(a, b, ChamferVariant::kL2), 2.0);
}

TEST(Chamfer, MatchesBruteForce) {
  Rng rng(4);
  const auto x = cloud(48, rng), y = cloud(48, rng);
  double fwd = 0, bwd = 0;
  for (std::size_t i = 0; i < 48; ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < 48; ++j) best = std::min(best, dist(x, i, y, j));
    fwd += best;
  }
  for (std::size_t j = 0; j < 48; ++j) {
    double best = 1e300;
    for (std::size_t i = 0; i < 48; ++i) best = std::min(best, dist(x, i, y, j));
    bwd += best;
  }
  EXPECT_NEAR(chamfer<double>(x, y, ChamferVariant::kL2), fwd / 48 + bwd / 48, 1e-6);
}

TEST(ChamferProperty, SymmetricScaledPermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = cloud(10 + rng.below(30), rng), y = cloud(10 + rng.below(30), rng);
    for (auto v : {ChamferVariant::kL2, ChamferVariant::kSquaredL2}) {
      const double base = chamfer<double>(x, y, v);
      EXPECT_EQ(base, chamfer<double>(y, x, v));
      EXPECT_NEAR(base, chamfer<double>(shuffled(x, rng), shuffled(y, rng), v), 1e-12);
      std::vector<double> sx = x, sy = y;
      for (auto& c : sx) c *= 3;
      for (auto& c : sy) c *= 3;
      const double want = v == ChamferVariant::kL2 ? 3 * base : 9 * base;
      EXPECT_NEAR(chamfer<double>(sx, sy, v), want, 1e-12 * want);
    }
  }
}

TEST(Chamfer, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  Tensor<double> x({48, 3}, cloud(48, rng)), y({48, 3}, cloud(48, rng));
  for (auto v : {ChamferVariant::kL2, ChamferVariant::kSquaredL2}) {
    const double err = verify::gradcheck({x, y}, [v](auto&, auto& in) { return ad::chamfer(in[0], in[1], v); });
    EXPECT_LE(err, 1e-5);
  }
}

TEST(FScore, IdentityAndSeparation) {
  Rng rng(7);
  auto x = cloud(30, rng);
  EXPECT_EQ(f_score<double>(x, x, 0.001), 1.0);
  auto far = x;
  for (auto& c : far) c += 10;
  EXPECT_EQ(f_score<double>(x, far, 0.001), 0.0);
}

TEST(FScoreProperty, BoundedMonotoneAndCounted) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = cloud(25, rng), y = cloud(31, rng);
    double prev = 0;
    for (double tau : {0.01, 0.05, 0.1, 0.2, 0.5}) {
      const double f = f_score<double>(x, y, tau);
      EXPECT_GE(f, prev);
      EXPECT_LE(f, 1.0);
      prev = f;
      auto frac = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < a.size() / 3; ++i) {
          double best = 1e300;
          for (std::size_t j = 0; j < b.size() / 3; ++j) best = std::min(best, dist(a, i, b, j));
          hit += best <= tau;
        }
        return static_cast<double>(hit) / static_cast<double>(a.size() / 3);
      };
      const double p = frac(x, y), r = frac(y, x);
      EXPECT_NEAR(f, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-12);
      EXPECT_EQ(f, f_score<double>(shuffled(x, rng), shuffled(y, rng), tau));
    }
  }
}

TEST(Projection, PrincipalPointAndFocalScaling) {
  Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 30, 64, 64);
  const std::vector<double> axis{0, 0, 0};
  const auto p = project<double>(axis, cam);
  ASSERT_TRUE(p.valid[0]);
  EXPECT_NEAR(p.uv[0], cam.cx, 1e-12);
  EXPECT_NEAR(p.uv[1], cam.cy, 1e-12);

  const std::vector<double> off{0.1, -0.2, 0.3};
  const auto a = project<double>(off, cam);
  Camera cam2 = cam;
  cam2.fx *= 2;
  cam2.fy *= 2;
  const auto b = project<double>(off, cam2);
  EXPECT_NEAR(b.uv[0] - cam.cx, 2 * (a.uv[0] - cam.cx), 1e-9);
  EXPECT_NEAR(b.uv[1] - cam.cy, 2 * (a.uv[1] - cam.cy), 1e-9);
}

TEST(Projection, BehindCameraIsInvalid) {
  Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 30, 64, 64);
  const std::vector<double> behind{0, 0, -3};
  EXPECT_FALSE(project<double>(behind, cam).valid[0]);
}

TEST(Camera, RejectsNonOrthonormalRotation) {
  Camera cam;
  cam.rotation(0, 0) = 1.1;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
}
