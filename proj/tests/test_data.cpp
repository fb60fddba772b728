// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "csdn/data.hpp"
#include "csdn/io.hpp"
#include "csdn/mesh.hpp"
#include "csdn/render.hpp"
#include "csdn/text.hpp"

using namespace csdn;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(::testing::TempDir()) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

DataConfig small_data() {
  DataConfig d;
  d.categories = {Category::kTable, Category::kChair, Category::kLamp, Category::kCar};
  d.per_category = 1;
  d.test_per_category = 1;
  d.gt_points = 128;
  d.partial_points = 64;
  d.image_size = 32;
  d.views = 3;
  d.seed = 5;
  return d;
}

}  // namespace

// ---- mesh

TEST(Mesh, ShapesAreDeterministicNormalizedAndNonDegenerate) {
  for (Category c : all_categories()) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Mesh a = gen_shape(c, seed), b = gen_shape(c, seed);
      ASSERT_EQ(a.vertices.size(), b.vertices.size());
      for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_EQ(a.vertices[i], b.vertices[i]);
      for (const auto& v : a.vertices) EXPECT_LE(v.cwiseAbs().maxCoeff(), 0.5);
      for (std::size_t f = 0; f < a.faces.size(); ++f) EXPECT_GT(a.face_area(f), kDegenerateArea);
    }
  }
}

TEST(Mesh, CategoryNamesRoundTrip) {
  for (Category c : all_categories()) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_EQ(parse_category("lathe"), Category::kLamp);
  EXPECT_THROW(parse_category("sofa"), std::invalid_argument);
}

TEST(Mesh, TriangulatesConcavePolygon) {
  const std::vector<Eigen::Vector2d> l{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  const auto tris = triangulate_polygon(l);
  ASSERT_EQ(tris.size(), 4u);
  double area = 0;
  for (const auto& t : tris) {
    const auto a = l[t[1]] - l[t[0]], b = l[t[2]] - l[t[0]];
    area += std::abs(a.x() * b.y() - a.y() * b.x()) / 2;
  }
  EXPECT_NEAR(area, 3.0, 1e-12);
}

TEST(Sampling, CountAndPointsOnSurface) {
  const Mesh m = gen_shape(Category::kChair, 4);
  const PointCloud pc = sample_surface(m, 2048, 9);
  ASSERT_EQ(pc.size(), 2048u);
  // Every point lies on the plane of at least one triangle.
  for (std::size_t i = 0; i < pc.size(); i += 37) {
    const auto p = pc.point(i);
    const Eigen::Vector3d q(p[0], p[1], p[2]);
    double best = 1e9;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      const Eigen::Vector3d n = m.face_normal(f);
      best = std::min(best, std::abs(n.dot(q - m.vertices[m.faces[f][0]])));
    }
    EXPECT_LE(best, 1e-6);
  }
}

TEST(Sampling, UniformOverUnitSquare) {
  Mesh sq;
  sq.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  sq.faces = {{0, 1, 2}, {0, 2, 3}};
  const PointCloud pc = sample_surface(sq, 10000, 3);
  double counts[16] = {};
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto p = pc.point(i);
    const int cx = std::min(3, static_cast<int>(p[0] * 4)), cy = std::min(3, static_cast<int>(p[1] * 4));
    counts[cy * 4 + cx] += 1;
  }
  double chi2 = 0;
  for (double c : counts) chi2 += (c - 625.0) * (c - 625.0) / 625.0;
  // 15 degrees of freedom: the 0.999 quantile is 37.7.
  EXPECT_LT(chi2, 37.7);
}

// ---- render

TEST(Render, EmptySceneIsWhite) {
  const auto r = render(Mesh{}, view_camera(0, 16));
  for (float v : r.image.rgb) EXPECT_EQ(v, 1.0f);
}

TEST(Render, FrontFacingTriangleCoversCenter) {
  const Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 20, 17, 17);
  Mesh tri;
  tri.vertices = {{-0.5, -0.5, 0}, {0.5, -0.5, 0}, {0, 0.5, 0}};
  tri.faces = {{0, 1, 2}};
  const auto r = render(tri, cam);
  EXPECT_TRUE(r.covered(8, 8));
  EXPECT_FALSE(r.covered(0, 0));
}

TEST(Render, SilhouetteMatchesProjectedMesh) {
  const Mesh m = gen_shape(Category::kTable, 2);
  const Camera cam = view_camera(5, 48);
  const auto r = render(m, cam);
  // Every covered pixel is within one pixel of a projected surface sample and
  // every projected sample lands within one pixel of coverage.
  const PointCloud pts = sample_surface(m, 20000, 1);
  const auto proj = project<float>(pts.xyz(), cam);
  std::vector<int> hit(48 * 48, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const long x = std::lround(proj.uv[2 * i]), y = std::lround(proj.uv[2 * i + 1]);
    if (x < 0 || y < 0 || x >= 48 || y >= 48) continue;
    hit[y * 48 + x] = 1;
    bool near = false;
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        const long yy = y + dy, xx = x + dx;
        if (yy >= 0 && xx >= 0 && yy < 48 && xx < 48 && r.covered(yy, xx)) near = true;
      }
    EXPECT_TRUE(near) << x << "," << y;
  }
  for (long y = 0; y < 48; ++y)
    for (long x = 0; x < 48; ++x) {
      if (!r.covered(y, x)) continue;
      bool near = false;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy >= 0 && xx >= 0 && yy < 48 && xx < 48 && hit[yy * 48 + xx]) near = true;
        }
      EXPECT_TRUE(near) << x << "," << y;
    }
}

TEST(Render, VertexProjectsOntoRasterizedPixel) {
  const Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 40, 64, 64);
  const Mesh box = make_box({-0.3, -0.3, -0.3}, {0.3, 0.3, 0.3});
  const auto r = render(box, cam);
  for (const auto& v : box.vertices) {
    if (v.z() > 0) continue;  // front face only
    const std::vector<double> p{v.x(), v.y(), v.z()};
    const auto uv = project<double>(p, cam);
    // A corner covers at least one pixel center within one pixel along each axis.
    bool found = false;
    for (long dy = -1; dy <= 1 && !found; ++dy)
      for (long dx = -1; dx <= 1 && !found; ++dx) {
        const long x = std::lround(uv.uv[0]) + dx, y = std::lround(uv.uv[1]) + dy;
        if (x < 0 || y < 0 || x >= 64 || y >= 64 || !r.covered(y, x)) continue;
        found = std::abs(x - uv.uv[0]) <= 1.0 && std::abs(y - uv.uv[1]) <= 1.0;
      }
    EXPECT_TRUE(found);
  }
}

TEST(Views, EvenlySpacedOrthonormalExtrinsics) {
  const auto cams = view_cameras(64);
  ASSERT_EQ(cams.size(), kViewCount);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_NO_THROW(cams[i].validate());
    const Eigen::Vector3d eye = -cams[i].rotation.transpose() * cams[i].translation;
    EXPECT_NEAR(eye.norm(), kViewDistance, 1e-9);
    EXPECT_NEAR(std::asin(eye.y() / eye.norm()) * 180 / std::numbers::pi, kViewElevationDeg, 1e-9);
    const Eigen::Vector3d next = -cams[(i + 1) % cams.size()].rotation.transpose() *
                                 cams[(i + 1) % cams.size()].translation;
    const double cosang = Eigen::Vector2d(eye.x(), eye.z()).normalized().dot(
        Eigen::Vector2d(next.x(), next.z()).normalized());
    EXPECT_NEAR(std::acos(std::clamp(cosang, -1.0, 1.0)) * 180 / std::numbers::pi, kViewStepDeg, 1e-6);
  }
}

TEST(Partial, SphereKeepsAboutHalf) {
  const Mesh sphere = make_uv_sphere(0.4, 64, 32);
  const Camera cam = view_camera(0, 128);
  const auto r = render(sphere, cam);
  const PointCloud gt = sample_surface(sphere, 4000, 2);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto p = gt.point(i);
    visible += point_visible({p[0], p[1], p[2]}, sphere, cam, r);
  }
  // Cap seen from distance d: fraction (1 - R/d) / 2.
  const double want = (1 - 0.4 / kViewDistance) / 2;
  EXPECT_NEAR(static_cast<double>(visible) / 4000.0, want, 0.05);
}

TEST(Partial, ExactCountAndAllVisible) {
  const Mesh m = gen_shape(Category::kCar, 3);
  const Camera cam = view_camera(7, 64);
  const auto r = render(m, cam);
  const PointCloud gt = sample_surface(m, 1024, 4);
  for (std::size_t n : {32u, 2048u}) {
    const PointCloud part = make_partial(gt, m, cam, r, n, 6);
    ASSERT_EQ(part.size(), n);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto p = part.point(i);
      EXPECT_TRUE(point_visible({p[0], p[1], p[2]}, m, cam, r));
    }
  }
}

// ---- io

TEST(Io, CloudRoundTripIsBitwise) {
  const PointCloud pc = sample_surface(gen_shape(Category::kLamp, 1), 300, 2);
  EXPECT_EQ(parse_xyz(format_xyz(pc, "# header"), "mem"), pc);
}

TEST(Io, ImageRoundTripWithin8Bits) {
  Image img = render(gen_shape(Category::kTable, 1), view_camera(3, 24)).image;
  const Image back = decode_ppm(encode_ppm(img), "mem");
  ASSERT_EQ(back.rgb.size(), img.rgb.size());
  for (std::size_t i = 0; i < img.rgb.size(); ++i) EXPECT_LE(std::abs(back.rgb[i] - img.rgb[i]), 1.0f / 255);
  quantize(img);
  EXPECT_EQ(decode_ppm(encode_ppm(img), "mem"), img);
}

TEST(Io, CameraRoundTrip) {
  const Camera cam = view_camera(11, 64);
  EXPECT_EQ(parse_camera(format_camera(cam), "mem"), cam);
}

TEST(Io, ParseErrorsCarryLineAndColumn) {
  try {
    parse_xyz("0 0 0\n1 2 x\n", "cloud.xyz");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 5u);
    EXPECT_EQ(e.source(), "cloud.xyz");
  }
  EXPECT_THROW(parse_xyz("1 2\n", "short"), ParseError);
  EXPECT_THROW(parse_xyz("1 2 nan\n", "nan"), ParseError);
  EXPECT_THROW(decode_ppm("P5\n1 1\n255\nx", "gray"), std::exception);
}

// ---- dataset

TEST(Dataset, GenerationIsByteReproducible) {
  const DataConfig cfg = small_data();
  const auto a = temp_dir("csdn_data_a"), b = temp_dir("csdn_data_b");
  write_dataset(a, generate_dataset(cfg), cfg);
  write_dataset(b, generate_dataset(cfg), cfg);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a);
    EXPECT_EQ(read_file(e.path()), read_file(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 1 + 8 * (1 + 3 * 3));
}

TEST(Dataset, ReadBackMatchesGenerated) {
  const DataConfig cfg = small_data();
  const auto dir = temp_dir("csdn_data_rt");
  auto objects = generate_dataset(cfg);
  write_dataset(dir, objects, cfg);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.size(), objects.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, objects[i].id);
    EXPECT_EQ(back[i].gt, objects[i].gt);
    ASSERT_EQ(back[i].views.size(), 3u);
    EXPECT_EQ(back[i].views[2].partial, objects[i].views[2].partial);
    EXPECT_EQ(back[i].views[2].camera, objects[i].views[2].camera);
    EXPECT_EQ(back[i].gt.size(), cfg.gt_points);
    EXPECT_EQ(back[i].views[0].partial.size(), cfg.partial_points);
  }
  EXPECT_EQ(read_dataset(dir, std::string("test")).size(), 4u);
}

TEST(Dataset, TestObjectsDoNotChangeTrainObjects) {
  DataConfig a = small_data(), b = small_data();
  b.test_per_category = 3;
  const auto x = generate_dataset(a), y = generate_dataset(b);
  EXPECT_EQ(x.front().gt, y.front().gt);
}

TEST(Dataset, MissingFileIsNamed) {
  const DataConfig cfg = small_data();
  const auto dir = temp_dir("csdn_data_missing");
  write_dataset(dir, generate_dataset(cfg), cfg);
  const auto victim = dir / "train" / "lamp" / "lamp_0000" / "view_1.img";
  std::filesystem::remove(victim);
  try {
    read_dataset(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.path(), victim);
    EXPECT_NE(std::string(e.what()).find("view_1.img"), std::string::npos);
  }
}

TEST(Dataset, MalformedManifestLineIsLocated) {
  const auto dir = temp_dir("csdn_data_bad");
  write_file(dir / "manifest.txt", "# header\ntrain table t0 0 a b c\n");
  try {
    read_dataset(dir);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Dataset, RejectsEmptyConfig) {
  DataConfig cfg = small_data();
  cfg.per_category = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
