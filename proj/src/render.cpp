// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "csdn/random.hpp"

namespace csdn {

using Eigen::Vector3d;

Camera view_camera(std::size_t view, std::size_t image_size) {
  const double deg = std::numbers::pi / 180.0;
  const double az = kViewStepDeg * static_cast<double>(view) * deg;
  const double el = kViewElevationDeg * deg;
  const Vector3d eye = kViewDistance * Vector3d(std::cos(el) * std::sin(az), std::sin(el),
                                                std::cos(el) * std::cos(az));
  const double focal = 0.5 * static_cast<double>(image_size) / std::tan(0.5 * kViewFovDeg * deg);
  return Camera::look_at(eye, Vector3d::Zero(), Vector3d::UnitY(), focal, image_size, image_size);
}

std::vector<Camera> view_cameras(std::size_t image_size) {
  std::vector<Camera> out;
  for (std::size_t v = 0; v < kViewCount; ++v) out.push_back(view_camera(v, image_size));
  return out;
}

RenderResult render(const Mesh& mesh, const Camera& camera, const std::array<float, 3>& color) {
  camera.validate();
  const std::size_t h = camera.height, w = camera.width;
  RenderResult r;
  r.image.height = h;
  r.image.width = w;
  r.image.rgb.assign(h * w * 3, 1.0f);
  r.depth.assign(h * w, std::numeric_limits<double>::infinity());
  r.face_id.assign(h * w, -1);
  r.cell_faces.assign(h * w, {});

  std::vector<Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = camera.to_camera(mesh.vertices[i]);

  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Vector3d* p[3] = {&cam[t[0]], &cam[t[1]], &cam[t[2]]};
    if (p[0]->z() <= kMinDepth || p[1]->z() <= kMinDepth || p[2]->z() <= kMinDepth) continue;
    double u[3], v[3];
    for (int k = 0; k < 3; ++k) {
      u[k] = camera.fx * p[k]->x() / p[k]->z() + camera.cx;
      v[k] = camera.fy * p[k]->y() / p[k]->z() + camera.cy;
    }
    const double area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0]);
    if (area == 0.0) continue;
    const double lo_u = std::min({u[0], u[1], u[2]}), hi_u = std::max({u[0], u[1], u[2]});
    const double lo_v = std::min({v[0], v[1], v[2]}), hi_v = std::max({v[0], v[1], v[2]});
    const auto x0 = static_cast<long>(std::max(0.0, std::ceil(lo_u)));
    const auto x1 = static_cast<long>(std::min(static_cast<double>(w) - 1.0, std::floor(hi_u)));
    const auto y0 = static_cast<long>(std::max(0.0, std::ceil(lo_v)));
    const auto y1 = static_cast<long>(std::min(static_cast<double>(h) - 1.0, std::floor(hi_v)));
    const auto cx0 = static_cast<long>(std::max(0.0, std::floor(lo_u) - 1.0));
    const auto cx1 = static_cast<long>(std::min(static_cast<double>(w) - 1.0, std::floor(hi_u)));
    const auto cy0 = static_cast<long>(std::max(0.0, std::floor(lo_v) - 1.0));
    const auto cy1 = static_cast<long>(std::min(static_cast<double>(h) - 1.0, std::floor(hi_v)));
    for (long y = cy0; y <= cy1; ++y) {
      for (long x = cx0; x <= cx1; ++x) r.cell_faces[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)].push_back(static_cast<std::int32_t>(f));
    }
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y);
        double b[3];
        for (int k = 0; k < 3; ++k) {
          const int i = (k + 1) % 3, j = (k + 2) % 3;
          b[k] = ((u[j] - u[i]) * (py - v[i]) - (px - u[i]) * (v[j] - v[i])) / area;
        }
        if (b[0] < 0.0 || b[1] < 0.0 || b[2] < 0.0) continue;
        const double inv_z = b[0] / p[0]->z() + b[1] / p[1]->z() + b[2] / p[2]->z();
        const double z = 1.0 / inv_z;
        const std::size_t pix = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
        if (z < r.depth[pix]) {
          r.depth[pix] = z;
          r.face_id[pix] = static_cast<std::int32_t>(f);
        }
      }
    }
  }

  for (std::size_t pix = 0; pix < h * w; ++pix) {
    const auto f = r.face_id[pix];
    if (f < 0) continue;
    const auto& t = mesh.faces[static_cast<std::size_t>(f)];
    const Vector3d n = camera.rotation * mesh.face_normal(static_cast<std::size_t>(f));
    const Vector3d centroid = (cam[t[0]] + cam[t[1]] + cam[t[2]]) / 3.0;
    const double lambert = std::abs(n.dot(-centroid.normalized()));
    const double shade = 0.15 + 0.85 * lambert;
    for (int c = 0; c < 3; ++c) {
      const double value = std::clamp(static_cast<double>(color[c]) * shade, 0.0, 1.0);
      r.image.rgb[pix * 3 + c] = static_cast<float>(std::round(value * 255.0) / 255.0);
    }
  }
  return r;
}

namespace {

// Depth (camera z) where the ray through `pc` meets face f, if it does.
bool ray_hit(const Mesh& mesh, const Camera& camera, std::size_t f, const Vector3d& pc,
             double& depth) {
  const auto& t = mesh.faces[f];
  const Vector3d a = camera.to_camera(mesh.vertices[t[0]]);
  const Vector3d b = camera.to_camera(mesh.vertices[t[1]]);
  const Vector3d c = camera.to_camera(mesh.vertices[t[2]]);
  const Vector3d dir = pc / pc.z();
  const Vector3d e1 = b - a, e2 = c - a;
  const Vector3d q = dir.cross(e2);
  const double det = e1.dot(q);
  if (std::abs(det) < 1e-14) return false;
  const Vector3d s = -a;
  const double u = s.dot(q) / det;
  const Vector3d r = s.cross(e1);
  const double v = dir.dot(r) / det;
  constexpr double tol = 1e-7;
  if (u < -tol || v < -tol || u + v > 1.0 + tol) return false;
  depth = e2.dot(r) / det;  // dir has unit z, so the ray parameter is the depth
  return depth > kMinDepth;
}

}  // namespace

bool point_visible(const Vector3d& point, const Mesh& mesh, const Camera& camera,
                   const RenderResult& r) {
  const Vector3d pc = camera.to_camera(point);
  if (pc.z() <= kMinDepth) return false;
  const double u = camera.fx * pc.x() / pc.z() + camera.cx;
  const double v = camera.fy * pc.y() / pc.z() + camera.cy;
  const auto w = static_cast<long>(camera.width), h = static_cast<long>(camera.height);
  if (std::lround(u) < 0 || std::lround(v) < 0 || std::lround(u) >= w || std::lround(v) >= h) return false;
  const long x = std::clamp(static_cast<long>(std::floor(u)), 0L, w - 1);
  const long y = std::clamp(static_cast<long>(std::floor(v)), 0L, h - 1);
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto f : r.cell_faces[static_cast<std::size_t>(y * w + x)]) {
    double depth;
    if (ray_hit(mesh, camera, static_cast<std::size_t>(f), pc, depth)) nearest = std::min(nearest, depth);
  }
  return std::abs(nearest - pc.z()) <= kVisibilityEps;
}

PointCloud make_partial(const PointCloud& gt, const Mesh& mesh, const Camera& camera,
                        const RenderResult& r, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> visible;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto p = gt.point(i);
    if (point_visible(Vector3d(p[0], p[1], p[2]), mesh, camera, r)) visible.push_back(i);
  }
  if (visible.size() < kMinVisiblePoints) {
    throw std::runtime_error("make_partial: only " + std::to_string(visible.size()) +
                             " visible points (need " + std::to_string(kMinVisiblePoints) + ")");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (visible.size() >= n) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.below(visible.size() - i);
      std::swap(visible[i], visible[j]);
    }
    chosen.assign(visible.begin(), visible.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    chosen = visible;
    while (chosen.size() < n) chosen.push_back(visible[rng.below(visible.size())]);
  }
  std::vector<float> xyz;
  xyz.reserve(3 * n);
  for (auto i : chosen) {
    const auto p = gt.point(i);
    xyz.insert(xyz.end(), p.begin(), p.end());
  }
  return PointCloud(std::move(xyz));
}

}  // namespace csdn
