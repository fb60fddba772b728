// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "csdn/geometry.hpp"
#include "csdn/mesh.hpp"
#include "csdn/tensor.hpp"

namespace csdn {

/// 8-bit-representable RGB raster, HWC, values in [0, 1].
struct Image {
  std::size_t height = 0, width = 0;
  std::vector<float> rgb;

  float at(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  template <typename T>
  Tensor<T> to_tensor() const {
    return Tensor<T>({height, width, 3}, std::vector<T>(rgb.begin(), rgb.end()));
  }
  bool operator==(const Image&) const = default;
};

inline constexpr std::size_t kViewCount = 24;
inline constexpr double kViewElevationDeg = 25.0;
inline constexpr double kViewStepDeg = 15.0;
inline constexpr double kViewDistance = 1.6;
inline constexpr double kViewFovDeg = 65.0;
inline constexpr double kVisibilityEps = 1e-3;
inline constexpr std::size_t kMinVisiblePoints = 16;

/// Azimuths 0, 15, ..., 345 degrees at fixed elevation, looking at the origin.
std::vector<Camera> view_cameras(std::size_t image_size);
Camera view_camera(std::size_t view, std::size_t image_size);

struct RenderResult {
  Image image;
  std::vector<double> depth;         // camera-frame z per pixel, +inf on background
  std::vector<std::int32_t> face_id;  // -1 on background
  // Faces whose projected bounding box touches each pixel cell [x, x+1) x [y, y+1).
  std::vector<std::vector<std::int32_t>> cell_faces;

  bool covered(std::size_t y, std::size_t x) const { return face_id[y * image.width + x] >= 0; }
};

/// Z-buffer rasterization sampled at pixel centers, flat Lambertian shading
/// from a headlight at the camera, white background. Base color per call.
RenderResult render(const Mesh& mesh, const Camera& camera,
                    const std::array<float, 3>& color = {0.55f, 0.6f, 0.75f});

/// Visibility rule shared by make_partial and its checks: the point projects
/// inside the image and the nearest surface along the point's own ray (the
/// z-buffer depth at its exact image position) is within kVisibilityEps of the
/// point's depth.
bool point_visible(const Eigen::Vector3d& point, const Mesh& mesh, const Camera& camera,
                   const RenderResult& r);

/// Visible gt points, subsampled without replacement or padded by sampling
/// with replacement to exactly n.
PointCloud make_partial(const PointCloud& gt, const Mesh& mesh, const Camera& camera,
                        const RenderResult& r, std::size_t n, std::uint64_t seed);

}  // namespace csdn
