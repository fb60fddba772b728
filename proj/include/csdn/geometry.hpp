// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "csdn/autodiff.hpp"
#include "csdn/tensor.hpp"

namespace csdn {

/// Ordered set of 3-D points in object space, stored as packed xyz triples.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<float> xyz);

  template <typename T>
  static PointCloud from_tensor(const Tensor<T>& points);
  template <typename T>
  Tensor<T> to_tensor() const;

  std::size_t size() const noexcept { return xyz_.size() / 3; }
  bool empty() const noexcept { return xyz_.empty(); }
  std::array<float, 3> point(std::size_t i) const {
    return {xyz_[3 * i], xyz_[3 * i + 1], xyz_[3 * i + 2]};
  }
  std::span<const float> xyz() const noexcept { return xyz_; }
  std::vector<float>& storage() noexcept { return xyz_; }

  /// Throws unless the cloud is non-empty and every coordinate is finite.
  void validate(std::string_view what) const;

  bool operator==(const PointCloud&) const = default;

 private:
  std::vector<float> xyz_;
};

enum class ChamferVariant { kL2, kSquaredL2 };

std::string_view to_string(ChamferVariant v);
ChamferVariant parse_chamfer_variant(std::string_view s);

/// Row-major [num_queries x k] neighbor table.
struct KnnTable {
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;

  std::span<const std::uint32_t> row(std::size_t i) const {
    return std::span<const std::uint32_t>(indices).subspan(i * k, k);
  }
  std::size_t rows() const { return k ? indices.size() / k : 0; }
};

/// k nearest reference points for every query point by Euclidean distance,
/// ascending; equal distances resolve to the lower reference index.
template <typename T>
KnnTable knn(std::span<const T> query, std::span<const T> reference, std::size_t k);

/// Symmetric Chamfer distance: mean nearest distance from X to Y plus the
/// mean from Y to X, with plain or squared Euclidean distance.
template <typename T>
double chamfer(std::span<const T> x, std::span<const T> y, ChamferVariant variant);

/// Harmonic mean of precision and recall at distance threshold tau.
template <typename T>
double f_score(std::span<const T> pred, std::span<const T> gt, double tau);

struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  std::size_t height = 1, width = 1;

  /// Camera at `eye` looking at `target`; image x right, y down, z forward.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal, std::size_t height,
                        std::size_t width);

  /// Throws if the rotation is not orthonormal within 1e-6 or sizes are zero.
  void validate() const;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  bool operator==(const Camera&) const = default;
};

inline constexpr double kMinDepth = 1e-6;

/// Pixel coordinates of projected points; rows with valid == 0 lie at or
/// behind the camera plane and carry no meaningful coordinate.
struct Projection {
  std::vector<double> uv;
  std::vector<std::uint8_t> valid;
};

template <typename T>
Projection project(std::span<const T> points, const Camera& camera);

namespace ad {
/// Differentiable Chamfer distance with matches held constant in backward.
template <typename T>
Var<T> chamfer(Var<T> x, Var<T> y, ChamferVariant variant);
}  // namespace ad

}  // namespace csdn
