// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "csdn/geometry.hpp"

namespace csdn {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  double face_area(std::size_t f) const;
  Eigen::Vector3d face_normal(std::size_t f) const;  // unit, zero for degenerate faces
  void append(const Mesh& other);
  /// Removes faces with area <= tol.
  void drop_degenerate(double tol);
  /// Centers the bounding box at the origin and scales the longest side to `extent`.
  void normalize(double extent);
};

/// Procedural stand-ins for four object classes.
enum class Category { kTable, kChair, kLamp, kCar };

std::string_view to_string(Category c);
/// Accepts the class name or the family name (box-composite, extrusion,
/// lathe, hull-blend).
Category parse_category(std::string_view s);
const std::vector<Category>& all_categories();

inline constexpr double kShapeExtent = 0.98;
inline constexpr double kDegenerateArea = 1e-10;

/// Deterministic per (category, seed); fits [-0.49, 0.49]^3.
Mesh gen_shape(Category category, std::uint64_t seed);

Mesh make_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);
Mesh make_uv_sphere(double radius, std::size_t slices, std::size_t stacks);
/// Ear-clipping triangulation of a simple polygon given counter-clockwise or
/// clockwise; returns index triples into `polygon`.
std::vector<std::array<std::uint32_t, 3>> triangulate_polygon(
    const std::vector<Eigen::Vector2d>& polygon);

/// Area-weighted triangle choice, then uniform barycentric position.
PointCloud sample_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

}  // namespace csdn
