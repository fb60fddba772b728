// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "csdn/geometry.hpp"
#include "csdn/render.hpp"

namespace csdn {

/// Whole-file helpers; failures throw std::runtime_error naming the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

/// "x y z" per line, shortest round-trip decimal; '#' lines are comments.
std::string format_xyz(const PointCloud& cloud, const std::string& header = {});
PointCloud parse_xyz(const std::string& text, const std::string& source);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud,
               const std::string& header = {});
PointCloud read_xyz(const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255). Values are rounded to the nearest 1/255.
std::string encode_ppm(const Image& image);
Image decode_ppm(const std::string& bytes, const std::string& source);
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);
/// Rounds every channel to the nearest multiple of 1/255.
void quantize(Image& image);

/// Lines: rotation (9 values, row-major), translation (3), focal (fx fy),
/// principal (cx cy), image_size (H W).
std::string format_camera(const Camera& camera);
Camera parse_camera(const std::string& text, const std::string& source);
void write_camera(const std::filesystem::path& path, const Camera& camera);
Camera read_camera(const std::filesystem::path& path);

}  // namespace csdn
