// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csdn/geometry.hpp"
#include "csdn/mesh.hpp"
#include "csdn/render.hpp"

namespace csdn {

inline constexpr int kGeneratorVersion = 2;
// Partial clouds are drawn from the gt cloud, or from a pool this dense when
// the gt cloud is smaller.
inline constexpr std::size_t kPartialPoolPoints = 2048;

struct View {
  std::size_t id = 0;
  PointCloud partial;
  Image image;
  Camera camera;
};

/// One object with its complete cloud and all of its rendered views.
struct ObjectRecord {
  std::string split;
  std::string category;
  std::string id;
  PointCloud gt;
  std::vector<View> views;
};

/// One training/eval pairing of a view with its object.
struct Sample {
  const ObjectRecord* object = nullptr;
  const View* view = nullptr;
};

struct DataConfig {
  std::vector<Category> categories = all_categories();
  std::size_t per_category = 8;       // train objects per category
  std::size_t test_per_category = 0;  // held-out objects per category
  std::uint64_t seed = 0;
  std::size_t gt_points = 2048;
  std::size_t partial_points = 2048;
  std::size_t image_size = 224;
  std::size_t views = kViewCount;

  void validate() const;
};

/// Seed of object `index` in `category`; train objects come first, so adding
/// test objects never changes them.
std::uint64_t object_seed(std::uint64_t seed, Category category, std::size_t index);

ObjectRecord generate_object(const DataConfig& cfg, Category category, std::size_t index,
                             const std::string& split);
std::vector<ObjectRecord> generate_dataset(const DataConfig& cfg);

/// Missing or malformed dataset content.
class DataError : public std::runtime_error {
 public:
  DataError(const std::filesystem::path& path, const std::string& record, const std::string& what);
  const std::filesystem::path& path() const noexcept { return path_; }
  const std::string& record() const noexcept { return record_; }

 private:
  std::filesystem::path path_;
  std::string record_;
};

/// `<root>/<split>/<category>/<id>/...` plus `<root>/manifest.txt`.
void write_dataset(const std::filesystem::path& root, const std::vector<ObjectRecord>& objects,
                   const DataConfig& cfg);
/// Reads every record of the manifest, optionally restricted to one split.
std::vector<ObjectRecord> read_dataset(const std::filesystem::path& root,
                                       const std::optional<std::string>& split = std::nullopt);

}  // namespace csdn
