// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/data.hpp"

#include <cstdio>
#include <map>

#include "csdn/io.hpp"
#include "csdn/random.hpp"
#include "csdn/text.hpp"

namespace csdn {

void DataConfig::validate() const {
  if (categories.empty()) throw std::invalid_argument("data: no categories");
  if (per_category == 0) throw std::invalid_argument("data: per_category must be positive");
  if (gt_points == 0 || partial_points == 0) throw std::invalid_argument("data: point counts must be positive");
  if (image_size == 0) throw std::invalid_argument("data: image_size must be positive");
  if (views == 0 || views > kViewCount) {
    throw std::invalid_argument("data: views must be in 1.." + std::to_string(kViewCount));
  }
}

std::uint64_t object_seed(std::uint64_t seed, Category category, std::size_t index) {
  return derive_seed(derive_seed(seed, 1000 + static_cast<std::uint64_t>(category)), index);
}

namespace {

std::array<float, 3> category_color(Category c) {
  switch (c) {
    case Category::kTable: return {0.72f, 0.52f, 0.32f};
    case Category::kChair: return {0.35f, 0.55f, 0.75f};
    case Category::kLamp: return {0.85f, 0.75f, 0.35f};
    case Category::kCar: return {0.75f, 0.3f, 0.3f};
  }
  return {0.5f, 0.5f, 0.5f};
}

std::string object_id(Category c, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu", std::string(to_string(c)).c_str(), index);
  return buf;
}

}  // namespace

ObjectRecord generate_object(const DataConfig& cfg, Category category, std::size_t index,
                             const std::string& split) {
  const std::uint64_t seed = object_seed(cfg.seed, category, index);
  const Mesh mesh = gen_shape(category, seed);
  ObjectRecord o;
  o.split = split;
  o.category = std::string(to_string(category));
  o.id = object_id(category, index);
  o.gt = sample_surface(mesh, cfg.gt_points, derive_seed(seed, 1));
  // Small gt clouds cannot supply kMinVisiblePoints from most views.
  const PointCloud pool =
      cfg.gt_points >= kPartialPoolPoints ? o.gt : sample_surface(mesh, kPartialPoolPoints, derive_seed(seed, 2));
  for (std::size_t v = 0; v < cfg.views; ++v) {
    View view;
    view.id = v;
    view.camera = view_camera(v, cfg.image_size);
    const RenderResult r = render(mesh, view.camera, category_color(category));
    try {
      view.partial = make_partial(pool, mesh, view.camera, r, cfg.partial_points, derive_seed(seed, 100 + v));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(o.id + " view " + std::to_string(v) + ": " + e.what());
    }
    view.image = r.image;
    o.views.push_back(std::move(view));
  }
  return o;
}

std::vector<ObjectRecord> generate_dataset(const DataConfig& cfg) {
  cfg.validate();
  std::vector<ObjectRecord> out;
  for (const auto& [split, offset, count] :
       {std::tuple<std::string, std::size_t, std::size_t>{"train", 0, cfg.per_category},
        {"test", cfg.per_category, cfg.test_per_category}}) {
    for (Category c : cfg.categories) {
      for (std::size_t i = 0; i < count; ++i) out.push_back(generate_object(cfg, c, offset + i, split));
    }
  }
  return out;
}

DataError::DataError(const std::filesystem::path& path, const std::string& record, const std::string& what)
    : std::runtime_error(path.string() + (record.empty() ? "" : " [" + record + "]") + ": " + what),
      path_(path),
      record_(record) {}

namespace {

std::filesystem::path object_dir(const ObjectRecord& o) {
  return std::filesystem::path(o.split) / o.category / o.id;
}

std::string manifest_header(const DataConfig& cfg) {
  std::string cats;
  for (Category c : cfg.categories) cats += (cats.empty() ? "" : ",") + std::string(to_string(c));
  const std::string fields = "generator=" + std::to_string(kGeneratorVersion) + " categories=" + cats +
                             " gt_points=" + std::to_string(cfg.gt_points) +
                             " partial_points=" + std::to_string(cfg.partial_points) +
                             " image_size=" + std::to_string(cfg.image_size) +
                             " views=" + std::to_string(cfg.views);
  return "# csdn " CSDN_VERSION " dataset config=" + hex64(fnv1a(fields)) + " seed=" + std::to_string(cfg.seed) +
         " " + fields + "\n# split category id view partial image camera gt\n";
}

}  // namespace

void write_dataset(const std::filesystem::path& root, const std::vector<ObjectRecord>& objects,
                   const DataConfig& cfg) {
  std::string manifest = manifest_header(cfg);
  for (const auto& o : objects) {
    const auto dir = object_dir(o);
    write_xyz(root / dir / "gt.xyz", o.gt);
    for (const auto& v : o.views) {
      const std::string s = std::to_string(v.id);
      const auto partial = dir / ("partial_" + s + ".xyz");
      const auto image = dir / ("view_" + s + ".img");
      const auto camera = dir / ("cam_" + s + ".txt");
      write_xyz(root / partial, v.partial);
      write_image(root / image, v.image);
      write_camera(root / camera, v.camera);
      manifest += o.split + " " + o.category + " " + o.id + " " + s + " " + partial.generic_string() +
                  " " + image.generic_string() + " " + camera.generic_string() + " " +
                  (dir / "gt.xyz").generic_string() + "\n";
    }
  }
  write_file(root / "manifest.txt", manifest);
}

std::vector<ObjectRecord> read_dataset(const std::filesystem::path& root,
                                       const std::optional<std::string>& split) {
  const auto manifest_path = root / "manifest.txt";
  if (!std::filesystem::exists(manifest_path)) throw DataError(manifest_path, "", "manifest not found");
  const std::string text = read_file(manifest_path);
  std::vector<ObjectRecord> out;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    ++line_no;
    const auto line = trim(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> f;
    for (auto part : split_ws(line)) f.emplace_back(part);
    if (f.size() != 8) {
      throw ParseError(manifest_path.string(), line_no, 1,
                       "expected 8 fields, found " + std::to_string(f.size()));
    }
    if (split && f[0] != *split) continue;
    std::uint64_t view_id;
    if (!parse_uint(f[3], view_id)) throw ParseError(manifest_path.string(), line_no, 1, "invalid view id '" + f[3] + "'");
    const std::string record = f[0] + "/" + f[1] + "/" + f[2] + "#" + f[3];
    auto load = [&](const std::string& rel, auto&& reader) {
      const auto path = root / rel;
      if (!std::filesystem::exists(path)) throw DataError(path, record, "missing file");
      try {
        return reader(path);
      } catch (const DataError&) {
        throw;
      } catch (const std::exception& e) {
        throw DataError(path, record, e.what());
      }
    };
    const std::string key = f[0] + "/" + f[1] + "/" + f[2];
    auto it = index.find(key);
    if (it == index.end()) {
      ObjectRecord o;
      o.split = f[0];
      o.category = f[1];
      o.id = f[2];
      o.gt = load(f[7], [](const auto& p) { return read_xyz(p); });
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(o));
    }
    View v;
    v.id = view_id;
    v.partial = load(f[4], [](const auto& p) { return read_xyz(p); });
    v.image = load(f[5], [](const auto& p) { return read_image(p); });
    v.camera = load(f[6], [](const auto& p) { return read_camera(p); });
    out[it->second].views.push_back(std::move(v));
  }
  return out;
}

}  // namespace csdn
