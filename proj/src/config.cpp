// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/config.hpp"

#include <functional>
#include <stdexcept>

namespace csdn {

namespace {
struct VariantName {
  Variant v;
  std::string_view name;
};
constexpr VariantName kVariantNames[] = {
    {Variant::kFull, "full"},         {Variant::kNoIpadain, "no-ipadain"},
    {Variant::kSwapFeatures, "swap-features"}, {Variant::kNoLocal, "no-local"},
    {Variant::kNoGlobal, "no-global"}, {Variant::kSerial, "serial"},
    {Variant::kNoImage, "no-image"},  {Variant::kCoarseOnly, "coarse-only"},
};
}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& e : kVariantNames)
    if (e.v == v) return e.name;
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (const auto& e : kVariantNames)
    if (e.name == s) return e.v;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = [] {
    std::vector<Variant> out;
    for (const auto& e : kVariantNames) out.push_back(e.v);
    return out;
  }();
  return v;
}

VariantTraits traits(Variant v) {
  VariantTraits t;
  switch (v) {
    case Variant::kFull: break;
    case Variant::kNoIpadain: t.ipadain = false; break;
    case Variant::kSwapFeatures: t.swap = true; break;
    case Variant::kNoLocal: t.local = false; break;
    case Variant::kNoGlobal: t.global = false; break;
    case Variant::kSerial: t.serial = true; break;
    case Variant::kNoImage:
      t.ipadain = false;
      t.global = false;
      t.image = false;
      break;
    case Variant::kCoarseOnly:
      t.local = false;
      t.global = false;
      t.refine = false;
      break;
  }
  return t;
}

std::size_t ModelConfig::pyramid_channels() const {
  std::size_t s = 0;
  for (std::size_t i = 1; i < image_channels.size(); ++i) s += image_channels[i];
  return s;
}

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}
void require_positive(const std::vector<std::size_t>& v, const std::string& what) {
  for (auto x : v) require(x > 0, what + ": widths must be positive");
}
}  // namespace

void ModelConfig::validate() const {
  require(feature_dim >= 2, "model: feature_dim must be at least 2");
  require(input_points >= 1, "model: input_points must be positive");
  require(gt_points >= 1, "model: gt_points must be positive");
  require(image_size >= 1, "model: image_size must be positive");
  require(image_channels.size() == 5, "model: image_channels needs 5 entries (conv1..conv5)");
  require_positive(image_channels, "model.image_channels");
  require_positive(point_widths, "model.point_widths");
  require_positive(fold_widths, "model.fold_widths");
  require_positive(local_widths, "model.local_widths");
  require_positive(offset_widths, "model.offset_widths");
  require(surfaces >= 1, "model: surfaces must be positive");
  require(surface_points >= 1, "model: surface_points must be positive");
  require(refine_width >= 1, "model: refine_width must be positive");
  require(k_neighbors >= 1, "model: k_neighbors must be positive");
  require(k_neighbors <= input_points && k_neighbors <= coarse_points(),
          "model: k_neighbors=" + std::to_string(k_neighbors) + " exceeds min(input_points=" +
              std::to_string(input_points) + ", coarse_points=" +
              std::to_string(coarse_points()) + ")");
  require(ipadain_eps > 0.0, "model: ipadain_eps must be positive");
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "train: learning_rate must be positive");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "train: lr_decay must be in (0, 1]");
  require(lr_decay_every >= 1, "train: lr_decay_every must be positive");
  require(epochs >= 1, "train: epochs must be positive");
  require(alpha_start < alpha_end, "train: alpha_start must be below alpha_end");
  require(alpha_start >= 0.0, "train: alpha_start must be non-negative");
  require(alpha_ramp_iters > 0, "train: alpha_ramp_iters must be positive");
  require(batch_size >= 1, "train: batch_size must be positive");
  require(precision == 32 || precision == 64, "train: precision must be 32 or 64");
  require(fscore_tau > 0.0, "train: fscore_tau must be positive");
}

std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::kFull: return "full";
    case Preset::kDesk: return "desk";
    case Preset::kMicro: return "micro";
  }
  return "?";
}

Preset parse_preset(std::string_view s) {
  if (s == "full") return Preset::kFull;
  if (s == "desk") return Preset::kDesk;
  if (s == "micro") return Preset::kMicro;
  throw std::invalid_argument("unknown preset '" + std::string(s) + "' (full, desk, micro)");
}

RunConfig preset_config(Preset p) {
  RunConfig c;
  c.preset = p;
  switch (p) {
    case Preset::kFull:
      break;
    case Preset::kDesk:
      c.model.feature_dim = 128;
      c.model.input_points = 512;
      c.model.gt_points = 512;
      c.model.image_size = 64;
      c.model.surface_points = 128;
      c.model.refine_width = 128;
      c.train.batch_size = 4;
      c.train.learning_rate = 1e-3;
      c.train.lr_decay_every = 1000;
      c.train.alpha_ramp_iters = 1000;
      c.train.checkpoint_every = 50;
      break;
    case Preset::kMicro:
      c.model.feature_dim = 16;
      c.model.input_points = 16;
      c.model.gt_points = 16;
      c.model.image_size = 16;
      c.model.point_widths = {4, 4, 4, 8};
      c.model.image_channels = {2, 3, 3, 4, 4};
      c.model.surfaces = 2;
      c.model.surface_points = 4;
      c.model.fold_widths = {6, 5};
      c.model.local_widths = {4, 6};
      c.model.refine_width = 8;
      c.model.offset_widths = {6, 5, 4};
      c.model.k_neighbors = 2;
      c.train.batch_size = 2;
      c.train.learning_rate = 1e-3;
      c.train.lr_decay_every = 1000;
      c.train.alpha_ramp_iters = 100;
      break;
  }
  return c;
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t to_size(const std::string& s) {
  std::uint64_t v;
  if (!parse_uint(s, v)) throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

double to_double(const std::string& s) {
  double v;
  if (!parse_double(s, v)) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_list(const std::string& s) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (auto part : split(s, ',')) out.push_back(to_size(std::string(part)));
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SIZE_FIELD(sec, name)                                                    \
  Field {                                                                        \
    #sec "." #name, [](const RunConfig& c) { return std::to_string(c.sec.name); }, \
        [](RunConfig& c, const std::string& v) { c.sec.name = to_size(v); }      \
  }
#define DOUBLE_FIELD(sec, name)                                                   \
  Field {                                                                         \
    #sec "." #name, [](const RunConfig& c) { return format_number(c.sec.name); }, \
        [](RunConfig& c, const std::string& v) { c.sec.name = to_double(v); }     \
  }
#define LIST_FIELD(sec, name)                                                   \
  Field {                                                                       \
    #sec "." #name, [](const RunConfig& c) { return join(c.sec.name); },        \
        [](RunConfig& c, const std::string& v) { c.sec.name = to_list(v); }     \
  }
#define BOOL_FIELD(sec, name)                                                          \
  Field {                                                                              \
    #sec "." #name, [](const RunConfig& c) { return std::string(c.sec.name ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.sec.name = to_bool(v); }            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SIZE_FIELD(model, feature_dim),
      SIZE_FIELD(model, input_points),
      SIZE_FIELD(model, gt_points),
      SIZE_FIELD(model, image_size),
      LIST_FIELD(model, point_widths),
      LIST_FIELD(model, image_channels),
      SIZE_FIELD(model, surfaces),
      SIZE_FIELD(model, surface_points),
      LIST_FIELD(model, fold_widths),
      LIST_FIELD(model, local_widths),
      SIZE_FIELD(model, refine_width),
      LIST_FIELD(model, offset_widths),
      SIZE_FIELD(model, k_neighbors),
      DOUBLE_FIELD(model, ipadain_eps),
      Field{"model.variant", [](const RunConfig& c) { return std::string(to_string(c.model.variant)); },
            [](RunConfig& c, const std::string& v) { c.model.variant = parse_variant(v); }},
      DOUBLE_FIELD(train, learning_rate),
      DOUBLE_FIELD(train, lr_decay),
      SIZE_FIELD(train, lr_decay_every),
      SIZE_FIELD(train, epochs),
      SIZE_FIELD(train, max_iters),
      DOUBLE_FIELD(train, alpha_start),
      DOUBLE_FIELD(train, alpha_end),
      SIZE_FIELD(train, alpha_ramp_iters),
      SIZE_FIELD(train, batch_size),
      Field{"train.seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& v) {
              std::uint64_t s;
              if (!parse_uint(v, s)) throw std::invalid_argument("expected an integer seed, got '" + v + "'");
              c.train.seed = s;
            }},
      Field{"train.precision", [](const RunConfig& c) { return std::to_string(c.train.precision); },
            [](RunConfig& c, const std::string& v) { c.train.precision = static_cast<int>(to_size(v)); }},
      BOOL_FIELD(train, deterministic),
      SIZE_FIELD(train, threads),
      SIZE_FIELD(train, checkpoint_every),
      Field{"train.report_chamfer",
            [](const RunConfig& c) { return std::string(to_string(c.train.report_chamfer)); },
            [](RunConfig& c, const std::string& v) { c.train.report_chamfer = parse_chamfer_variant(v); }},
      DOUBLE_FIELD(train, fscore_tau),
  };
  return f;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef LIST_FIELD
#undef BOOL_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace

KeyValueText to_text(const RunConfig& cfg) {
  KeyValueText kv;
  kv.set("preset", std::string(to_string(cfg.preset)));
  for (const auto& f : fields()) kv.set(f.key, f.get(cfg));
  return kv;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "preset") {
    cfg.preset = parse_preset(value);
    return;
  }
  const Field* f = find_field(key);
  if (!f) throw std::invalid_argument("unknown config key '" + key + "'");
  f->set(cfg, value);
}

RunConfig from_text(const KeyValueText& kv, const std::string& source) {
  RunConfig cfg;
  if (kv.contains("preset")) {
    try {
      cfg = preset_config(parse_preset(kv.get("preset")));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, kv.line_of("preset"), 1, e.what());
    }
  }
  for (const auto& [key, value] : kv.values()) {
    if (key == "preset") continue;
    try {
      apply_override(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, kv.line_of(key), 1, key + ": " + e.what());
    }
  }
  return cfg;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  KeyValueText kv;
  for (const auto& f : fields()) kv.set(f.key, f.get(cfg));
  return fnv1a(kv.str());
}

}  // namespace csdn
