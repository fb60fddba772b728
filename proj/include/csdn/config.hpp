// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csdn/geometry.hpp"
#include "csdn/text.hpp"

namespace csdn {

/// Architecture variant; the ablation rows A-G plus the full model.
enum class Variant {
  kFull,
  kNoIpadain,     // A
  kSwapFeatures,  // B
  kNoLocal,       // C
  kNoGlobal,      // D
  kSerial,        // E
  kNoImage,       // F
  kCoarseOnly,    // G
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
const std::vector<Variant>& all_variants();

/// What a variant wires up.
struct VariantTraits {
  bool ipadain = true;     // style from a global feature; otherwise learned affine
  bool swap = false;       // F_I folds, F_p styles
  bool local = true;
  bool global = true;
  bool serial = false;
  bool image = true;       // image encoder runs at all
  bool refine = true;      // offsets are regressed
};
VariantTraits traits(Variant v);

struct ModelConfig {
  std::size_t feature_dim = 1024;  // C
  std::size_t input_points = 2048;  // N, partial cloud size
  std::size_t gt_points = 2048;
  std::size_t image_size = 224;
  std::vector<std::size_t> point_widths{64, 64, 64, 128};  // hidden widths before C
  std::vector<std::size_t> image_channels{32, 64, 128, 256, 512};  // conv1..conv5
  std::size_t surfaces = 4;          // M
  std::size_t surface_points = 512;  // N_r'
  std::vector<std::size_t> fold_widths{256, 128};
  std::vector<std::size_t> local_widths{32, 128};
  std::size_t refine_width = 512;
  std::vector<std::size_t> offset_widths{256, 128, 32};
  std::size_t k_neighbors = 16;
  double ipadain_eps = 1e-5;
  Variant variant = Variant::kFull;

  std::size_t coarse_points() const { return surfaces * surface_points; }
  std::size_t pyramid_channels() const;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 5e-5;
  double lr_decay = 0.1;
  std::size_t lr_decay_every = 10;  // epochs
  std::size_t epochs = 50;
  std::size_t max_iters = 0;        // 0: no cap
  double alpha_start = 0.01;
  double alpha_end = 2.0;
  std::size_t alpha_ramp_iters = 30000;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  int precision = 32;
  bool deterministic = false;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::size_t checkpoint_every = 1;  // epochs between latest.ckpt writes; 0: final only
  ChamferVariant report_chamfer = ChamferVariant::kL2;
  double fscore_tau = 0.001;

  void validate() const;
};

enum class Preset { kFull, kDesk, kMicro };
std::string_view to_string(Preset p);
Preset parse_preset(std::string_view s);

struct RunConfig {
  Preset preset = Preset::kFull;
  ModelConfig model;
  TrainConfig train;
};

RunConfig preset_config(Preset p);

/// "[model]" and "[train]" sections, every field written explicitly.
KeyValueText to_text(const RunConfig& cfg);
/// Starts from the named preset ("model.preset"/"preset" key, default full)
/// and applies every key present. Unknown keys and bad values throw
/// ParseError with the line they came from.
RunConfig from_text(const KeyValueText& kv, const std::string& source);
/// Applies one "section.key" override on top of an existing config.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

/// FNV-1a over the canonical model+train text.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace csdn
