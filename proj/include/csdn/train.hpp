// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "csdn/config.hpp"
#include "csdn/data.hpp"
#include "csdn/model.hpp"

namespace csdn {

/// CD(P_0, gt) + alpha * CD(P_out, gt), both with plain Euclidean distance.
template <typename T>
ad::Var<T> completion_loss(ad::Var<T> coarse, ad::Var<T> out, ad::Var<T> gt, double alpha);

/// Linear ramp alpha_start -> alpha_end over alpha_ramp_iters, then constant.
double alpha_at(std::size_t iter, const TrainConfig& cfg);
/// learning_rate * lr_decay^floor(epoch / lr_decay_every); epoch is 0-based.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParamStore<T>& p);
};

/// One bias-corrected Adam update. Every gradient is checked before any
/// parameter changes; a non-finite entry throws NumericError naming it.
template <typename T>
void adam_step(ParamStore<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr);

template <typename T>
struct Checkpoint {
  RunConfig config;
  std::size_t epoch = 0;  // completed epochs
  std::size_t iter = 0;   // completed optimizer steps
  std::string rng_state;
  ParamStore<T> params;
  AdamState<T> adam;
};

inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'D', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt);
template <typename T>
Checkpoint<T> decode_checkpoint(const std::string& bytes, const std::string& source);
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt);
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);
/// Config stored in a checkpoint, readable without knowing its precision.
RunConfig checkpoint_config(const std::filesystem::path& path);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::size_t iter = 0;   // global optimizer steps after this epoch
  double alpha = 0, lr = 0;
  double cd_coarse = 0, cd_out = 0, fscore = 0;  // training-pass means
};

/// "# ..." reproducibility header line for any emitted file.
std::string repro_header(const RunConfig& cfg);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Owns parameters and optimizer state for one training run.
template <typename T>
class Trainer {
 public:
  Trainer(RunConfig cfg, std::vector<ObjectRecord> objects, TrainOptions opts = {});
  /// Continues from a checkpoint; the run config replaces the stored one,
  /// but model layouts must agree.
  Trainer(RunConfig cfg, std::vector<ObjectRecord> objects, Checkpoint<T> resume,
          TrainOptions opts = {});

  /// Runs until the configured epoch count or iteration cap is reached.
  void run();
  /// One pass over the objects in a seeded order; returns its metrics.
  EpochMetrics run_epoch();
  bool done() const;

  Checkpoint<T> checkpoint() const;
  const CsdnModel<T>& model() const noexcept { return model_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t iter() const noexcept { return iter_; }

 private:
  struct SampleResult {
    double loss = 0, cd_coarse = 0, cd_out = 0, fscore = 0;
  };
  SampleResult process(const Sample& s, double alpha, std::vector<Tensor<T>>& grads) const;
  void write_checkpoint(const std::string& name) const;
  void append_metrics(const EpochMetrics& m) const;

  RunConfig cfg_;
  std::vector<ObjectRecord> objects_;
  TrainOptions opts_;
  CsdnModel<T> model_;
  AdamState<T> adam_;
  Rng rng_;
  std::size_t epoch_ = 0;
  std::size_t iter_ = 0;
};

/// Completed cloud (and coarse cloud) for one view with a fixed model.
template <typename T>
struct Completion {
  PointCloud coarse, out;
};
template <typename T>
Completion<T> complete(const CsdnModel<T>& model, const PointCloud& partial, const Image& image,
                       const Camera& camera);

/// Mean CD(P_out, gt) and CD(P_0, gt) over (object, view) pairs.
struct SetLoss {
  double cd_coarse = 0, cd_out = 0;
};
template <typename T>
SetLoss mean_chamfer(const CsdnModel<T>& model, const std::vector<Sample>& samples,
                     ChamferVariant variant);

/// Throws std::invalid_argument listing every dimension where the dataset
/// disagrees with the model config (partial points, gt points, image size).
void check_scale(const ModelConfig& cfg, const std::vector<ObjectRecord>& objects);

/// Effective worker count: 1 in deterministic mode, else min(cfg, CSDN_THREADS).
std::size_t worker_count(const TrainConfig& cfg);

}  // namespace csdn
