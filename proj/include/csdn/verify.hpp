// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csdn/autodiff.hpp"
#include "csdn/config.hpp"

namespace csdn::verify {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct Options {
  std::uint64_t seed = 1;
  /// Primitive whose VJP is scaled by (1 + 1e-2) during the gradient suite.
  std::string perturb_vjp;
  /// Called after each check (progress output).
  std::function<void(const CheckResult&)> on_result;
};

inline constexpr double kPrimitiveTol = 1e-6;
inline constexpr double kEndToEndTol = 1e-3;
inline constexpr double kFdStep = 1e-5;
inline constexpr double kEndToEndFdStep = 1e-6;
// Absolute floor on the norm used to scale end-to-end errors; central
// differences at h = 1e-6 carry about 1e-8 of rounding noise per tensor.
inline constexpr double kEndToEndFloor = 1e-4;
inline constexpr std::size_t kOracleInstances = 200;
inline constexpr std::size_t kOracleMaxSize = 128;
inline constexpr double kOracleValueTol = 1e-6;
inline constexpr std::size_t kIpadainPairs = 100;
inline constexpr double kIpadainMeanTol = 1e-5;
inline constexpr double kIpadainStdTol = 1e-4;

/// Builds a scalar from the given leaves.
using ScalarFn = std::function<ad::Var<double>(ad::Graph<double>&, const std::vector<ad::Var<double>>&)>;

/// Largest per-input relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// between backward() and central differences with step h.
double gradcheck(const std::vector<Tensor<double>>& inputs, const ScalarFn& f, double h = kFdStep);

/// End-to-end loss gradient on a model config versus central differences,
/// with data-dependent structure frozen at the base point. Returns the worst
/// per-parameter relative error and names that parameter.
struct EndToEndResult {
  double worst = 0;
  std::string worst_param;
  std::size_t scalars = 0;
};
EndToEndResult end_to_end_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double h = kEndToEndFdStep);

std::vector<CheckResult> gradient_suite(const Options& opts);
std::vector<CheckResult> oracle_suite(const Options& opts);
std::vector<CheckResult> ipadain_suite(const Options& opts);
std::vector<CheckResult> invariant_suite(const Options& opts);
std::vector<CheckResult> run_all(const Options& opts);

std::string format_matrix(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace csdn::verify
