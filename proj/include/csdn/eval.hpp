// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csdn/data.hpp"
#include "csdn/geometry.hpp"

namespace csdn {

/// Completed cloud for one view of one object.
using Predictor = std::function<PointCloud(const ObjectRecord&, const View&)>;

struct EvalOptions {
  ChamferVariant variant = ChamferVariant::kL2;
  double tau = 0.001;
  bool per_view_std = false;
  std::optional<std::size_t> only_view;  // evaluate a single view id per object
};

struct EvalRecord {
  std::string split, category, object;
  std::size_t view = 0;
  double cd = 0;  // raw, not scaled
  double fscore = 0;
};

struct CategorySummary {
  std::string category;  // "average" for the mean over categories
  std::size_t samples = 0;
  double cd = 0;       // mean, raw
  double fscore = 0;   // mean
  double view_std = 0;  // mean over objects of the per-object CD std (per_view_std only)
};

struct ObjectStd {
  std::string category, object;
  std::size_t views = 0;
  double cd_mean = 0, cd_std = 0;  // population std across views, raw
};

struct EvalReport {
  EvalOptions options;
  std::vector<EvalRecord> records;
  std::vector<CategorySummary> categories;  // sorted by name, then "average"
  std::vector<ObjectStd> objects;           // per_view_std only

  const CategorySummary& average() const { return categories.back(); }
};

EvalReport evaluate(const std::vector<ObjectRecord>& objects, const Predictor& predict,
                    const EvalOptions& opts);

inline constexpr double kCdReportScale = 1e3;

/// CSV bodies documented in docs/reports.md; `header` is written first as-is.
std::string summary_csv(const EvalReport& r, const std::string& header);
std::string samples_csv(const EvalReport& r, const std::string& header);
std::string view_std_csv(const EvalReport& r, const std::string& header);
/// Fixed-width human-readable table of the category summary.
std::string summary_table(const EvalReport& r);

}  // namespace csdn
