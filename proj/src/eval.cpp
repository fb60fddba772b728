// Copyright (c) 2026 The csdn authors
// SPDX-License-Identifier: Apache-2.0

#include "csdn/eval.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "csdn/text.hpp"

namespace csdn {

EvalReport evaluate(const std::vector<ObjectRecord>& objects, const Predictor& predict,
                    const EvalOptions& opts) {
  EvalReport report;
  report.options = opts;
  struct Acc {
    std::size_t n = 0, objects_with_std = 0;
    double cd = 0, fscore = 0, view_std = 0;
  };
  std::map<std::string, Acc> by_cat;
  for (const auto& o : objects) {
    std::vector<double> cds;
    for (const auto& v : o.views) {
      if (opts.only_view && v.id != *opts.only_view) continue;
      const PointCloud pred = predict(o, v);
      pred.validate("prediction for " + o.id);
      EvalRecord rec{o.split, o.category, o.id, v.id,
                     chamfer<float>(pred.xyz(), o.gt.xyz(), opts.variant),
                     f_score<float>(pred.xyz(), o.gt.xyz(), opts.tau)};
      auto& acc = by_cat[o.category];
      acc.n += 1;
      acc.cd += rec.cd;
      acc.fscore += rec.fscore;
      cds.push_back(rec.cd);
      report.records.push_back(std::move(rec));
    }
    if (opts.per_view_std && !cds.empty()) {
      ObjectStd s;
      s.category = o.category;
      s.object = o.id;
      s.views = cds.size();
      for (double c : cds) s.cd_mean += c;
      s.cd_mean /= static_cast<double>(cds.size());
      for (double c : cds) s.cd_std += (c - s.cd_mean) * (c - s.cd_mean);
      s.cd_std = std::sqrt(s.cd_std / static_cast<double>(cds.size()));
      auto& acc = by_cat[o.category];
      acc.view_std += s.cd_std;
      acc.objects_with_std += 1;
      report.objects.push_back(std::move(s));
    }
  }
  if (by_cat.empty()) throw std::invalid_argument("evaluate: no samples selected");
  CategorySummary avg{"average"};
  for (const auto& [name, acc] : by_cat) {
    CategorySummary c{name, acc.n, acc.cd / static_cast<double>(acc.n),
                      acc.fscore / static_cast<double>(acc.n),
                      acc.objects_with_std ? acc.view_std / static_cast<double>(acc.objects_with_std) : 0.0};
    avg.samples += c.samples;
    avg.cd += c.cd;
    avg.fscore += c.fscore;
    avg.view_std += c.view_std;
    report.categories.push_back(c);
  }
  const auto k = static_cast<double>(by_cat.size());
  avg.cd /= k;
  avg.fscore /= k;
  avg.view_std /= k;
  report.categories.push_back(avg);
  return report;
}

std::string summary_csv(const EvalReport& r, const std::string& header) {
  std::string out = header.empty() ? "" : header + "\n";
  out += "category,samples,cd_x1e3,fscore,cd_view_std_x1e3\n";
  for (const auto& c : r.categories) {
    out += c.category + "," + std::to_string(c.samples) + "," + format_number(c.cd * kCdReportScale) +
           "," + format_number(c.fscore) + "," + format_number(c.view_std * kCdReportScale) + "\n";
  }
  return out;
}

std::string samples_csv(const EvalReport& r, const std::string& header) {
  std::string out = header.empty() ? "" : header + "\n";
  out += "split,category,object,view,cd_x1e3,fscore\n";
  for (const auto& e : r.records) {
    out += e.split + "," + e.category + "," + e.object + "," + std::to_string(e.view) + "," +
           format_number(e.cd * kCdReportScale) + "," + format_number(e.fscore) + "\n";
  }
  return out;
}

std::string view_std_csv(const EvalReport& r, const std::string& header) {
  std::string out = header.empty() ? "" : header + "\n";
  out += "category,object,views,cd_mean_x1e3,cd_std_x1e3\n";
  for (const auto& s : r.objects) {
    out += s.category + "," + s.object + "," + std::to_string(s.views) + "," +
           format_number(s.cd_mean * kCdReportScale) + "," + format_number(s.cd_std * kCdReportScale) + "\n";
  }
  return out;
}

std::string summary_table(const EvalReport& r) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-10s %8s %14s %10s%s\n", "category", "samples",
                r.options.variant == ChamferVariant::kL2 ? "CD(l2) x1e3" : "CD(sq) x1e3", "F@tau",
                r.options.per_view_std ? "   view-std x1e3" : "");
  out += line;
  for (const auto& c : r.categories) {
    if (r.options.per_view_std) {
      std::snprintf(line, sizeof(line), "%-10s %8zu %14.4f %10.4f %16.4f\n", c.category.c_str(), c.samples,
                    c.cd * kCdReportScale, c.fscore, c.view_std * kCdReportScale);
    } else {
      std::snprintf(line, sizeof(line), "%-10s %8zu %14.4f %10.4f\n", c.category.c_str(), c.samples,
                    c.cd * kCdReportScale, c.fscore);
    }
    out += line;
  }
  std::snprintf(line, sizeof(line), "(tau = %g)\n", r.options.tau);
  out += line;
  return out;
}

}  // namespace csdn
