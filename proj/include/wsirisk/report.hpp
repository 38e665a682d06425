// Copyright 2026 The wsirisk Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Report assembly: confusion matrices, per-class metric tables, the
// high-true-predicted-low probe cell, grade agreement with weighted Pearson
// when grades are annotated, and the cancer-area-vs-RS scatter data. The
// bundle is deterministic: identical inputs serialize to identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/metrics.hpp"
#include "wsirisk/train.hpp"

namespace wsirisk {

inline constexpr int kReportSchemaVersion = 1;

inline const char* to_string(WsiStatus s) {
  return s == WsiStatus::kOk ? "ok" : "no-cancer-patches";
}

inline nlohmann::ordered_json wsi_prediction_to_json(const WsiPrediction& w) {
  nlohmann::ordered_json j;
  j["slide_id"] = w.slide_id;
  j["status"] = to_string(w.status);
  j["category"] = (w.status == WsiStatus::kOk)
                      ? nlohmann::ordered_json(to_string(w.category))
                      : nlohmann::ordered_json(nullptr);
  j["tallies"] = nlohmann::ordered_json{{"low", w.tallies[0]},
                                        {"intermediate", w.tallies[1]},
                                        {"high", w.tallies[2]}};
  j["accepted"] = w.accepted;
  j["rejected"] = w.rejected;
  j["benign_predicted"] = w.benign_predicted;
  j["tissue_patches"] = w.tissue_patches;
  return j;
}

namespace report_detail {

inline std::string format_prob(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline nlohmann::ordered_json metrics_table(const ConfusionMatrix& m) {
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (int c = 0; c < m.n(); ++c)
    per_class[m.labels[static_cast<std::size_t>(c)]] =
        class_metrics_to_json(class_metrics(m, c));
  return per_class;
}

}  // namespace report_detail

/// Patch prediction CSV, columns fixed by the external interface:
/// slide_id,x,y,p_cancer,p_low,p_int,p_high,cf,accepted,predicted
inline void write_patch_csv(const std::string& path,
                            const std::vector<ScoredPatch>& patches) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_patch_csv: cannot open " + path);
  f << "slide_id,x,y,p_cancer,p_low,p_int,p_high,cf,accepted,predicted\n";
  for (const auto& sp : patches) {
    const auto& p = sp.pred;
    f << sp.slide_id << ',' << p.ref.x << ',' << p.ref.y << ','
      << report_detail::format_prob(p.p_cancer) << ','
      << report_detail::format_prob(p.risk_probs[0]) << ','
      << report_detail::format_prob(p.risk_probs[1]) << ','
      << report_detail::format_prob(p.risk_probs[2]) << ','
      << report_detail::format_prob(p.cf) << ',' << (p.accepted ? 1 : 0) << ','
      << to_string(p.predicted) << "\n";
  }
}

inline void write_wsi_json(const std::string& path,
                           const std::vector<ScoredSlide>& slides) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : slides) {
    nlohmann::ordered_json j = wsi_prediction_to_json(s.pred);
    j["rs"] = s.rs;
    j["true_category"] = to_string(s.true_category);
    j["grade"] = s.grade > 0 ? nlohmann::ordered_json(s.grade)
                             : nlohmann::ordered_json(nullptr);
    j["cancer_area_fraction"] = s.cancer_area_fraction;
    j["fold"] = s.fold;
    arr.push_back(j);
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_wsi_json: cannot open " + path);
  f << arr.dump(2) << "\n";
}

/// Full report from scored patches and slides. Either list may be empty;
/// the report is then valid and explicitly empty.
inline nlohmann::ordered_json build_report(const std::vector<ScoredPatch>& patches,
                                           const std::vector<ScoredSlide>& slides) {
  nlohmann::ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool_version"] = std::string(kVersion);
  report["counts"] = nlohmann::ordered_json{{"slides", slides.size()},
                                            {"patches", patches.size()}};

  // WSI-level confusion over slides with a voted category; no-vote slides
  // are tracked separately so the matrix stays a pure 3x3.
  ConfusionMatrix wsi({"Low", "Intermediate", "High"});
  int no_vote = 0;
  for (const auto& s : slides) {
    if (s.pred.status != WsiStatus::kOk) {
      ++no_vote;
      continue;
    }
    wsi.add(static_cast<int>(s.true_category) - 1,
            static_cast<int>(s.pred.category) - 1);
  }
  report["wsi"] = nlohmann::ordered_json{
      {"confusion", confusion_to_json(wsi)},
      {"overall_accuracy_including_no_vote",
       ratio_to_json(Ratio{wsi.trace(), static_cast<std::int64_t>(slides.size())})},
      {"overall_accuracy_voted_only", ratio_to_json(overall_accuracy(wsi))},
      {"no_vote_slides", no_vote},
      {"per_class", report_detail::metrics_table(wsi)}};

  // The probe the study highlights: true-High slides predicted Low.
  report["high_true_predicted_low"] = nlohmann::ordered_json{
      {"count", wsi.at(2, 0)},
      {"note", "count of true-High slides voted Low; lower is safer"}};

  // Patch-level confusion (Benign + risk classes) when patch truth exists.
  if (!patches.empty()) {
    ConfusionMatrix patch({"Benign", "Low", "Intermediate", "High"});
    for (const auto& p : patches)
      patch.add(static_cast<int>(p.true_label), static_cast<int>(p.pred.predicted));
    report["patch"] = nlohmann::ordered_json{
        {"confusion", confusion_to_json(patch)},
        {"overall_accuracy", ratio_to_json(overall_accuracy(patch))},
        {"per_class", report_detail::metrics_table(patch)}};
  } else {
    report["patch"] = nullptr;
  }

  // Grade agreement when the manifest carries grades.
  ConfusionMatrix grade({"Grade1", "Grade2", "Grade3"});
  bool any_grade = false;
  for (const auto& s : slides) {
    if (s.grade < 1 || s.grade > 3 || s.pred.status != WsiStatus::kOk) continue;
    any_grade = true;
    grade.add(s.grade - 1, static_cast<int>(s.pred.category) - 1);
  }
  if (any_grade) {
    const double r = pearson_from_contingency(grade, {1, 2, 3}, {1, 2, 3});
    report["grade_agreement"] = nlohmann::ordered_json{
        {"confusion", confusion_to_json(grade)},
        {"per_class", report_detail::metrics_table(grade)},
        {"weighted_pearson", std::isnan(r) ? nlohmann::ordered_json(nullptr)
                                           : nlohmann::ordered_json(r)}};
  } else {
    report["grade_agreement"] = nullptr;
  }

  // Scatter data: cancer area fraction vs RS, with the voted category.
  nlohmann::ordered_json scatter = nlohmann::ordered_json::array();
  for (const auto& s : slides) {
    scatter.push_back(nlohmann::ordered_json{
        {"slide_id", s.pred.slide_id},
        {"cancer_area_fraction", s.cancer_area_fraction},
        {"rs", s.rs},
        {"true_category", to_string(s.true_category)},
        {"predicted", s.pred.status == WsiStatus::kOk
                          ? nlohmann::ordered_json(to_string(s.pred.category))
                          : nlohmann::ordered_json(nullptr)}});
  }
  report["scatter"] = scatter;
  return report;
}

/// Writes report.json plus a per-class CSV rendering of the WSI table.
inline void write_report_bundle(const std::string& dir,
                                const nlohmann::ordered_json& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f((fs::path(dir) / "report.json").string(), std::ios::trunc);
    if (!f) throw IoError("write_report_bundle: cannot open report.json");
    f << report.dump(2) << "\n";
  }
  std::ofstream f((fs::path(dir) / "wsi_metrics.csv").string(), std::ios::trunc);
  if (!f) throw IoError("write_report_bundle: cannot open wsi_metrics.csv");
  f << "class,accuracy,sensitivity,specificity,ppv\n";
  if (report.contains("wsi") && report["wsi"].contains("per_class")) {
    for (const auto& [name, m] : report["wsi"]["per_class"].items()) {
      f << name;
      for (const char* key : {"accuracy", "sensitivity", "specificity", "ppv"})
        f << ',' << m.at(key).at("rendered").get<std::string>();
      f << "\n";
    }
  }
}

}  // namespace wsirisk
