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

// Recurrence-score binning, patch labeling from the cancer mask, and
// patient-level stratified fold construction.

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/image.hpp"
#include "wsirisk/manifest.hpp"
#include "wsirisk/rng.hpp"

namespace wsirisk {

/// Ordered label set. Benign < Low < Intermediate < High; the last three are
/// the GHI-RS bins.
enum class RiskCategory : int { Benign = 0, Low = 1, Intermediate = 2, High = 3 };

inline constexpr int kNumRiskClasses = 3;  // Low, Intermediate, High
inline constexpr double kCancerFractionCutoff = 0.25;

inline const char* to_string(RiskCategory c) {
  switch (c) {
    case RiskCategory::Benign: return "Benign";
    case RiskCategory::Low: return "Low";
    case RiskCategory::Intermediate: return "Intermediate";
    case RiskCategory::High: return "High";
  }
  return "?";
}

/// RS bins: below 18 low, 18..31 intermediate, above 31 high.
inline RiskCategory bin_rs(int rs) {
  if (rs < 0 || rs > 100)
    throw std::invalid_argument("bin_rs: rs " + std::to_string(rs) + " out of [0,100]");
  if (rs < 18) return RiskCategory::Low;
  if (rs <= 31) return RiskCategory::Intermediate;
  return RiskCategory::High;
}

/// Fraction of nonzero mask pixels inside one patch window.
inline double cancer_fraction(const Image& mask, int x, int y, int size) {
  if (mask.channels != 1)
    throw std::invalid_argument("cancer_fraction: mask must be single-channel");
  if (x < 0 || y < 0 || x + size > mask.width || y + size > mask.height)
    throw std::invalid_argument("cancer_fraction: window out of bounds");
  std::uint64_t nonzero = 0;
  for (int r = 0; r < size; ++r) {
    const std::uint8_t* row = mask.px(x, y + r);
    for (int ccol = 0; ccol < size; ++ccol) nonzero += (row[ccol] != 0) ? 1 : 0;
  }
  return static_cast<double>(nonzero) /
         (static_cast<double>(size) * static_cast<double>(size));
}

/// Patch labeling: under 25% cancer area the patch is benign; at or above
/// 25% it takes the slide's RS bin. The 25% boundary is on the cancer side.
inline RiskCategory label_patch(double fraction, int slide_rs) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("label_patch: fraction out of [0,1]");
  if (fraction < kCancerFractionCutoff) return RiskCategory::Benign;
  return bin_rs(slide_rs);
}

/// Patient-to-fold assignment. Every slide of a patient shares the fold.
struct FoldSplit {
  int k = 0;
  std::map<std::string, int> assignment;  // patient_id -> fold index

  int fold_of(const std::string& patient_id) const {
    const auto it = assignment.find(patient_id);
    if (it == assignment.end())
      throw std::invalid_argument("FoldSplit: unknown patient " + patient_id);
    return it->second;
  }
};

inline nlohmann::ordered_json fold_split_to_json(const FoldSplit& split) {
  nlohmann::ordered_json j;
  j["k"] = split.k;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto& [patient, fold] : split.assignment) a[patient] = fold;
  j["assignment"] = a;
  return j;
}

inline FoldSplit fold_split_from_json(const nlohmann::json& j) {
  FoldSplit split;
  split.k = j.at("k").get<int>();
  for (const auto& [patient, fold] : j.at("assignment").items())
    split.assignment[patient] = fold.get<int>();
  return split;
}

/// Greedy stratified assignment: patients are grouped by risk category
/// (highest category among a patient's slides), shuffled per category with
/// the seeded generator, and each goes to the fold currently holding the
/// fewest patients of that category. Per-category fold sizes end within one
/// patient of each other.
inline FoldSplit make_folds(const Manifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
  std::map<std::string, RiskCategory> patient_category;
  for (const auto& e : manifest) {
    const RiskCategory c = bin_rs(e.rs_score);
    auto [it, inserted] = patient_category.emplace(e.patient_id, c);
    if (!inserted && static_cast<int>(c) > static_cast<int>(it->second)) it->second = c;
  }
  if (static_cast<int>(patient_category.size()) < k)
    throw std::invalid_argument("make_folds: k exceeds patient count");

  FoldSplit split;
  split.k = k;
  Rng rng(derive_seed(seed, 0x666f6c64));  // "fold" stream

  std::map<RiskCategory, std::vector<std::string>> by_category;
  for (const auto& [patient, category] : patient_category)
    by_category[category].push_back(patient);

  std::vector<int> total_count(static_cast<std::size_t>(k), 0);
  for (auto& [category, patients] : by_category) {
    std::sort(patients.begin(), patients.end());
    rng.shuffle(patients);
    std::vector<int> fold_count(static_cast<std::size_t>(k), 0);
    for (const auto& patient : patients) {
      // Smallest fold for this category; total size then index break ties.
      int best = 0;
      for (int f = 1; f < k; ++f) {
        if (fold_count[f] < fold_count[best] ||
            (fold_count[f] == fold_count[best] && total_count[f] < total_count[best]))
          best = f;
      }
      split.assignment[patient] = best;
      ++fold_count[best];
      ++total_count[best];
    }
  }
  return split;
}

}  // namespace wsirisk
