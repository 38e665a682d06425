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

// Confusion matrices and the clinical metrics derived from them. Metrics are
// exact integer ratios; table rendering rounds half-up at three decimals.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"

namespace wsirisk {

/// Exact nonnegative ratio. A zero denominator means the metric is
/// undefined and must be reported as not-a-value, never as 0.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 0;

  bool defined() const { return den != 0; }

  double value() const {
    return defined() ? static_cast<double>(num) / static_cast<double>(den)
                     : std::numeric_limits<double>::quiet_NaN();
  }

  /// Fixed three-decimal rendering, round half up, exact in integers.
  std::string fixed3() const {
    if (!defined()) return "n/a";
    const std::int64_t scaled = num * 1000;
    std::int64_t q = scaled / den;
    const std::int64_t r = scaled % den;
    if (2 * r >= den) ++q;
    std::string s = std::to_string(q / 1000) + ".";
    const std::int64_t frac = q % 1000;
    if (frac < 100) s += '0';
    if (frac < 10) s += '0';
    s += std::to_string(frac);
    return s;
  }
};

/// Square count table over an ordered label set; rows are true labels,
/// columns are predictions.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::int64_t> counts;  // n x n row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> label_list)
      : labels(std::move(label_list)),
        counts(labels.size() * labels.size(), 0) {}

  int n() const { return static_cast<int>(labels.size()); }

  std::int64_t& at(int true_idx, int pred_idx) {
    return counts[static_cast<std::size_t>(true_idx) * labels.size() + pred_idx];
  }
  std::int64_t at(int true_idx, int pred_idx) const {
    return counts[static_cast<std::size_t>(true_idx) * labels.size() + pred_idx];
  }

  void add(int true_idx, int pred_idx, std::int64_t count = 1) {
    if (true_idx < 0 || true_idx >= n() || pred_idx < 0 || pred_idx >= n())
      throw std::invalid_argument("ConfusionMatrix: index out of range");
    at(true_idx, pred_idx) += count;
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto c : counts) t += c;
    return t;
  }

  std::int64_t trace() const {
    std::int64_t t = 0;
    for (int i = 0; i < n(); ++i) t += at(i, i);
    return t;
  }

  std::int64_t row_total(int i) const {
    std::int64_t t = 0;
    for (int j = 0; j < n(); ++j) t += at(i, j);
    return t;
  }

  std::int64_t col_total(int j) const {
    std::int64_t t = 0;
    for (int i = 0; i < n(); ++i) t += at(i, j);
    return t;
  }
};

/// Exact counting from (true, predicted) index pairs.
inline ConfusionMatrix build_confusion(const std::vector<std::pair<int, int>>& pairs,
                                       std::vector<std::string> labels) {
  ConfusionMatrix m(std::move(labels));
  for (const auto& [t, p] : pairs) m.add(t, p);
  return m;
}

inline Ratio overall_accuracy(const ConfusionMatrix& m) {
  return Ratio{m.trace(), m.total()};
}

/// One-vs-rest metrics for a single class.
struct ClassMetrics {
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  Ratio accuracy;     // (TP+TN) / total
  Ratio sensitivity;  // TP / (TP+FN)
  Ratio specificity;  // TN / (TN+FP)
  Ratio ppv;          // TP / (TP+FP)
};

inline ClassMetrics class_metrics(const ConfusionMatrix& m, int class_idx) {
  if (class_idx < 0 || class_idx >= m.n())
    throw std::invalid_argument("class_metrics: class index out of range");
  ClassMetrics cm;
  cm.tp = m.at(class_idx, class_idx);
  cm.fn = m.row_total(class_idx) - cm.tp;
  cm.fp = m.col_total(class_idx) - cm.tp;
  cm.tn = m.total() - cm.tp - cm.fn - cm.fp;
  cm.accuracy = Ratio{cm.tp + cm.tn, m.total()};
  cm.sensitivity = Ratio{cm.tp, cm.tp + cm.fn};
  cm.specificity = Ratio{cm.tn, cm.tn + cm.fp};
  cm.ppv = Ratio{cm.tp, cm.tp + cm.fp};
  return cm;
}

/// Pearson correlation of the ordinal score pair distribution weighted by
/// cell counts. Invariant under positive affine rescaling of either score
/// vector. Returns NaN when either marginal is constant.
inline double pearson_from_contingency(const ConfusionMatrix& m,
                                       const std::vector<double>& row_scores,
                                       const std::vector<double>& col_scores) {
  if (static_cast<int>(row_scores.size()) != m.n() ||
      static_cast<int>(col_scores.size()) != m.n())
    throw std::invalid_argument("pearson_from_contingency: score length mismatch");
  long double w_total = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < m.n(); ++i) {
    for (int j = 0; j < m.n(); ++j) {
      const long double w = static_cast<long double>(m.at(i, j));
      if (w == 0) continue;
      const long double x = row_scores[i];
      const long double y = col_scores[j];
      w_total += w;
      sx += w * x;
      sy += w * y;
      sxx += w * x * x;
      syy += w * y * y;
      sxy += w * x * y;
    }
  }
  if (w_total == 0) return std::numeric_limits<double>::quiet_NaN();
  const long double cov = sxy - sx * sy / w_total;
  const long double vx = sxx - sx * sx / w_total;
  const long double vy = syy - sy * sy / w_total;
  if (vx <= 0 || vy <= 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(cov / std::sqrt(vx * vy));
}

inline nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& m) {
  nlohmann::ordered_json j;
  j["labels"] = m.labels;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int i = 0; i < m.n(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < m.n(); ++k) row.push_back(m.at(i, k));
    rows.push_back(row);
  }
  j["counts"] = rows;
  return j;
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix m(j.at("labels").get<std::vector<std::string>>());
  const auto& rows = j.at("counts");
  if (static_cast<int>(rows.size()) != m.n())
    throw ConfigError("confusion matrix: row count mismatch");
  for (int i = 0; i < m.n(); ++i) {
    if (static_cast<int>(rows[i].size()) != m.n())
      throw ConfigError("confusion matrix: column count mismatch");
    for (int k = 0; k < m.n(); ++k) m.at(i, k) = rows[i][k].get<std::int64_t>();
  }
  return m;
}

inline nlohmann::ordered_json ratio_to_json(const Ratio& r) {
  nlohmann::ordered_json j;
  j["num"] = r.num;
  j["den"] = r.den;
  if (r.defined()) {
    j["value"] = r.value();
    j["rendered"] = r.fixed3();
  } else {
    j["value"] = nullptr;
    j["rendered"] = "n/a";
  }
  return j;
}

inline nlohmann::ordered_json class_metrics_to_json(const ClassMetrics& cm) {
  nlohmann::ordered_json j;
  j["tp"] = cm.tp;
  j["fn"] = cm.fn;
  j["fp"] = cm.fp;
  j["tn"] = cm.tn;
  j["accuracy"] = ratio_to_json(cm.accuracy);
  j["sensitivity"] = ratio_to_json(cm.sensitivity);
  j["specificity"] = ratio_to_json(cm.specificity);
  j["ppv"] = ratio_to_json(cm.ppv);
  return j;
}

}  // namespace wsirisk
