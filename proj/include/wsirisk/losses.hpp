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

// Training objectives: categorical cross entropy, confidence-weighted cross
// entropy, the confidence-gated reject loss, the WSI-aware contrastive loss,
// and the warm-up-scheduled total. Every loss ships with its analytic
// gradient; the test suite checks all of them against central finite
// differences.
//
// The contrastive loss is an NT-Xent anchor term plus two weighted terms:
// an attraction over same-label same-slide view pairs, offset by +1/tau per
// pair so it stays nonnegative, and a log-sum-exp repulsion over
// different-label pairs (softplus form, also nonnegative). Confidence
// scores enter every loss as constants; no gradient flows through them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/tensor.hpp"

namespace wsirisk {

inline constexpr double kProbEpsilon = 1e-12;

enum class RejectMode {
  kLiteral,   // loss active when CF <= lambda
  kInverted,  // loss active when CF > lambda
};

inline const char* to_string(RejectMode m) {
  return m == RejectMode::kLiteral ? "literal" : "inverted";
}

inline RejectMode reject_mode_from_string(const std::string& s) {
  if (s == "literal") return RejectMode::kLiteral;
  if (s == "inverted") return RejectMode::kInverted;
  throw ConfigError("reject_mode must be 'literal' or 'inverted', got '" + s + "'");
}

struct LossHyperparams {
  double alpha = 0.5;       // mix between confidence-weighted and plain CE
  double lambda = 0.5;      // confidence threshold
  double tau = 0.15;        // contrastive temperature
  double alpha_pos = 0.25;  // same-label same-slide attraction weight
  double alpha_neg = 0.25;  // different-label repulsion weight
  int warmup_epochs = 10;   // psi ramp length
  RejectMode reject_mode = RejectMode::kLiteral;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("loss: alpha out of [0,1]");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("loss: lambda out of [0,1]");
    if (!(tau > 0.0)) throw ConfigError("loss: tau must be > 0");
    if (alpha_pos < 0.0) throw ConfigError("loss: alpha_pos must be >= 0");
    if (alpha_neg < 0.0) throw ConfigError("loss: alpha_neg must be >= 0");
    if (warmup_epochs < 0) throw ConfigError("loss: warmup_epochs must be >= 0");
  }
};

inline nlohmann::ordered_json loss_hyperparams_to_json(const LossHyperparams& h) {
  return nlohmann::ordered_json{{"alpha", h.alpha},
                                {"lambda", h.lambda},
                                {"tau", h.tau},
                                {"alpha_pos", h.alpha_pos},
                                {"alpha_neg", h.alpha_neg},
                                {"warmup_epochs", h.warmup_epochs},
                                {"reject_mode", to_string(h.reject_mode)}};
}

inline LossHyperparams loss_hyperparams_from_json(const nlohmann::json& j) {
  LossHyperparams h;
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") h.alpha = value.get<double>();
    else if (key == "lambda") h.lambda = value.get<double>();
    else if (key == "tau") h.tau = value.get<double>();
    else if (key == "alpha_pos") h.alpha_pos = value.get<double>();
    else if (key == "alpha_neg") h.alpha_neg = value.get<double>();
    else if (key == "warmup_epochs") h.warmup_epochs = value.get<int>();
    else if (key == "reject_mode") h.reject_mode = reject_mode_from_string(value.get<std::string>());
    else throw ConfigError("loss: unknown key '" + key + "'");
  }
  h.validate();
  return h;
}

namespace loss_detail {

template <typename T>
void check_batch(const Tensor<T>& probs, const std::vector<int>& labels) {
  if (probs.shape.size() != 2)
    throw std::invalid_argument("loss: probs must be (N, K)");
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  if (n == 0) throw std::invalid_argument("loss: empty batch");
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("loss: label count does not match batch");
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw std::invalid_argument("loss: label out of range");
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      const T p = probs[static_cast<std::size_t>(i) * k + j];
      if (p < T(-1e-9)) throw std::invalid_argument("loss: negative probability");
      sum += p;
    }
    if (std::abs(static_cast<double>(sum) - 1.0) > 1e-6)
      throw std::invalid_argument("loss: probability row does not sum to 1");
  }
}

template <typename T>
T clamp_prob(T p) {
  return std::min(T(1), std::max(static_cast<T>(kProbEpsilon), p));
}

}  // namespace loss_detail

/// Per-sample -log p_y with epsilon clamping, no batch reduction.
template <typename T>
std::vector<T> per_sample_cross_entropy(const Tensor<T>& probs,
                                        const std::vector<int>& labels) {
  loss_detail::check_batch(probs, labels);
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[i] = -std::log(
        loss_detail::clamp_prob(probs[static_cast<std::size_t>(i) * k + labels[i]]));
  return out;
}

/// Categorical cross entropy, mean over the batch.
template <typename T>
T cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels) {
  const auto per = per_sample_cross_entropy(probs, labels);
  T sum = T(0);
  for (const T v : per) sum += v;
  return sum / static_cast<T>(per.size());
}

/// Gradient of the batch-mean cross entropy with respect to probabilities.
template <typename T>
Tensor<T> cross_entropy_grad(const Tensor<T>& probs, const std::vector<int>& labels) {
  loss_detail::check_batch(probs, labels);
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  Tensor<T> grad({n, k});
  for (int i = 0; i < n; ++i) {
    const T p = loss_detail::clamp_prob(probs[static_cast<std::size_t>(i) * k + labels[i]]);
    grad[static_cast<std::size_t>(i) * k + labels[i]] = -T(1) / (p * static_cast<T>(n));
  }
  return grad;
}

/// Max softmax probability per row, the default confidence realization.
template <typename T>
std::vector<T> confidence_scores(const Tensor<T>& probs) {
  if (probs.shape.size() != 2) throw std::invalid_argument("confidence: probs must be (N, K)");
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  std::vector<T> cf(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const T* row = probs.data() + static_cast<std::size_t>(i) * k;
    cf[i] = *std::max_element(row, row + k);
  }
  return cf;
}

/// Confidence-weighted cross entropy: per-sample CE scaled by CF, batch mean.
/// CF is a constant input; it carries no gradient.
template <typename T>
T confidence_weighted_ce(const Tensor<T>& probs, const std::vector<int>& labels,
                         const std::vector<T>& cf) {
  const auto per = per_sample_cross_entropy(probs, labels);
  if (cf.size() != per.size())
    throw std::invalid_argument("confidence_weighted_ce: CF count mismatch");
  T sum = T(0);
  for (std::size_t i = 0; i < per.size(); ++i) sum += per[i] * cf[i];
  return sum / static_cast<T>(per.size());
}

template <typename T>
Tensor<T> confidence_weighted_ce_grad(const Tensor<T>& probs,
                                      const std::vector<int>& labels,
                                      const std::vector<T>& cf) {
  loss_detail::check_batch(probs, labels);
  if (cf.size() != static_cast<std::size_t>(probs.dim(0)))
    throw std::invalid_argument("confidence_weighted_ce: CF count mismatch");
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  Tensor<T> grad({n, k});
  for (int i = 0; i < n; ++i) {
    const T p = loss_detail::clamp_prob(probs[static_cast<std::size_t>(i) * k + labels[i]]);
    grad[static_cast<std::size_t>(i) * k + labels[i]] =
        -cf[i] / (p * static_cast<T>(n));
  }
  return grad;
}

namespace loss_detail {

inline bool reject_active(double cf, const LossHyperparams& hp) {
  return hp.reject_mode == RejectMode::kLiteral ? cf <= hp.lambda : cf > hp.lambda;
}

}  // namespace loss_detail

/// Confidence-gated reject loss. In the literal branch direction the term
/// alpha * l_cf + (1 - alpha) * l_ce applies when CF <= lambda and is zero
/// otherwise; inverted mode swaps the branch. Batch value is the mean over
/// all patches, inactive ones contributing zero.
template <typename T>
T reject_loss(const Tensor<T>& probs, const std::vector<int>& labels,
              const std::vector<T>& cf, const LossHyperparams& hp) {
  hp.validate();
  const auto per = per_sample_cross_entropy(probs, labels);
  if (cf.size() != per.size()) throw std::invalid_argument("reject_loss: CF count mismatch");
  T sum = T(0);
  for (std::size_t i = 0; i < per.size(); ++i) {
    if (!loss_detail::reject_active(static_cast<double>(cf[i]), hp)) continue;
    const T factor = static_cast<T>(hp.alpha) * cf[i] + static_cast<T>(1.0 - hp.alpha);
    sum += factor * per[i];
  }
  return sum / static_cast<T>(per.size());
}

template <typename T>
Tensor<T> reject_loss_grad(const Tensor<T>& probs, const std::vector<int>& labels,
                           const std::vector<T>& cf, const LossHyperparams& hp) {
  hp.validate();
  loss_detail::check_batch(probs, labels);
  if (cf.size() != static_cast<std::size_t>(probs.dim(0)))
    throw std::invalid_argument("reject_loss: CF count mismatch");
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  Tensor<T> grad({n, k});
  for (int i = 0; i < n; ++i) {
    if (!loss_detail::reject_active(static_cast<double>(cf[i]), hp)) continue;
    const T factor = static_cast<T>(hp.alpha) * cf[i] + static_cast<T>(1.0 - hp.alpha);
    const T p = loss_detail::clamp_prob(probs[static_cast<std::size_t>(i) * k + labels[i]]);
    grad[static_cast<std::size_t>(i) * k + labels[i]] =
        -factor / (p * static_cast<T>(n));
  }
  return grad;
}

/// dL/dlogits from dL/dprobs for softmax rows: p .* (dp - <dp, p>).
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs) {
  if (!probs.same_shape(dprobs))
    throw std::invalid_argument("softmax_backward: shape mismatch");
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  Tensor<T> dlogits({n, k});
  for (int i = 0; i < n; ++i) {
    const T* p = probs.data() + static_cast<std::size_t>(i) * k;
    const T* dp = dprobs.data() + static_cast<std::size_t>(i) * k;
    T dot = T(0);
    for (int j = 0; j < k; ++j) dot += dp[j] * p[j];
    T* dl = dlogits.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) dl[j] = p[j] * (dp[j] - dot);
  }
  return dlogits;
}

template <typename T>
struct ContrastiveResult {
  T value = T(0);
  Tensor<T> grad;  // with respect to the embedding rows
};

/// WSI-aware contrastive loss over 2N views (view 2i and 2i+1 are the two
/// augmentations of patch i). Anchor term is NT-Xent; the attraction term
/// averages (1 - z_i . z_k)/tau over ordered same-label same-slide pairs
/// (partner pairs excluded); the repulsion term averages
/// log(1 + sum_k exp(z_i . z_k / tau)) over anchors with at least one
/// different-label view. With alpha_pos = alpha_neg = 0 this is exactly
/// NT-Xent.
template <typename T>
ContrastiveResult<T> wsi_contrastive(const Tensor<T>& z, const std::vector<int>& labels,
                                     const std::vector<int>& wsi_ids, double tau,
                                     double alpha_pos, double alpha_neg) {
  if (z.shape.size() != 2) throw std::invalid_argument("contrastive: z must be (2N, d)");
  const int rows = z.dim(0);
  const int d = z.dim(1);
  if (rows % 2 != 0) throw std::invalid_argument("contrastive: view count must be even");
  if (rows < 4) throw std::invalid_argument("contrastive: need at least 2 patches (4 views)");
  if (static_cast<int>(labels.size()) != rows || static_cast<int>(wsi_ids.size()) != rows)
    throw std::invalid_argument("contrastive: label/wsi count mismatch");
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive: tau must be > 0");

  ContrastiveResult<T> result;
  result.grad = Tensor<T>({rows, d});

  // Pairwise similarities.
  std::vector<T> sim(static_cast<std::size_t>(rows) * rows, T(0));
  for (int i = 0; i < rows; ++i) {
    const T* zi = z.data() + static_cast<std::size_t>(i) * d;
    for (int k = i; k < rows; ++k) {
      const T* zk = z.data() + static_cast<std::size_t>(k) * d;
      T dot = T(0);
      for (int c = 0; c < d; ++c) dot += zi[c] * zk[c];
      sim[static_cast<std::size_t>(i) * rows + k] = dot;
      sim[static_cast<std::size_t>(k) * rows + i] = dot;
    }
  }
  const T inv_tau = static_cast<T>(1.0 / tau);
  auto s = [&](int i, int k) { return sim[static_cast<std::size_t>(i) * rows + k]; };
  auto add_grad = [&](int row, int col_row, T coeff) {
    // grad[row] += coeff * z[col_row]
    T* g = result.grad.data() + static_cast<std::size_t>(row) * d;
    const T* zc = z.data() + static_cast<std::size_t>(col_row) * d;
    for (int c = 0; c < d; ++c) g[c] += coeff * zc[c];
  };

  // Anchor (NT-Xent) term.
  const T anchor_scale = T(1) / static_cast<T>(rows);
  std::vector<T> p(static_cast<std::size_t>(rows), T(0));
  for (int i = 0; i < rows; ++i) {
    const int j = i ^ 1;  // augmentation partner
    T m = -std::numeric_limits<T>::infinity();
    for (int k = 0; k < rows; ++k)
      if (k != i) m = std::max(m, s(i, k) * inv_tau);
    T denom = T(0);
    for (int k = 0; k < rows; ++k)
      p[k] = (k == i) ? T(0) : std::exp(s(i, k) * inv_tau - m);
    for (int k = 0; k < rows; ++k) denom += p[k];
    result.value += anchor_scale * (-s(i, j) * inv_tau + m + std::log(denom));
    for (int k = 0; k < rows; ++k) p[k] /= denom;

    // d/dz_i: (-z_j + sum_k p_ik z_k) / tau, scaled by anchor_scale.
    add_grad(i, j, -anchor_scale * inv_tau);
    for (int k = 0; k < rows; ++k) {
      if (k == i) continue;
      add_grad(i, k, anchor_scale * inv_tau * p[k]);
      add_grad(k, i, anchor_scale * inv_tau * p[k]);  // dz_k via denominator
    }
    add_grad(j, i, -anchor_scale * inv_tau);  // dz_j via numerator
  }

  // Attraction over same-label, same-slide ordered pairs.
  if (alpha_pos > 0.0) {
    std::int64_t pair_count = 0;
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < rows; ++k)
        if (k != i && k != (i ^ 1) && labels[k] == labels[i] && wsi_ids[k] == wsi_ids[i])
          ++pair_count;
    if (pair_count > 0) {
      const T w = static_cast<T>(alpha_pos) / static_cast<T>(pair_count);
      for (int i = 0; i < rows; ++i) {
        for (int k = 0; k < rows; ++k) {
          if (k == i || k == (i ^ 1) || labels[k] != labels[i] || wsi_ids[k] != wsi_ids[i])
            continue;
          result.value += w * (T(1) - s(i, k)) * inv_tau;
          add_grad(i, k, -w * inv_tau);
          add_grad(k, i, -w * inv_tau);
        }
      }
    }
  }

  // Log-sum-exp repulsion over different-label pairs.
  if (alpha_neg > 0.0) {
    int anchors = 0;
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < rows; ++k)
        if (labels[k] != labels[i]) {
          ++anchors;
          break;
        }
    if (anchors > 0) {
      const T w = static_cast<T>(alpha_neg) / static_cast<T>(anchors);
      std::vector<int> neg;
      for (int i = 0; i < rows; ++i) {
        neg.clear();
        for (int k = 0; k < rows; ++k)
          if (labels[k] != labels[i]) neg.push_back(k);
        if (neg.empty()) continue;
        // log(1 + sum exp(x)) = m + log(exp(-m) + sum exp(x - m)), m >= 0.
        T m = T(0);
        for (const int k : neg) m = std::max(m, s(i, k) * inv_tau);
        T denom = std::exp(-m);
        for (const int k : neg) denom += std::exp(s(i, k) * inv_tau - m);
        result.value += w * (m + std::log(denom));
        for (const int k : neg) {
          const T sigma = std::exp(s(i, k) * inv_tau - m) / denom;
          add_grad(i, k, w * inv_tau * sigma);
          add_grad(k, i, w * inv_tau * sigma);
        }
      }
    }
  }
  return result;
}

template <typename T>
ContrastiveResult<T> wsi_contrastive(const Tensor<T>& z, const std::vector<int>& labels,
                                     const std::vector<int>& wsi_ids,
                                     const LossHyperparams& hp) {
  hp.validate();
  return wsi_contrastive(z, labels, wsi_ids, hp.tau, hp.alpha_pos, hp.alpha_neg);
}

/// Contrastive warm-up weight: linear ramp from 0 to 1 over warmup_epochs.
inline double psi_schedule(int epoch, int warmup_epochs) {
  if (epoch < 0) throw std::invalid_argument("psi_schedule: negative epoch");
  if (warmup_epochs <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(warmup_epochs));
}

/// Total objective: reject loss plus psi-weighted contrastive loss.
template <typename T>
T total_loss(T reject, T contrastive, double psi) {
  return reject + static_cast<T>(psi) * contrastive;
}

}  // namespace wsirisk
