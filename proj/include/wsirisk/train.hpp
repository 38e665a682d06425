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

// Cascade training and slide-level inference under patient-level
// cross-validation: a benign-vs-cancer gate trained with plain cross
// entropy, a risk head trained on cancer patches with the reject +
// contrastive total objective, confidence-filtered patch selection, and
// majority voting with ties broken toward the higher-risk category.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/augment.hpp"
#include "wsirisk/checkpoint.hpp"
#include "wsirisk/config.hpp"
#include "wsirisk/labeling.hpp"
#include "wsirisk/losses.hpp"
#include "wsirisk/manifest.hpp"
#include "wsirisk/nn.hpp"
#include "wsirisk/parallel.hpp"
#include "wsirisk/png_io.hpp"
#include "wsirisk/rng.hpp"
#include "wsirisk/slide.hpp"

namespace wsirisk {

// Fixed stream tags for deterministic substream derivation.
inline constexpr std::uint64_t kStreamGateInit = 0x01;
inline constexpr std::uint64_t kStreamRiskInit = 0x02;
inline constexpr std::uint64_t kStreamGateOrder = 0x03;
inline constexpr std::uint64_t kStreamRiskOrder = 0x04;
inline constexpr std::uint64_t kStreamGateAugment = 0x05;
inline constexpr std::uint64_t kStreamRiskAugment = 0x06;

/// One tissue patch ready for the network: label, cancer fraction, and the
/// downscaled pixels.
struct PatchSample {
  PatchRef ref;
  RiskCategory label = RiskCategory::Benign;
  double cancer_frac = 0.0;
  Image input;              // input_size x input_size RGB
  int slide_index = -1;     // position in the manifest
  std::uint64_t uid = 0;    // stable id for augmentation streams
};

/// Everything the pipeline needs from one slide.
struct SlideData {
  SlideManifestEntry entry;
  int slide_index = -1;
  int width = 0, height = 0;
  int otsu = 0;
  int total_patches = 0;
  int background_patches = 0;
  double cancer_area_fraction = 0.0;  // nonzero mask pixels / slide pixels
  std::vector<PatchSample> patches;   // tissue patches only
  std::vector<std::string> warnings;
};

/// Loads one slide + mask, applies the slide-global Otsu tissue gate,
/// labels each tissue patch from the mask window, and downscales patches to
/// the network input size.
inline SlideData load_slide_data(const SlideManifestEntry& entry,
                                 const std::string& manifest_path,
                                 const RunConfig& cfg, int slide_index) {
  SlideData data;
  data.entry = entry;
  data.slide_index = slide_index;

  const Image slide = read_png(resolve_manifest_path(manifest_path, entry.image_path));
  const Image mask_raw = read_png(resolve_manifest_path(manifest_path, entry.mask_path));
  if (mask_raw.channels != 1)
    throw IoError("slide " + entry.slide_id + ": mask must be grayscale");
  if (mask_raw.width != slide.width || mask_raw.height != slide.height)
    throw IoError("slide " + entry.slide_id + ": mask dimensions do not match image");
  if (slide.channels != 3)
    throw IoError("slide " + entry.slide_id + ": image must be RGB");

  data.width = slide.width;
  data.height = slide.height;

  std::uint64_t mask_nonzero = 0;
  for (const auto v : mask_raw.data) mask_nonzero += (v != 0) ? 1 : 0;
  data.cancer_area_fraction =
      static_cast<double>(mask_nonzero) / static_cast<double>(slide.pixel_count());

  data.otsu = otsu_threshold(luminance_histogram(slide));

  TileResult tiles =
      tile_slide(entry.slide_id, slide, cfg.patch_size, cfg.effective_stride());
  data.warnings = std::move(tiles.warnings);
  data.total_patches = static_cast<int>(tiles.refs.size());

  for (std::size_t i = 0; i < tiles.refs.size(); ++i) {
    const PatchRef& ref = tiles.refs[i];
    const Image patch = copy_window(slide, ref.x, ref.y, ref.size, ref.size);
    if (!is_tissue(tissue_fraction(patch, data.otsu), cfg.min_tissue_fraction)) {
      ++data.background_patches;
      continue;
    }
    PatchSample sample;
    sample.ref = ref;
    sample.cancer_frac = cancer_fraction(mask_raw, ref.x, ref.y, ref.size);
    sample.label = label_patch(sample.cancer_frac, entry.rs_score);
    sample.input = bilinear_resize(patch, cfg.input_size, cfg.input_size);
    sample.slide_index = slide_index;
    sample.uid = static_cast<std::uint64_t>(slide_index) << 20 | i;
    data.patches.push_back(std::move(sample));
  }
  return data;
}

/// Loads every manifest slide, optionally in parallel (slot-per-slide, so
/// results are worker-count invariant).
inline std::vector<SlideData> load_all_slides(const Manifest& manifest,
                                              const std::string& manifest_path,
                                              const RunConfig& cfg) {
  std::vector<SlideData> slides(manifest.size());
  parallel_for(manifest.size(), cfg.workers, [&](std::size_t i) {
    slides[i] = load_slide_data(manifest[i], manifest_path, cfg, static_cast<int>(i));
  });
  return slides;
}

/// Per-patch inference output. Both heads are always evaluated; routing
/// only decides the predicted category and which head supplies CF.
struct PatchPrediction {
  PatchRef ref;
  double p_cancer = 0.0;
  std::array<double, 3> risk_probs{};  // Low, Intermediate, High
  double cf = 0.0;
  RiskCategory predicted = RiskCategory::Benign;
  bool accepted = false;
};

enum class WsiStatus { kOk, kNoCancerPatches };

/// Slide-level vote. Tallies count only accepted cancer patches; the final
/// category is the plurality winner with ties toward higher risk.
struct WsiPrediction {
  std::string slide_id;
  std::array<int, 3> tallies{};  // Low, Intermediate, High
  int accepted = 0;
  int rejected = 0;           // cancer-predicted but below the threshold
  int benign_predicted = 0;
  int tissue_patches = 0;
  WsiStatus status = WsiStatus::kNoCancerPatches;
  RiskCategory category = RiskCategory::Benign;  // valid only when status ok
};

namespace train_detail {

template <typename T>
void fill_input_row(Tensor<T>& batch, int row, const Image& img) {
  const int s = img.width;
  T* dst = batch.data() + static_cast<std::size_t>(row) * 3 * s * s;
  // HWC uint8 -> CHW floats in [0,1].
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        *dst++ = static_cast<T>(img.at(x, y, c)) / T(255);
}

/// Argmax with ties resolved toward the higher index (higher risk).
inline int argmax_tie_high(const double* values, int n) {
  int best = 0;
  for (int k = 1; k < n; ++k)
    if (values[k] >= values[best]) best = k;
  return best;
}

}  // namespace train_detail

/// Batched two-model inference over prepared inputs.
inline std::vector<PatchPrediction> predict_patches(const Checkpoint& cancer,
                                                    const Checkpoint& risk,
                                                    const std::vector<const PatchSample*>& samples,
                                                    int batch_size = 32) {
  std::vector<PatchPrediction> out(samples.size());
  const int s = cancer.config.input_size;
  for (std::size_t start = 0; start < samples.size();
       start += static_cast<std::size_t>(batch_size)) {
    const int b = static_cast<int>(
        std::min(samples.size() - start, static_cast<std::size_t>(batch_size)));
    Tensor<float> batch({b, 3, s, s});
    for (int i = 0; i < b; ++i)
      train_detail::fill_input_row(batch, i, samples[start + i]->input);
    ForwardCache<float> gate_cache, risk_cache;
    forward(cancer.params, cancer.config, batch, gate_cache);
    forward(risk.params, risk.config, batch, risk_cache);
    for (int i = 0; i < b; ++i) {
      PatchPrediction& p = out[start + i];
      p.ref = samples[start + i]->ref;
      p.p_cancer = gate_cache.probs[static_cast<std::size_t>(i) * 2 + 1];
      double risk_probs[3];
      for (int k = 0; k < 3; ++k) {
        risk_probs[k] = risk_cache.probs[static_cast<std::size_t>(i) * 3 + k];
        p.risk_probs[k] = risk_probs[k];
      }
      if (p.p_cancer < 0.5) {
        // Benign route; the boundary itself goes to the risk head.
        p.predicted = RiskCategory::Benign;
        p.cf = std::max(p.p_cancer, 1.0 - p.p_cancer);
      } else {
        const int k = train_detail::argmax_tie_high(risk_probs, 3);
        p.predicted = static_cast<RiskCategory>(k + 1);
        p.cf = risk_probs[k];
      }
    }
  }
  return out;
}

inline PatchPrediction predict_patch(const Checkpoint& cancer, const Checkpoint& risk,
                                     const PatchSample& sample) {
  return predict_patches(cancer, risk, {&sample})[0];
}

/// Confidence selection: accepted iff CF strictly exceeds lambda; benign
/// predictions never vote regardless of confidence.
inline void select_patches(std::vector<PatchPrediction>& predictions, double lambda) {
  for (auto& p : predictions)
    p.accepted = (p.predicted != RiskCategory::Benign) && (p.cf > lambda);
}

/// Majority vote over the accepted patches of one slide.
inline WsiPrediction aggregate_wsi(const std::string& slide_id,
                                   const std::vector<PatchPrediction>& predictions) {
  WsiPrediction w;
  w.slide_id = slide_id;
  w.tissue_patches = static_cast<int>(predictions.size());
  for (const auto& p : predictions) {
    if (p.predicted == RiskCategory::Benign) {
      ++w.benign_predicted;
      continue;
    }
    if (!p.accepted) {
      ++w.rejected;
      continue;
    }
    ++w.accepted;
    ++w.tallies[static_cast<int>(p.predicted) - 1];
  }
  if (w.accepted == 0) {
    w.status = WsiStatus::kNoCancerPatches;
    return w;
  }
  w.status = WsiStatus::kOk;
  double tallies[3];
  for (int k = 0; k < 3; ++k) tallies[k] = static_cast<double>(w.tallies[k]);
  w.category =
      static_cast<RiskCategory>(train_detail::argmax_tie_high(tallies, 3) + 1);
  return w;
}

/// Trained models and the per-epoch log for one fold.
struct FoldModels {
  Checkpoint cancer;
  Checkpoint risk;
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
};

namespace train_detail {

struct EpochStat {
  double loss_sum = 0.0;
  double reject_sum = 0.0;
  double contrastive_sum = 0.0;
  std::int64_t batches = 0;

  double mean(double sum) const {
    return batches ? sum / static_cast<double>(batches) : 0.0;
  }
};

/// Validation accuracy of the gate alone (patch-level benign-vs-cancer).
inline double gate_val_accuracy(const Checkpoint& gate,
                                const std::vector<const PatchSample*>& val) {
  if (val.empty()) return 0.0;
  const int s = gate.config.input_size;
  std::int64_t correct = 0;
  const int batch_size = 32;
  for (std::size_t start = 0; start < val.size(); start += batch_size) {
    const int b =
        static_cast<int>(std::min(val.size() - start, static_cast<std::size_t>(batch_size)));
    Tensor<float> batch({b, 3, s, s});
    for (int i = 0; i < b; ++i) fill_input_row(batch, i, val[start + i]->input);
    ForwardCache<float> cache;
    forward(gate.params, gate.config, batch, cache);
    for (int i = 0; i < b; ++i) {
      const bool pred_cancer = cache.probs[static_cast<std::size_t>(i) * 2 + 1] >= 0.5f;
      const bool is_cancer = val[start + i]->label != RiskCategory::Benign;
      correct += (pred_cancer == is_cancer) ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

/// Validation accuracy of the full cascade at WSI level.
inline double wsi_val_accuracy(const Checkpoint& gate, const Checkpoint& risk,
                               const std::vector<const SlideData*>& val_slides,
                               double lambda) {
  if (val_slides.empty()) return 0.0;
  int correct = 0;
  for (const SlideData* slide : val_slides) {
    std::vector<const PatchSample*> samples;
    for (const auto& p : slide->patches) samples.push_back(&p);
    auto preds = predict_patches(gate, risk, samples);
    select_patches(preds, lambda);
    const WsiPrediction w = aggregate_wsi(slide->entry.slide_id, preds);
    if (w.status == WsiStatus::kOk && w.category == bin_rs(slide->entry.rs_score))
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(val_slides.size());
}

}  // namespace train_detail

/// Trains the cancer gate then the risk head for one fold. The gate is
/// selected by validation patch accuracy, the risk head by validation
/// WSI-level accuracy with the selected gate. Zero-epoch phases keep their
/// initialization.
inline FoldModels train_fold(const std::vector<const SlideData*>& train_slides,
                             const std::vector<const SlideData*>& val_slides,
                             const RunConfig& cfg, int fold_index) {
  cfg.validate();
  const TrainParams& tp = cfg.train;
  const std::uint64_t seed = tp.seed;

  std::vector<const PatchSample*> train_patches;
  for (const SlideData* s : train_slides)
    for (const auto& p : s->patches) train_patches.push_back(&p);
  std::vector<const PatchSample*> val_patches;
  for (const SlideData* s : val_slides)
    for (const auto& p : s->patches) val_patches.push_back(&p);

  // Class coverage diagnostics before any training.
  std::array<int, 4> class_count{};
  for (const auto* p : train_patches) ++class_count[static_cast<int>(p->label)];
  const bool has_benign = class_count[0] > 0;
  const bool has_cancer = class_count[1] + class_count[2] + class_count[3] > 0;
  if (!has_benign || !has_cancer)
    throw ConfigError("train fold " + std::to_string(fold_index) +
                      ": benign-vs-cancer training needs both classes (benign=" +
                      std::to_string(class_count[0]) + ", cancer=" +
                      std::to_string(class_count[1] + class_count[2] + class_count[3]) + ")");
  for (int c = 1; c <= 3; ++c)
    if (class_count[c] == 0)
      throw ConfigError("train fold " + std::to_string(fold_index) +
                        ": risk class " + to_string(static_cast<RiskCategory>(c)) +
                        " has no training patches");

  FoldModels models;

  // ---- Phase A: cancer gate ----
  NetworkConfig gate_cfg;
  gate_cfg.input_size = cfg.input_size;
  gate_cfg.channels = tp.channels;
  gate_cfg.num_classes = 2;
  gate_cfg.embedding_dim = 0;
  Params<float> gate_params =
      init_params<float>(gate_cfg, derive_seed(seed, kStreamGateInit, fold_index));
  Params<float> gate_best = gate_params;
  double gate_best_acc = -1.0;
  int gate_best_epoch = -1;
  {
    Adam<float> opt(gate_cfg, tp.learning_rate);
    // Benign tissue is a minority on cancer-dominated slides; the gate's
    // epoch ordering oversamples benign patches toward class balance.
    std::vector<std::size_t> order;
    std::vector<std::size_t> benign_indices;
    for (std::size_t i = 0; i < train_patches.size(); ++i) {
      order.push_back(i);
      if (train_patches[i]->label == RiskCategory::Benign) benign_indices.push_back(i);
    }
    const std::size_t cancer_count = train_patches.size() - benign_indices.size();
    if (!benign_indices.empty()) {
      const std::size_t reps = cancer_count / benign_indices.size();
      for (std::size_t r = 1; r < reps; ++r)
        order.insert(order.end(), benign_indices.begin(), benign_indices.end());
    }
    const int s = cfg.input_size;

    for (int epoch = 0; epoch < tp.epochs_cancer; ++epoch) {
      Rng shuffle_rng(derive_seed(seed, kStreamGateOrder, fold_index, epoch));
      shuffle_rng.shuffle(order);
      train_detail::EpochStat stat;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(tp.batch_size)) {
        const int b = static_cast<int>(std::min(
            order.size() - start, static_cast<std::size_t>(tp.batch_size)));
        Tensor<float> batch({b, 3, s, s});
        std::vector<int> labels(static_cast<std::size_t>(b));
        for (int i = 0; i < b; ++i) {
          const PatchSample* sample = train_patches[order[start + i]];
          const Image view = augment_view(
              sample->input, cfg.augment,
              derive_seed(seed, kStreamGateAugment, fold_index, epoch), sample->uid, 0);
          train_detail::fill_input_row(batch, i, view);
          labels[i] = (sample->label != RiskCategory::Benign) ? 1 : 0;
        }
        ForwardCache<float> cache;
        forward(gate_params, gate_cfg, batch, cache);
        const float loss = cross_entropy(cache.probs, labels);
        const Tensor<float> dlogits =
            softmax_backward(cache.probs, cross_entropy_grad(cache.probs, labels));
        Params<float> grads;
        backward(gate_params, gate_cfg, cache, dlogits, Tensor<float>({b, 0}), grads);
        opt.step(gate_params, grads);
        stat.loss_sum += loss;
        ++stat.batches;
      }
      Checkpoint probe{gate_cfg, gate_params, {}};
      const double val_acc = train_detail::gate_val_accuracy(probe, val_patches);
      if (val_acc > gate_best_acc) {
        gate_best_acc = val_acc;
        gate_best = gate_params;
        gate_best_epoch = epoch;
      }
      models.log.push_back(nlohmann::ordered_json{
          {"fold", fold_index},
          {"phase", "cancer"},
          {"epoch", epoch},
          {"train_loss", stat.mean(stat.loss_sum)},
          {"val_patch_accuracy", val_acc}});
    }
  }
  models.cancer.config = gate_cfg;
  models.cancer.params = gate_best;
  models.cancer.metadata =
      nlohmann::ordered_json{{"phase", "cancer"},
                             {"fold", fold_index},
                             {"best_epoch", gate_best_epoch},
                             {"val_patch_accuracy", gate_best_acc},
                             {"seed", seed},
                             {"loss", loss_hyperparams_to_json(cfg.loss)}};

  // ---- Phase B: risk head on cancer patches ----
  std::vector<const PatchSample*> cancer_patches;
  for (const auto* p : train_patches)
    if (p->label != RiskCategory::Benign) cancer_patches.push_back(p);

  NetworkConfig risk_cfg;
  risk_cfg.input_size = cfg.input_size;
  risk_cfg.channels = tp.channels;
  risk_cfg.num_classes = 3;
  risk_cfg.embedding_dim = tp.embedding_dim;
  Params<float> risk_params =
      init_params<float>(risk_cfg, derive_seed(seed, kStreamRiskInit, fold_index));
  Params<float> risk_best = risk_params;
  double risk_best_acc = -1.0;
  int risk_best_epoch = -1;
  {
    Adam<float> opt(risk_cfg, tp.learning_rate);
    // Oversample minority risk classes toward balance, mirroring the gate.
    std::array<std::vector<std::size_t>, 3> by_class;
    for (std::size_t i = 0; i < cancer_patches.size(); ++i)
      by_class[static_cast<int>(cancer_patches[i]->label) - 1].push_back(i);
    std::size_t largest = 0;
    for (const auto& v : by_class) largest = std::max(largest, v.size());
    std::vector<std::size_t> order;
    for (const auto& v : by_class) {
      order.insert(order.end(), v.begin(), v.end());
      if (!v.empty())
        for (std::size_t r = 1; r < largest / v.size(); ++r)
          order.insert(order.end(), v.begin(), v.end());
    }
    const int s = cfg.input_size;
    const bool contrastive_on = risk_cfg.has_embedding();

    for (int epoch = 0; epoch < tp.epochs_risk; ++epoch) {
      const double psi = psi_schedule(epoch, cfg.loss.warmup_epochs);
      Rng shuffle_rng(derive_seed(seed, kStreamRiskOrder, fold_index, epoch));
      shuffle_rng.shuffle(order);
      train_detail::EpochStat stat;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(tp.batch_size)) {
        const int n = static_cast<int>(std::min(
            order.size() - start, static_cast<std::size_t>(tp.batch_size)));
        const int rows = 2 * n;
        Tensor<float> batch({rows, 3, s, s});
        std::vector<int> labels(static_cast<std::size_t>(rows));
        std::vector<int> wsi_ids(static_cast<std::size_t>(rows));
        for (int i = 0; i < n; ++i) {
          const PatchSample* sample = cancer_patches[order[start + i]];
          const std::uint64_t aug_seed =
              derive_seed(seed, kStreamRiskAugment, fold_index, epoch);
          const Image view_a = augment_view(sample->input, cfg.augment, aug_seed,
                                            sample->uid, 0);
          const Image view_b = augment_view(sample->input, cfg.augment, aug_seed,
                                            sample->uid, 1);
          train_detail::fill_input_row(batch, 2 * i, view_a);
          train_detail::fill_input_row(batch, 2 * i + 1, view_b);
          const int label = static_cast<int>(sample->label) - 1;
          labels[2 * i] = labels[2 * i + 1] = label;
          wsi_ids[2 * i] = wsi_ids[2 * i + 1] = sample->slide_index;
        }
        ForwardCache<float> cache;
        forward(risk_params, risk_cfg, batch, cache);

        const std::vector<float> cf = confidence_scores(cache.probs);
        const float reject = reject_loss(cache.probs, labels, cf, cfg.loss);
        const Tensor<float> dlogits = softmax_backward(
            cache.probs, reject_loss_grad(cache.probs, labels, cf, cfg.loss));

        Tensor<float> demb({rows, risk_cfg.embedding_dim});
        float contrastive_value = 0.0f;
        if (contrastive_on && n >= 2) {
          const auto contrastive = wsi_contrastive(cache.emb, labels, wsi_ids, cfg.loss);
          contrastive_value = contrastive.value;
          demb = contrastive.grad;
          const float scale = static_cast<float>(psi);
          for (auto& g : demb.v) g *= scale;
        }
        const float total = total_loss(reject, contrastive_value, psi);

        Params<float> grads;
        backward(risk_params, risk_cfg, cache, dlogits, demb, grads);
        opt.step(risk_params, grads);
        stat.loss_sum += total;
        stat.reject_sum += reject;
        stat.contrastive_sum += contrastive_value;
        ++stat.batches;
      }
      Checkpoint gate_probe{gate_cfg, gate_best, {}};
      Checkpoint risk_probe{risk_cfg, risk_params, {}};
      const double val_acc = train_detail::wsi_val_accuracy(
          gate_probe, risk_probe, val_slides, cfg.effective_infer_lambda());
      if (val_acc > risk_best_acc) {
        risk_best_acc = val_acc;
        risk_best = risk_params;
        risk_best_epoch = epoch;
      }
      models.log.push_back(nlohmann::ordered_json{
          {"fold", fold_index},
          {"phase", "risk"},
          {"epoch", epoch},
          {"psi", psi},
          {"train_loss", stat.mean(stat.loss_sum)},
          {"reject_loss", stat.mean(stat.reject_sum)},
          {"contrastive_loss", stat.mean(stat.contrastive_sum)},
          {"val_wsi_accuracy", val_acc}});
    }
  }
  models.risk.config = risk_cfg;
  models.risk.params = risk_best;
  models.risk.metadata =
      nlohmann::ordered_json{{"phase", "risk"},
                             {"fold", fold_index},
                             {"best_epoch", risk_best_epoch},
                             {"val_wsi_accuracy", risk_best_acc},
                             {"seed", seed},
                             {"loss", loss_hyperparams_to_json(cfg.loss)}};
  return models;
}

/// One scored patch / slide after held-out inference.
struct ScoredPatch {
  PatchPrediction pred;
  RiskCategory true_label = RiskCategory::Benign;
  std::string slide_id;
  int fold = -1;
};

struct ScoredSlide {
  WsiPrediction pred;
  RiskCategory true_category = RiskCategory::Low;
  int rs = 0;
  int grade = 0;
  double cancer_area_fraction = 0.0;
  int fold = -1;
};

struct CvResult {
  FoldSplit split;
  std::vector<FoldModels> fold_models;
  std::vector<ScoredPatch> patches;  // pooled held-out patches
  std::vector<ScoredSlide> slides;   // pooled held-out slides
  std::vector<std::string> warnings;
};

/// Runs inference for a set of slides against one fold's models.
inline void score_slides(const Checkpoint& gate, const Checkpoint& risk,
                         const std::vector<const SlideData*>& slides, double lambda,
                         int fold, CvResult& out) {
  for (const SlideData* slide : slides) {
    std::vector<const PatchSample*> samples;
    for (const auto& p : slide->patches) samples.push_back(&p);
    auto preds = predict_patches(gate, risk, samples);
    select_patches(preds, lambda);
    for (std::size_t i = 0; i < preds.size(); ++i)
      out.patches.push_back(ScoredPatch{preds[i], slide->patches[i].label,
                                        slide->entry.slide_id, fold});
    ScoredSlide scored;
    scored.pred = aggregate_wsi(slide->entry.slide_id, preds);
    scored.true_category = bin_rs(slide->entry.rs_score);
    scored.rs = slide->entry.rs_score;
    scored.grade = slide->entry.grade;
    scored.cancer_area_fraction = slide->cancer_area_fraction;
    scored.fold = fold;
    out.slides.push_back(std::move(scored));
  }
}

/// Patient-level k-fold cross-validation: fold f is the held-out test set,
/// fold (f+1) mod k the validation set, the rest the training set. Every
/// slide is scored exactly once, by the fold that held it out.
inline CvResult run_cv(const Manifest& manifest, const std::string& manifest_path,
                       const RunConfig& cfg) {
  cfg.validate();
  const int k = cfg.train.folds;
  CvResult result;
  result.split = make_folds(manifest, k, cfg.train.seed);

  const std::vector<SlideData> slides = load_all_slides(manifest, manifest_path, cfg);
  for (const auto& s : slides)
    for (const auto& w : s.warnings) result.warnings.push_back(w);

  result.fold_models.resize(static_cast<std::size_t>(k));
  std::vector<CvResult> fold_outputs(static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), cfg.workers, [&](std::size_t fold) {
    std::vector<const SlideData*> train_slides, val_slides, test_slides;
    for (const auto& s : slides) {
      const int assigned = result.split.fold_of(s.entry.patient_id);
      if (assigned == static_cast<int>(fold)) test_slides.push_back(&s);
      else if (k > 2 && assigned == (static_cast<int>(fold) + 1) % k)
        val_slides.push_back(&s);
      else train_slides.push_back(&s);
    }
    // k = 2 leaves no spare fold for validation; checkpoint selection then
    // runs in-sample on the training fold.
    if (val_slides.empty()) val_slides = train_slides;
    FoldModels models = train_fold(train_slides, val_slides, cfg, static_cast<int>(fold));
    score_slides(models.cancer, models.risk, test_slides, cfg.effective_infer_lambda(),
                 static_cast<int>(fold), fold_outputs[fold]);
    result.fold_models[fold] = std::move(models);
  });

  for (int fold = 0; fold < k; ++fold) {
    auto& out = fold_outputs[static_cast<std::size_t>(fold)];
    result.patches.insert(result.patches.end(), out.patches.begin(), out.patches.end());
    result.slides.insert(result.slides.end(), out.slides.begin(), out.slides.end());
  }
  return result;
}

}  // namespace wsirisk
