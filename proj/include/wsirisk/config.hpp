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

// Run configuration: a single JSON file with flat, documented sections.
// Unknown keys are rejected everywhere; the resolved config is serialized
// into every output directory for reproducible reruns.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/augment.hpp"
#include "wsirisk/common.hpp"
#include "wsirisk/losses.hpp"
#include "wsirisk/slide.hpp"

namespace wsirisk {

struct TrainParams {
  int epochs_cancer = 6;
  int epochs_risk = 12;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int folds = 5;
  int embedding_dim = 64;  // 0 disables the contrastive objective
  std::vector<int> channels = {16, 32, 64, 64};

  void validate() const {
    if (epochs_cancer < 0 || epochs_risk < 0)
      throw ConfigError("train: negative epoch count");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (folds < 2) throw ConfigError("train: folds must be >= 2");
    if (embedding_dim < 0) throw ConfigError("train: negative embedding_dim");
    if (channels.empty()) throw ConfigError("train: channels must be nonempty");
  }
};

inline nlohmann::ordered_json train_params_to_json(const TrainParams& t) {
  return nlohmann::ordered_json{{"epochs_cancer", t.epochs_cancer},
                                {"epochs_risk", t.epochs_risk},
                                {"batch_size", t.batch_size},
                                {"learning_rate", t.learning_rate},
                                {"seed", t.seed},
                                {"folds", t.folds},
                                {"embedding_dim", t.embedding_dim},
                                {"channels", t.channels}};
}

inline TrainParams train_params_from_json(const nlohmann::json& j) {
  TrainParams t;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs_cancer") t.epochs_cancer = value.get<int>();
    else if (key == "epochs_risk") t.epochs_risk = value.get<int>();
    else if (key == "batch_size") t.batch_size = value.get<int>();
    else if (key == "learning_rate") t.learning_rate = value.get<double>();
    else if (key == "seed") t.seed = value.get<std::uint64_t>();
    else if (key == "folds") t.folds = value.get<int>();
    else if (key == "embedding_dim") t.embedding_dim = value.get<int>();
    else if (key == "channels") t.channels = value.get<std::vector<int>>();
    else throw ConfigError("train: unknown key '" + key + "'");
  }
  t.validate();
  return t;
}

struct RunConfig {
  std::string manifest;
  std::string out_dir;
  int patch_size = kPatchSize;
  int stride = 0;  // 0 = patch_size
  double min_tissue_fraction = kDefaultMinTissueFraction;
  int input_size = 128;  // network input after bilinear downscale
  AugmentSpec augment;
  LossHyperparams loss;
  TrainParams train;
  std::optional<double> infer_lambda;  // defaults to loss.lambda
  int workers = 1;

  int effective_stride() const { return stride == 0 ? patch_size : stride; }
  double effective_infer_lambda() const {
    return infer_lambda.has_value() ? *infer_lambda : loss.lambda;
  }

  void validate() const {
    if (patch_size < 8) throw ConfigError("config: patch_size too small");
    if (stride < 0) throw ConfigError("config: negative stride");
    if (min_tissue_fraction < 0.0 || min_tissue_fraction > 1.0)
      throw ConfigError("config: min_tissue_fraction out of [0,1]");
    if (input_size < 8 || input_size > patch_size)
      throw ConfigError("config: input_size out of [8, patch_size]");
    if (infer_lambda.has_value() && (*infer_lambda < 0.0 || *infer_lambda > 1.0))
      throw ConfigError("config: infer_lambda out of [0,1]");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    augment.validate();
    loss.validate();
    train.validate();
  }
};

inline nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["manifest"] = c.manifest;
  j["out_dir"] = c.out_dir;
  j["patch_size"] = c.patch_size;
  j["stride"] = c.stride;
  j["min_tissue_fraction"] = c.min_tissue_fraction;
  j["input_size"] = c.input_size;
  j["augment"] = augment_spec_to_json(c.augment);
  j["loss"] = loss_hyperparams_to_json(c.loss);
  j["train"] = train_params_to_json(c.train);
  j["infer_lambda"] = c.infer_lambda.has_value()
                          ? nlohmann::ordered_json(*c.infer_lambda)
                          : nlohmann::ordered_json(nullptr);
  j["workers"] = c.workers;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "manifest") c.manifest = value.get<std::string>();
    else if (key == "out_dir") c.out_dir = value.get<std::string>();
    else if (key == "patch_size") c.patch_size = value.get<int>();
    else if (key == "stride") c.stride = value.get<int>();
    else if (key == "min_tissue_fraction") c.min_tissue_fraction = value.get<double>();
    else if (key == "input_size") c.input_size = value.get<int>();
    else if (key == "augment") c.augment = augment_spec_from_json(value);
    else if (key == "loss") c.loss = loss_hyperparams_from_json(value);
    else if (key == "train") c.train = train_params_from_json(value);
    else if (key == "infer_lambda") {
      if (!value.is_null()) c.infer_lambda = value.get<double>();
    } else if (key == "workers") c.workers = value.get<int>();
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad JSON in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace wsirisk
