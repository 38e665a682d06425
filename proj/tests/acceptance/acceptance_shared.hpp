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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>

#include "wsirisk/wsirisk.hpp"

namespace acceptance {

void print_line(int criterion, bool pass, const std::string& detail);

/// The deterministic desk-scale configuration used by the end-to-end
/// criteria: 50 patients at a 5:3:2 mix, default separable textures,
/// 512-pixel tiling downscaled to 128x128 network inputs, 5-fold
/// patient-level cross-validation.
inline wsirisk::RunConfig e2e_config(const std::string& root) {
  wsirisk::RunConfig cfg;
  cfg.manifest = root + "/corpus/manifest.csv";
  cfg.out_dir = root + "/train";
  cfg.input_size = 128;
  cfg.train.seed = 7;
  cfg.train.folds = 5;
  cfg.train.epochs_cancer = 10;
  cfg.train.epochs_risk = 16;
  cfg.train.learning_rate = 1e-3;
  // The literal reject branch is kept active for every patch during
  // training (lambda 1.0); slide-level vote selection applies the 0.5
  // confidence threshold.
  cfg.loss.lambda = 1.0;
  cfg.infer_lambda = 0.5;
  return cfg;
}

/// Shared end-to-end run: generated corpus + full cross-validated training.
/// Built lazily by the first criterion that needs it and reused by the rest.
struct E2ERun {
  bool ran = false;
  std::string root;
  wsirisk::Manifest manifest;
  wsirisk::RunConfig config;
  wsirisk::TrainOutcome outcome;
  double synth_seconds = 0.0;
  double train_seconds = 0.0;

  static E2ERun& get();

  void run() {
    namespace fs = std::filesystem;
    root = (fs::temp_directory_path() / "wsirisk_acceptance_e2e").string();
    fs::remove_all(root);

    const auto t0 = std::chrono::steady_clock::now();
    wsirisk::CorpusRequest request;
    request.n_patients = 50;
    request.slides_per_patient = 1;
    request.mix = {5, 3, 2};
    request.seed = 20260808;
    manifest = wsirisk::run_synth(root + "/corpus", request);
    const auto t1 = std::chrono::steady_clock::now();

    config = e2e_config(root);
    outcome = wsirisk::run_train(config);
    const auto t2 = std::chrono::steady_clock::now();
    synth_seconds = std::chrono::duration<double>(t1 - t0).count();
    train_seconds = std::chrono::duration<double>(t2 - t1).count();
  }
};

}  // namespace acceptance
