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

// wsirisk CLI: synth | train | infer | eval | cam.
// Exit codes: 0 success, 1 partial/item errors, 2 config/schema errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsirisk/runner.hpp"

namespace {

using namespace wsirisk;

std::array<int, 3> parse_mix(const std::string& mix) {
  std::array<int, 3> out{5, 3, 2};
  if (std::sscanf(mix.c_str(), "%d:%d:%d", &out[0], &out[1], &out[2]) != 3)
    throw ConfigError("--mix expects \"low:intermediate:high\", got '" + mix + "'");
  return out;
}

RunConfig load_config_with_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, int patients,
              int slides_per_patient, const std::string& mix,
              const std::string& spec_path, bool hard_boundaries, int workers) {
  CorpusRequest request;
  request.n_patients = patients;
  request.slides_per_patient = slides_per_patient;
  request.mix = parse_mix(mix);
  request.seed = seed;
  request.workers = workers;
  if (!spec_path.empty()) {
    std::ifstream f(spec_path);
    if (!f) throw IoError("synth: cannot open spec file " + spec_path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("synth: bad spec JSON: ") + e.what());
    }
    request.spec = synth_spec_from_json(j);
  }
  if (hard_boundaries) request.spec.hard_boundaries = true;
  const Manifest manifest = run_synth(out_dir, request);
  std::printf("synth: wrote %zu slides under %s\n", manifest.size(), out_dir.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg, bool force) {
  const TrainOutcome outcome = run_train(cfg, force);
  std::printf("train: seed %llu, %d folds\n",
              static_cast<unsigned long long>(cfg.train.seed), cfg.train.folds);
  const auto& wsi = outcome.report["wsi"];
  std::printf("train: pooled WSI accuracy %s (no-vote slides: %d)\n",
              wsi["overall_accuracy_including_no_vote"]["rendered"]
                  .get<std::string>()
                  .c_str(),
              wsi["no_vote_slides"].get<int>());
  std::printf("train: high-true->low-predicted cell = %lld\n",
              outcome.report["high_true_predicted_low"]["count"].get<long long>());
  std::printf("train: outputs in %s\n", outcome.out_dir.c_str());
  return 0;
}

int cmd_infer(const RunConfig& cfg, const std::string& cancer_ckpt,
              const std::string& risk_ckpt) {
  const InferOutcome outcome = run_infer(cfg, cancer_ckpt, risk_ckpt);
  std::printf("infer: %zu slides, %zu tissue patches -> %s\n", outcome.slides.size(),
              outcome.patches.size(), cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& predictions, const std::string& manifest,
             const std::string& out_dir, const std::string& cam_index,
             bool verify_tables) {
  if (verify_tables) {
    const bool ok = run_verify_paper_tables();
    return ok ? 0 : 1;
  }
  if (predictions.empty() || manifest.empty() || out_dir.empty())
    throw ConfigError("eval: --predictions, --manifest and --out are required");
  const auto report = run_eval(predictions, manifest, out_dir, cam_index);
  std::printf("eval: %lld slides scored -> %s\n",
              report["counts"]["slides"].get<long long>(), out_dir.c_str());
  return 0;
}

int cmd_cam(const CamRequest& request) {
  const CamOutcome outcome = run_cam(request);
  std::printf("cam: %zu refs, %d errors -> %s\n", request.refs.size(), outcome.errors,
              request.out_dir.c_str());
  return outcome.errors == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-slide recurrence-risk pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic slide corpus");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  int synth_patients = 50;
  int synth_spp = 1;
  std::string synth_mix = "5:3:2";
  std::string synth_spec_path;
  bool synth_hard = false;
  int synth_workers = 1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Master seed");
  synth->add_option("--patients", synth_patients, "Patient count");
  synth->add_option("--slides-per-patient", synth_spp, "Slides per patient");
  synth->add_option("--mix", synth_mix, "Class mix low:intermediate:high");
  synth->add_option("--spec", synth_spec_path, "Synth spec JSON file");
  synth->add_flag("--hard-boundaries", synth_hard, "Sample RS near the bin boundaries");
  synth->add_option("--workers", synth_workers, "Worker threads");

  // train
  auto* train = app.add_subcommand("train", "Cross-validated cascade training");
  std::string train_config;
  std::string train_manifest, train_out;
  std::int64_t train_seed = -1;
  int train_folds = 0, train_workers = 0;
  std::string train_reject_mode;
  bool train_force = false;
  train->add_option("--config", train_config, "Run config JSON")->required();
  train->add_option("--manifest", train_manifest, "Override manifest path");
  train->add_option("--out", train_out, "Override output directory");
  train->add_option("--seed", train_seed, "Override seed");
  train->add_option("--folds", train_folds, "Override fold count");
  train->add_option("--workers", train_workers, "Override worker threads");
  train->add_option("--reject-mode", train_reject_mode, "literal|inverted");
  train->add_flag("--force", train_force, "Overwrite an existing run directory");

  // infer
  auto* infer = app.add_subcommand("infer", "Run checkpoints over a manifest");
  std::string infer_config, infer_cancer, infer_risk, infer_manifest, infer_out;
  double infer_lambda = -1.0;
  int infer_workers = 0;
  infer->add_option("--config", infer_config, "Run config JSON (pipeline knobs)");
  infer->add_option("--cancer-ckpt", infer_cancer, "Cancer gate checkpoint")->required();
  infer->add_option("--risk-ckpt", infer_risk, "Risk head checkpoint")->required();
  infer->add_option("--manifest", infer_manifest, "Manifest path");
  infer->add_option("--out", infer_out, "Output directory");
  infer->add_option("--lambda", infer_lambda, "Confidence threshold override");
  infer->add_option("--workers", infer_workers, "Worker threads");

  // eval
  auto* eval = app.add_subcommand("eval", "Report bundle from predictions");
  std::string eval_predictions, eval_manifest, eval_out, eval_cam_index;
  bool eval_verify = false;
  eval->add_option("--predictions", eval_predictions, "wsi_predictions.json");
  eval->add_option("--manifest", eval_manifest, "Manifest path");
  eval->add_option("--out", eval_out, "Output directory");
  eval->add_option("--cam-index", eval_cam_index, "cam index.json to reference");
  eval->add_flag("--verify-paper-tables", eval_verify,
                 "Check the embedded reference tables and exit");

  // cam
  auto* cam = app.add_subcommand("cam", "Grad-CAM overlays for patch refs");
  std::string cam_config, cam_ckpt, cam_manifest, cam_out, cam_class;
  std::vector<std::string> cam_refs;
  cam->add_option("--risk-ckpt", cam_ckpt, "Risk head checkpoint")->required();
  cam->add_option("--manifest", cam_manifest, "Manifest path")->required();
  cam->add_option("--out", cam_out, "Output directory")->required();
  cam->add_option("--ref", cam_refs, "Patch ref slide_id:x:y (repeatable)")->required();
  cam->add_option("--class", cam_class, "low|intermediate|high (default: predicted)");
  cam->add_option("--config", cam_config, "Run config JSON (pipeline knobs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_seed, synth_patients, synth_spp, synth_mix,
                       synth_spec_path, synth_hard, synth_workers);
    if (train->parsed()) {
      RunConfig cfg = load_run_config(train_config);
      if (!train_manifest.empty()) cfg.manifest = train_manifest;
      if (!train_out.empty()) cfg.out_dir = train_out;
      if (train_seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(train_seed);
      if (train_folds > 0) cfg.train.folds = train_folds;
      if (train_workers > 0) cfg.workers = train_workers;
      if (!train_reject_mode.empty())
        cfg.loss.reject_mode = reject_mode_from_string(train_reject_mode);
      cfg.validate();
      return cmd_train(cfg, train_force);
    }
    if (infer->parsed()) {
      RunConfig cfg = load_config_with_default(infer_config);
      if (!infer_manifest.empty()) cfg.manifest = infer_manifest;
      if (!infer_out.empty()) cfg.out_dir = infer_out;
      if (infer_lambda >= 0.0) cfg.infer_lambda = infer_lambda;
      if (infer_workers > 0) cfg.workers = infer_workers;
      return cmd_infer(cfg, infer_cancer, infer_risk);
    }
    if (eval->parsed())
      return cmd_eval(eval_predictions, eval_manifest, eval_out, eval_cam_index,
                      eval_verify);
    if (cam->parsed()) {
      CamRequest request;
      request.risk_ckpt = cam_ckpt;
      request.manifest = cam_manifest;
      request.out_dir = cam_out;
      request.refs = cam_refs;
      request.pipeline = load_config_with_default(cam_config);
      if (!cam_class.empty()) {
        if (cam_class == "low") request.target_class = 0;
        else if (cam_class == "intermediate") request.target_class = 1;
        else if (cam_class == "high") request.target_class = 2;
        else throw ConfigError("cam: --class must be low|intermediate|high");
      }
      return cmd_cam(request);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
