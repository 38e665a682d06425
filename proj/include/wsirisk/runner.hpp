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

// Run orchestration shared by the CLI subcommands and the acceptance suite.
// Every run writes a run.json with the resolved configuration and tool
// version (no timestamps), so identical configs rerun to identical bytes.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/checkpoint.hpp"
#include "wsirisk/config.hpp"
#include "wsirisk/explain.hpp"
#include "wsirisk/labeling.hpp"
#include "wsirisk/paper_tables.hpp"
#include "wsirisk/report.hpp"
#include "wsirisk/synthgen.hpp"
#include "wsirisk/train.hpp"

namespace wsirisk {

namespace runner_detail {

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  f << content;
}

inline void write_run_json(const std::string& out_dir, const std::string& command,
                           const nlohmann::ordered_json& config) {
  nlohmann::ordered_json j;
  j["tool"] = "wsirisk";
  j["version"] = std::string(kVersion);
  j["command"] = command;
  j["config"] = config;
  write_text((std::filesystem::path(out_dir) / "run.json").string(), j.dump(2) + "\n");
}

}  // namespace runner_detail

/// `synth`: generate a corpus under out_dir.
inline Manifest run_synth(const std::string& out_dir, const CorpusRequest& request) {
  std::filesystem::create_directories(out_dir);
  nlohmann::ordered_json config;
  config["out_dir"] = out_dir;
  config["seed"] = request.seed;
  config["n_patients"] = request.n_patients;
  config["slides_per_patient"] = request.slides_per_patient;
  config["mix"] = request.mix;
  config["workers"] = request.workers;
  config["spec"] = synth_spec_to_json(request.spec);
  const Manifest manifest = generate_corpus(out_dir, request);
  runner_detail::write_run_json(out_dir, "synth", config);
  return manifest;
}

struct TrainOutcome {
  CvResult cv;
  nlohmann::ordered_json report;
  std::string out_dir;
};

/// `train`: k-fold cross-validation, checkpoints, logs, pooled predictions
/// and the report bundle. Refuses to overwrite an existing run without
/// force.
inline TrainOutcome run_train(const RunConfig& cfg, bool force = false) {
  cfg.validate();
  if (cfg.manifest.empty()) throw ConfigError("train: manifest path required");
  if (cfg.out_dir.empty()) throw ConfigError("train: out_dir required");
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  if (fs::exists(out / "run.json") && !force)
    throw ConfigError("train: output directory already holds a run (use --force)");
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "logs");
  fs::create_directories(out / "predictions");
  fs::create_directories(out / "report");

  const Manifest manifest = load_manifest(cfg.manifest);
  if (manifest.empty()) throw ConfigError("train: manifest has no slides");

  TrainOutcome outcome;
  outcome.out_dir = cfg.out_dir;
  outcome.cv = run_cv(manifest, cfg.manifest, cfg);

  runner_detail::write_text((out / "folds.json").string(),
                            fold_split_to_json(outcome.cv.split).dump(2) + "\n");

  std::string log_lines;
  for (const auto& models : outcome.cv.fold_models)
    for (const auto& entry : models.log) log_lines += entry.dump() + "\n";
  runner_detail::write_text((out / "logs" / "train_log.jsonl").string(), log_lines);

  for (std::size_t f = 0; f < outcome.cv.fold_models.size(); ++f) {
    const auto& models = outcome.cv.fold_models[f];
    save_checkpoint((out / "checkpoints" /
                     ("fold" + std::to_string(f) + "_cancer.ckpt")).string(),
                    models.cancer);
    save_checkpoint((out / "checkpoints" /
                     ("fold" + std::to_string(f) + "_risk.ckpt")).string(),
                    models.risk);
  }

  write_patch_csv((out / "predictions" / "patch_predictions.csv").string(),
                  outcome.cv.patches);
  write_wsi_json((out / "predictions" / "wsi_predictions.json").string(),
                 outcome.cv.slides);

  outcome.report = build_report(outcome.cv.patches, outcome.cv.slides);
  write_report_bundle((out / "report").string(), outcome.report);
  runner_detail::write_run_json(cfg.out_dir, "train", run_config_to_json(cfg));
  return outcome;
}

struct InferOutcome {
  std::vector<ScoredPatch> patches;
  std::vector<ScoredSlide> slides;
};

/// `infer`: standalone inference of given checkpoints over a manifest.
inline InferOutcome run_infer(const RunConfig& cfg, const std::string& cancer_ckpt,
                              const std::string& risk_ckpt) {
  cfg.validate();
  if (cfg.manifest.empty()) throw ConfigError("infer: manifest path required");
  if (cfg.out_dir.empty()) throw ConfigError("infer: out_dir required");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const Checkpoint cancer = load_checkpoint(cancer_ckpt);
  const Checkpoint risk = load_checkpoint(risk_ckpt);
  if (cancer.config.num_classes != 2)
    throw ConfigError("infer: cancer checkpoint must be a 2-class gate");
  if (risk.config.num_classes != 3)
    throw ConfigError("infer: risk checkpoint must be a 3-class head");
  if (cancer.config.input_size != cfg.input_size ||
      risk.config.input_size != cfg.input_size)
    throw ConfigError("infer: config input_size does not match checkpoints");

  const Manifest manifest = load_manifest(cfg.manifest);
  const std::vector<SlideData> slides = load_all_slides(manifest, cfg.manifest, cfg);

  InferOutcome outcome;
  const double lambda = cfg.effective_infer_lambda();
  std::vector<InferOutcome> slots(slides.size());
  parallel_for(slides.size(), cfg.workers, [&](std::size_t i) {
    const SlideData& slide = slides[i];
    std::vector<const PatchSample*> samples;
    for (const auto& p : slide.patches) samples.push_back(&p);
    auto preds = predict_patches(cancer, risk, samples);
    select_patches(preds, lambda);
    for (std::size_t j = 0; j < preds.size(); ++j)
      slots[i].patches.push_back(
          ScoredPatch{preds[j], slide.patches[j].label, slide.entry.slide_id, -1});
    ScoredSlide scored;
    scored.pred = aggregate_wsi(slide.entry.slide_id, preds);
    scored.true_category = bin_rs(slide.entry.rs_score);
    scored.rs = slide.entry.rs_score;
    scored.grade = slide.entry.grade;
    scored.cancer_area_fraction = slide.cancer_area_fraction;
    scored.fold = -1;
    slots[i].slides.push_back(std::move(scored));
  });
  for (auto& slot : slots) {
    outcome.patches.insert(outcome.patches.end(), slot.patches.begin(), slot.patches.end());
    outcome.slides.insert(outcome.slides.end(), slot.slides.begin(), slot.slides.end());
  }

  const fs::path out(cfg.out_dir);
  write_patch_csv((out / "patch_predictions.csv").string(), outcome.patches);
  write_wsi_json((out / "wsi_predictions.json").string(), outcome.slides);
  nlohmann::ordered_json config = run_config_to_json(cfg);
  config["cancer_ckpt"] = cancer_ckpt;
  config["risk_ckpt"] = risk_ckpt;
  runner_detail::write_run_json(cfg.out_dir, "infer", config);
  return outcome;
}

/// `eval`: report bundle from a wsi_predictions.json and the manifest.
/// An optional cam index.json is embedded so the report references the
/// rendered heatmap paths.
inline nlohmann::ordered_json run_eval(const std::string& predictions_path,
                                       const std::string& manifest_path,
                                       const std::string& out_dir,
                                       const std::string& cam_index_path = "") {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ifstream f(predictions_path);
  if (!f) throw IoError("eval: cannot open " + predictions_path);
  nlohmann::json arr;
  try {
    f >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("eval: bad JSON in " + predictions_path + ": " + e.what());
  }
  if (!arr.is_array()) throw ConfigError("eval: predictions must be a JSON array");

  const Manifest manifest = load_manifest(manifest_path);
  std::map<std::string, const SlideManifestEntry*> by_id;
  for (const auto& e : manifest) by_id[e.slide_id] = &e;

  std::vector<ScoredSlide> slides;
  for (const auto& rec : arr) {
    ScoredSlide s;
    s.pred.slide_id = rec.at("slide_id").get<std::string>();
    const std::string status = rec.at("status").get<std::string>();
    s.pred.status = (status == "ok") ? WsiStatus::kOk : WsiStatus::kNoCancerPatches;
    if (s.pred.status == WsiStatus::kOk) {
      const std::string cat = rec.at("category").get<std::string>();
      if (cat == "Low") s.pred.category = RiskCategory::Low;
      else if (cat == "Intermediate") s.pred.category = RiskCategory::Intermediate;
      else if (cat == "High") s.pred.category = RiskCategory::High;
      else throw ConfigError("eval: bad category '" + cat + "'");
    }
    const auto& t = rec.at("tallies");
    s.pred.tallies = {t.at("low").get<int>(), t.at("intermediate").get<int>(),
                      t.at("high").get<int>()};
    s.pred.accepted = rec.at("accepted").get<int>();
    s.pred.rejected = rec.at("rejected").get<int>();
    s.pred.benign_predicted = rec.at("benign_predicted").get<int>();
    s.pred.tissue_patches = rec.at("tissue_patches").get<int>();
    s.cancer_area_fraction = rec.value("cancer_area_fraction", 0.0);
    const auto it = by_id.find(s.pred.slide_id);
    if (it == by_id.end())
      throw ConfigError("eval: slide " + s.pred.slide_id + " missing from manifest");
    s.rs = it->second->rs_score;
    s.grade = it->second->grade;
    s.true_category = bin_rs(s.rs);
    slides.push_back(std::move(s));
  }

  nlohmann::ordered_json report = build_report({}, slides);
  if (!cam_index_path.empty()) {
    std::ifstream cam_file(cam_index_path);
    if (!cam_file) throw IoError("eval: cannot open cam index " + cam_index_path);
    nlohmann::json cam_index;
    try {
      cam_file >> cam_index;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("eval: bad cam index JSON: " + std::string(e.what()));
    }
    report["heatmaps"] = cam_index;
  } else {
    report["heatmaps"] = nullptr;
  }
  write_report_bundle(out_dir, report);
  nlohmann::ordered_json config;
  config["predictions"] = predictions_path;
  config["manifest"] = manifest_path;
  config["out_dir"] = out_dir;
  runner_detail::write_run_json(out_dir, "eval", config);
  return report;
}

/// `eval --verify-paper-tables`: prints one line per embedded-table check.
/// Returns true when every non-flagged check passes and both known
/// discrepancies were flagged.
inline bool run_verify_paper_tables(std::FILE* stream = stdout) {
  const paper::VerifyResult result = paper::verify_paper_tables();
  for (const auto& line : result.checks) {
    if (line.flagged) {
      std::fprintf(stream,
                   "[FLAG] %-28s published %.3f vs matrix-derived %.3f (%s)\n",
                   line.name.c_str(), line.expected, line.computed, line.note.c_str());
    } else {
      std::fprintf(stream, "[%s] %-28s expected %.6f computed %.6f (tol %.0e)\n",
                   line.pass ? "PASS" : "FAIL", line.name.c_str(), line.expected,
                   line.computed, line.tolerance);
    }
  }
  std::fprintf(stream, "verify-paper-tables: %s, %d flagged discrepancies\n",
               result.all_ok ? "all checks passed" : "CHECK FAILURES",
               result.flagged_count);
  return result.all_ok && result.flagged_count == 2;
}

struct CamRequest {
  std::string risk_ckpt;
  std::string manifest;
  std::string out_dir;
  std::vector<std::string> refs;  // "slide_id:x:y"
  int target_class = -1;          // -1 = predicted class
  RunConfig pipeline;             // patch_size / stride / tissue knobs
};

struct CamOutcome {
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  int errors = 0;
};

/// `cam`: overlay PNG per requested patch plus an index JSON. Bad refs
/// produce per-item error entries, not a global failure.
inline CamOutcome run_cam(const CamRequest& request) {
  namespace fs = std::filesystem;
  fs::create_directories(request.out_dir);
  const Checkpoint risk = load_checkpoint(request.risk_ckpt);
  if (risk.config.num_classes != 3)
    throw ConfigError("cam: risk checkpoint must be a 3-class head");
  const Manifest manifest = load_manifest(request.manifest);
  std::map<std::string, const SlideManifestEntry*> by_id;
  for (const auto& e : manifest) by_id[e.slide_id] = &e;

  CamOutcome outcome;
  int item = 0;
  for (const auto& ref_str : request.refs) {
    nlohmann::ordered_json entry;
    entry["ref"] = ref_str;
    auto fail = [&](const std::string& why) {
      entry["status"] = "error";
      entry["error"] = why;
      ++outcome.errors;
      outcome.index.push_back(entry);
    };

    // Parse "slide_id:x:y".
    const auto c1 = ref_str.find(':');
    const auto c2 = (c1 == std::string::npos) ? std::string::npos
                                              : ref_str.find(':', c1 + 1);
    if (c2 == std::string::npos) {
      fail("expected slide_id:x:y");
      ++item;
      continue;
    }
    const std::string slide_id = ref_str.substr(0, c1);
    int x = 0, y = 0;
    try {
      x = std::stoi(ref_str.substr(c1 + 1, c2 - c1 - 1));
      y = std::stoi(ref_str.substr(c2 + 1));
    } catch (const std::exception&) {
      fail("bad coordinates");
      ++item;
      continue;
    }
    const auto it = by_id.find(slide_id);
    if (it == by_id.end()) {
      fail("slide not in manifest");
      ++item;
      continue;
    }
    Image slide;
    try {
      slide = read_png(resolve_manifest_path(request.manifest, it->second->image_path));
    } catch (const IoError& e) {
      fail(e.what());
      ++item;
      continue;
    }
    const int size = request.pipeline.patch_size;
    if (x < 0 || y < 0 || x + size > slide.width || y + size > slide.height) {
      fail("patch out of slide bounds");
      ++item;
      continue;
    }
    const Image patch = copy_window(slide, x, y, size, size);
    const Image input =
        bilinear_resize(patch, risk.config.input_size, risk.config.input_size);

    int target = request.target_class;
    if (target < 0) {
      Tensor<float> batch({1, 3, risk.config.input_size, risk.config.input_size});
      train_detail::fill_input_row(batch, 0, input);
      ForwardCache<float> cache;
      forward(risk.params, risk.config, batch, cache);
      double probs[3];
      for (int k = 0; k < 3; ++k) probs[k] = cache.probs[k];
      target = train_detail::argmax_tie_high(probs, 3);
    }
    const Heatmap heat = grad_cam_for_patch(risk, input, target);
    const Image overlay = render_overlay(patch, heat);
    char name[64];
    std::snprintf(name, sizeof(name), "cam_%03d_%s_%d_%d.png", item, slide_id.c_str(),
                  x, y);
    write_png((fs::path(request.out_dir) / name).string(), overlay);
    entry["status"] = "ok";
    entry["file"] = name;
    entry["target_class"] =
        to_string(static_cast<RiskCategory>(target + 1));
    outcome.index.push_back(entry);
    ++item;
  }
  runner_detail::write_text(
      (fs::path(request.out_dir) / "index.json").string(), outcome.index.dump(2) + "\n");
  nlohmann::ordered_json config;
  config["risk_ckpt"] = request.risk_ckpt;
  config["manifest"] = request.manifest;
  config["out_dir"] = request.out_dir;
  config["refs"] = request.refs;
  config["target_class"] = request.target_class;
  runner_detail::write_run_json(request.out_dir, "cam", config);
  return outcome;
}

}  // namespace wsirisk
