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

// Procedural slide generator: pink-tinted tissue on a white background,
// elliptical cancer regions with class-dependent texture (nuclear density,
// tubule rings, mitosis marks), and pixel-exact cancer masks. The textures
// are deliberately caricatures tuned for separability, not renderings of
// real histology; they exist so the end-to-end pipeline has a controllable
// oracle in place of the private clinical dataset.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/image.hpp"
#include "wsirisk/labeling.hpp"
#include "wsirisk/manifest.hpp"
#include "wsirisk/parallel.hpp"
#include "wsirisk/png_io.hpp"
#include "wsirisk/rng.hpp"

namespace wsirisk {

/// Texture recipe for one risk class, rates per fully-cancerous 512x512
/// patch equivalent.
struct ClassTexture {
  double nuclei_per_patch = 100.0;
  double nucleus_radius_min = 4.0;
  double nucleus_radius_max = 8.0;
  double irregularity = 0.3;      // 0 = round nuclei, 1 = strongly elliptic
  double mitosis_per_patch = 0.0;
  double tubules_per_patch = 0.0;
};

struct SynthSpec {
  int slide_width = 1536;
  int slide_height = 1536;
  int regions_min = 2;
  int regions_max = 3;
  double coverage_min = 0.50;  // cancer mask fraction of the whole slide
  double coverage_max = 0.65;
  double benign_nuclei_per_patch = 1.5;
  ClassTexture low{18.0, 10.0, 14.0, 0.10, 0.0, 22.0};
  ClassTexture intermediate{190.0, 7.0, 10.0, 0.35, 2.5, 0.0};
  ClassTexture high{1900.0, 5.0, 8.0, 0.60, 10.0, 0.0};
  bool hard_boundaries = false;

  void validate() const {
    if (slide_width < 64 || slide_height < 64)
      throw ConfigError("synth: slide size too small");
    if (regions_min < 1 || regions_max < regions_min)
      throw ConfigError("synth: bad region count range");
    if (coverage_min <= 0.0 || coverage_max > 0.9 || coverage_min > coverage_max)
      throw ConfigError("synth: bad coverage range");
    const double area = static_cast<double>(slide_width) * slide_height;
    if (coverage_max * area < 1.0)
      throw ConfigError("synth: requested cancer area below one pixel");
  }

  const ClassTexture& texture(RiskCategory c) const {
    switch (c) {
      case RiskCategory::Low: return low;
      case RiskCategory::Intermediate: return intermediate;
      case RiskCategory::High: return high;
      default: throw std::invalid_argument("texture: benign has no cancer texture");
    }
  }
};

inline nlohmann::ordered_json class_texture_to_json(const ClassTexture& t) {
  return nlohmann::ordered_json{{"nuclei_per_patch", t.nuclei_per_patch},
                                {"nucleus_radius_min", t.nucleus_radius_min},
                                {"nucleus_radius_max", t.nucleus_radius_max},
                                {"irregularity", t.irregularity},
                                {"mitosis_per_patch", t.mitosis_per_patch},
                                {"tubules_per_patch", t.tubules_per_patch}};
}

inline ClassTexture class_texture_from_json(const nlohmann::json& j) {
  ClassTexture t;
  for (const auto& [key, value] : j.items()) {
    if (key == "nuclei_per_patch") t.nuclei_per_patch = value.get<double>();
    else if (key == "nucleus_radius_min") t.nucleus_radius_min = value.get<double>();
    else if (key == "nucleus_radius_max") t.nucleus_radius_max = value.get<double>();
    else if (key == "irregularity") t.irregularity = value.get<double>();
    else if (key == "mitosis_per_patch") t.mitosis_per_patch = value.get<double>();
    else if (key == "tubules_per_patch") t.tubules_per_patch = value.get<double>();
    else throw ConfigError("synth texture: unknown key '" + key + "'");
  }
  return t;
}

inline nlohmann::ordered_json synth_spec_to_json(const SynthSpec& s) {
  return nlohmann::ordered_json{{"slide_width", s.slide_width},
                                {"slide_height", s.slide_height},
                                {"regions_min", s.regions_min},
                                {"regions_max", s.regions_max},
                                {"coverage_min", s.coverage_min},
                                {"coverage_max", s.coverage_max},
                                {"benign_nuclei_per_patch", s.benign_nuclei_per_patch},
                                {"low", class_texture_to_json(s.low)},
                                {"intermediate", class_texture_to_json(s.intermediate)},
                                {"high", class_texture_to_json(s.high)},
                                {"hard_boundaries", s.hard_boundaries}};
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "slide_width") s.slide_width = value.get<int>();
    else if (key == "slide_height") s.slide_height = value.get<int>();
    else if (key == "regions_min") s.regions_min = value.get<int>();
    else if (key == "regions_max") s.regions_max = value.get<int>();
    else if (key == "coverage_min") s.coverage_min = value.get<double>();
    else if (key == "coverage_max") s.coverage_max = value.get<double>();
    else if (key == "benign_nuclei_per_patch") s.benign_nuclei_per_patch = value.get<double>();
    else if (key == "low") s.low = class_texture_from_json(value);
    else if (key == "intermediate") s.intermediate = class_texture_from_json(value);
    else if (key == "high") s.high = class_texture_from_json(value);
    else if (key == "hard_boundaries") s.hard_boundaries = value.get<bool>();
    else throw ConfigError("synth spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

namespace synth_detail {

struct Ellipse {
  double cx, cy, rx, ry, angle;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double u = (dx * ca + dy * sa) / rx;
    const double v = (-dx * sa + dy * ca) / ry;
    return u * u + v * v <= 1.0;
  }

  double bound() const { return std::max(rx, ry); }
};

inline void fill_ellipse(Image& img, const Ellipse& e,
                         const std::array<std::uint8_t, 3>& color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.bound())));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(e.cx + e.bound())));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.bound())));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(e.cy + e.bound())));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (e.contains(x, y)) {
        std::uint8_t* p = img.px(x, y);
        p[0] = color[0];
        p[1] = color[1];
        p[2] = color[2];
      }
}

inline void fill_ring(Image& img, double cx, double cy, double r_inner, double r_outer,
                      const std::array<std::uint8_t, 3>& ring,
                      const std::array<std::uint8_t, 3>& lumen) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r_outer)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + r_outer)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r_outer)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + r_outer)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 > r_outer * r_outer) continue;
      std::uint8_t* p = img.px(x, y);
      const auto& c = (d2 <= r_inner * r_inner) ? lumen : ring;
      p[0] = c[0];
      p[1] = c[1];
      p[2] = c[2];
    }
}

}  // namespace synth_detail

/// One generated slide plus its mask and debug info for the separability
/// checks (planted cancer-nucleus centers).
struct SynthSlide {
  Image image;
  Image mask;  // 0 background / 255 cancer
  int rs = 0;
  std::vector<std::pair<int, int>> cancer_nucleus_centers;
};

/// Generates one slide deterministically from (category, spec, seed).
/// RS is drawn from the category's score interval; the mask marks exactly
/// the cancer regions.
inline SynthSlide generate_slide(RiskCategory category, const SynthSpec& spec,
                                 std::uint64_t seed) {
  if (category == RiskCategory::Benign)
    throw std::invalid_argument("generate_slide: slides carry an RS, benign has none");
  spec.validate();
  Rng rng(derive_seed(seed, 0x736c6964));  // per-slide stream

  const int w = spec.slide_width;
  const int h = spec.slide_height;
  SynthSlide out;
  out.image = Image::rgb(w, h);
  out.mask = Image::gray(w, h);

  // RS within the category interval.
  int rs_lo = 0, rs_hi = 0;
  switch (category) {
    case RiskCategory::Low:
      rs_lo = spec.hard_boundaries ? 16 : 0;
      rs_hi = 17;
      break;
    case RiskCategory::Intermediate:
      rs_lo = 18;
      rs_hi = spec.hard_boundaries ? 19 : 31;
      break;
    default:
      rs_lo = 32;
      rs_hi = spec.hard_boundaries ? 33 : 100;
      break;
  }
  out.rs = static_cast<int>(rng.uniform_int(rs_lo, rs_hi));

  // White glass background, elliptical tissue region with a pale pink tint.
  std::fill(out.image.data.begin(), out.image.data.end(), 255);
  const synth_detail::Ellipse tissue{w / 2.0, h / 2.0, w * 0.46, h * 0.46, 0.0};
  const std::array<std::uint8_t, 3> tint{230, 180, 205};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (tissue.contains(x, y)) {
        std::uint8_t* p = out.image.px(x, y);
        const int jitter = static_cast<int>(rng.uniform_int(-5, 5));
        p[0] = clamp_u8(tint[0] + jitter);
        p[1] = clamp_u8(tint[1] + jitter);
        p[2] = clamp_u8(tint[2] + jitter);
      }

  // Cancer regions: ellipses sized to a coverage target, clipped to tissue.
  const double target_coverage = rng.uniform(spec.coverage_min, spec.coverage_max);
  const double slide_area = static_cast<double>(w) * h;
  const int region_count =
      static_cast<int>(rng.uniform_int(spec.regions_min, spec.regions_max));
  std::vector<synth_detail::Ellipse> regions;
  for (int r = 0; r < region_count; ++r) {
    const double cx = rng.uniform(w * 0.30, w * 0.70);
    const double cy = rng.uniform(h * 0.30, h * 0.70);
    const double aspect = rng.uniform(0.7, 1.4);
    regions.push_back({cx, cy, 100.0 * aspect, 100.0 / aspect,
                       rng.uniform(0.0, 3.14159265)});
  }
  auto draw_mask = [&]() -> double {
    std::fill(out.mask.data.begin(), out.mask.data.end(), 0);
    std::uint64_t covered = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!tissue.contains(x, y)) continue;
        for (const auto& e : regions)
          if (e.contains(x, y)) {
            out.mask.at(x, y, 0) = 255;
            ++covered;
            break;
          }
      }
    return static_cast<double>(covered) / slide_area;
  };
  // Scale radii toward the target; a couple of corrections absorb overlap
  // and tissue clipping.
  double scale_area = 0.0;
  for (const auto& e : regions) scale_area += 3.14159265 * e.rx * e.ry;
  double factor = std::sqrt(target_coverage * slide_area / scale_area);
  for (auto& e : regions) {
    e.rx *= factor;
    e.ry *= factor;
  }
  double coverage = draw_mask();
  for (int attempt = 0; attempt < 4; ++attempt) {
    if (std::abs(coverage - target_coverage) <= 0.05 * target_coverage) break;
    factor = std::sqrt(target_coverage / std::max(coverage, 1e-6));
    for (auto& e : regions) {
      e.rx = std::min(e.rx * factor, w * 0.48);
      e.ry = std::min(e.ry * factor, h * 0.48);
    }
    coverage = draw_mask();
  }

  auto inside_cancer = [&](int x, int y) {
    return out.mask.in_bounds(x, y) && out.mask.at(x, y, 0) != 0;
  };

  const double patch_area = 512.0 * 512.0;
  const std::array<std::uint8_t, 3> lumen{252, 246, 250};

  // Benign tissue texture: sparse round nuclei outside the cancer regions.
  {
    const double tissue_area = 3.14159265 * tissue.rx * tissue.ry * (1.0 - coverage);
    const int count =
        static_cast<int>(std::lround(spec.benign_nuclei_per_patch * tissue_area / patch_area));
    for (int i = 0; i < count; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double x = rng.uniform(0, w);
        const double y = rng.uniform(0, h);
        if (!tissue.contains(x, y) || inside_cancer(static_cast<int>(x), static_cast<int>(y)))
          continue;
        const double r = rng.uniform(4.0, 7.0);
        const std::array<std::uint8_t, 3> color{
            clamp_u8(175 + rng.uniform_int(-15, 15)),
            clamp_u8(145 + rng.uniform_int(-10, 10)),
            clamp_u8(195 + rng.uniform_int(-15, 15))};
        synth_detail::fill_ellipse(out.image, {x, y, r, r, 0.0}, color);
        break;
      }
    }
  }

  // Cancer texture per region, rates scaled by region area.
  const ClassTexture& tex = spec.texture(category);
  std::uint64_t mask_pixels = 0;
  for (const auto v : out.mask.data) mask_pixels += (v != 0) ? 1 : 0;
  const double cancer_area = static_cast<double>(mask_pixels);

  // Slide-wide rejection keeps point density uniform over the cancer union.
  auto sample_cancer_point = [&](double& x, double& y) {
    for (int attempt = 0; attempt < 80; ++attempt) {
      x = rng.uniform(0, w);
      y = rng.uniform(0, h);
      if (inside_cancer(static_cast<int>(x), static_cast<int>(y))) return true;
    }
    return false;
  };

  const int tubules = static_cast<int>(std::lround(tex.tubules_per_patch * cancer_area / patch_area));
  for (int i = 0; i < tubules; ++i) {
    double x, y;
    if (!sample_cancer_point(x, y)) continue;
    const double r_outer = rng.uniform(20.0, 30.0);
    synth_detail::fill_ring(out.image, x, y, r_outer - 6.0, r_outer,
                            {150, 110, 170}, lumen);
  }

  const int nuclei = static_cast<int>(std::lround(tex.nuclei_per_patch * cancer_area / patch_area));
  for (int i = 0; i < nuclei; ++i) {
    double x, y;
    if (!sample_cancer_point(x, y)) continue;
    const double base_r = rng.uniform(tex.nucleus_radius_min, tex.nucleus_radius_max);
    const double squeeze = 1.0 + tex.irregularity * rng.uniform(0.0, 1.5);
    const std::array<std::uint8_t, 3> color{
        clamp_u8(175 + rng.uniform_int(-18, 18)),
        clamp_u8(145 + rng.uniform_int(-12, 12)),
        clamp_u8(195 + rng.uniform_int(-18, 18))};
    synth_detail::fill_ellipse(
        out.image,
        {x, y, base_r * squeeze, base_r / squeeze, rng.uniform(0.0, 3.14159265)}, color);
    out.cancer_nucleus_centers.push_back({static_cast<int>(x), static_cast<int>(y)});
  }

  const int mitoses = static_cast<int>(std::lround(tex.mitosis_per_patch * cancer_area / patch_area));
  for (int i = 0; i < mitoses; ++i) {
    double x, y;
    if (!sample_cancer_point(x, y)) continue;
    synth_detail::fill_ellipse(out.image, {x, y, 5.5, 5.5, 0.0}, {60, 40, 85});
    synth_detail::fill_ellipse(out.image, {x, y, 2.2, 2.2, 0.0}, {235, 230, 240});
  }

  return out;
}

struct CorpusRequest {
  int n_patients = 50;
  int slides_per_patient = 1;
  std::array<int, 3> mix{5, 3, 2};  // low : intermediate : high
  SynthSpec spec;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Patient counts per class by largest remainder on the mix weights.
inline std::array<int, 3> patients_per_class(int n_patients, const std::array<int, 3>& mix) {
  const int weight_sum = mix[0] + mix[1] + mix[2];
  if (weight_sum <= 0) throw ConfigError("synth: class mix weights must sum > 0");
  std::array<int, 3> counts{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int c = 0; c < 3; ++c) {
    const double exact = static_cast<double>(n_patients) * mix[c] / weight_sum;
    counts[c] = static_cast<int>(std::floor(exact));
    remainder[c] = exact - counts[c];
    assigned += counts[c];
  }
  while (assigned < n_patients) {
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (remainder[c] > remainder[best]) best = c;
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

/// Writes slides/, masks/, manifest.csv and synth_spec.json under out_dir.
/// Patients carry one category and one RS shared by all their slides.
inline Manifest generate_corpus(const std::string& out_dir, const CorpusRequest& req) {
  if (req.n_patients < 1) throw ConfigError("synth: need at least one patient");
  if (req.slides_per_patient < 1) throw ConfigError("synth: need at least one slide per patient");
  req.spec.validate();

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "slides");
  fs::create_directories(fs::path(out_dir) / "masks");

  const std::array<int, 3> per_class = patients_per_class(req.n_patients, req.mix);
  std::vector<RiskCategory> patient_category;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class[c]; ++i)
      patient_category.push_back(static_cast<RiskCategory>(c + 1));

  Manifest manifest;
  const int total_slides = req.n_patients * req.slides_per_patient;
  manifest.resize(static_cast<std::size_t>(total_slides));

  parallel_for(static_cast<std::size_t>(total_slides), req.workers, [&](std::size_t slide_index) {
    const int patient = static_cast<int>(slide_index) / req.slides_per_patient;
    const RiskCategory category = patient_category[static_cast<std::size_t>(patient)];
    SynthSlide slide =
        generate_slide(category, req.spec, derive_seed(req.seed, 0x736c, slide_index));
    // Slides of one patient share the patient's RS draw.
    Rng patient_rng(derive_seed(req.seed, 0x706174, static_cast<std::uint64_t>(patient)));
    int rs_lo = 0, rs_hi = 0;
    switch (category) {
      case RiskCategory::Low: rs_lo = req.spec.hard_boundaries ? 16 : 0; rs_hi = 17; break;
      case RiskCategory::Intermediate: rs_lo = 18; rs_hi = req.spec.hard_boundaries ? 19 : 31; break;
      default: rs_lo = 32; rs_hi = req.spec.hard_boundaries ? 33 : 100; break;
    }
    const int rs = static_cast<int>(patient_rng.uniform_int(rs_lo, rs_hi));

    char slide_name[16];
    std::snprintf(slide_name, sizeof(slide_name), "S%04d", static_cast<int>(slide_index));
    char patient_name[16];
    std::snprintf(patient_name, sizeof(patient_name), "P%03d", patient);

    const std::string image_rel = std::string("slides/") + slide_name + ".png";
    const std::string mask_rel = std::string("masks/") + slide_name + "_mask.png";
    write_png((fs::path(out_dir) / image_rel).string(), slide.image);
    write_png((fs::path(out_dir) / mask_rel).string(), slide.mask);

    SlideManifestEntry entry;
    entry.slide_id = slide_name;
    entry.patient_id = patient_name;
    entry.rs_score = rs;
    entry.grade = static_cast<int>(category);  // Low->1, Intermediate->2, High->3
    entry.image_path = image_rel;
    entry.mask_path = mask_rel;
    manifest[slide_index] = entry;
  });

  save_manifest_csv((fs::path(out_dir) / "manifest.csv").string(), manifest);

  nlohmann::ordered_json provenance;
  provenance["seed"] = req.seed;
  provenance["n_patients"] = req.n_patients;
  provenance["slides_per_patient"] = req.slides_per_patient;
  provenance["mix"] = req.mix;
  provenance["patients_per_class"] = per_class;
  provenance["spec"] = synth_spec_to_json(req.spec);
  std::ofstream f((fs::path(out_dir) / "synth_spec.json").string(), std::ios::trunc);
  f << provenance.dump(2) << "\n";

  return manifest;
}

}  // namespace wsirisk
