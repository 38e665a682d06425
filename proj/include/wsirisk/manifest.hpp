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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"

namespace wsirisk {

/// One slide record: identity, patient grouping key, recurrence score,
/// optional histologic grade (0 = absent), and image/mask paths.
struct SlideManifestEntry {
  std::string slide_id;
  std::string patient_id;
  int rs_score = 0;
  int grade = 0;  // 0 = not annotated, otherwise 1..3
  std::string image_path;
  std::string mask_path;
};

using Manifest = std::vector<SlideManifestEntry>;

inline void validate_entry(const SlideManifestEntry& e) {
  if (e.slide_id.empty()) throw ConfigError("manifest: empty slide_id");
  if (e.patient_id.empty())
    throw ConfigError("manifest: empty patient_id for slide " + e.slide_id);
  if (e.rs_score < 0 || e.rs_score > 100)
    throw ConfigError("manifest: rs_score out of [0,100] for slide " + e.slide_id);
  if (e.grade < 0 || e.grade > 3)
    throw ConfigError("manifest: grade out of {empty,1,2,3} for slide " + e.slide_id);
}

inline const char* kManifestCsvHeader =
    "slide_id,patient_id,rs_score,grade,image_path,mask_path";

namespace manifest_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline int parse_int_field(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("manifest: bad integer '" + s + "' for " + what);
  }
}

}  // namespace manifest_detail

inline Manifest load_manifest_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("manifest: empty file " + path);
  Manifest out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = manifest_detail::split_csv_line(line);
    if (fields.size() != 6)
      throw ConfigError("manifest: line " + std::to_string(lineno) + " of " + path +
                        " has " + std::to_string(fields.size()) + " fields, expected 6");
    SlideManifestEntry e;
    e.slide_id = fields[0];
    e.patient_id = fields[1];
    e.rs_score = manifest_detail::parse_int_field(fields[2], "rs_score");
    e.grade = fields[3].empty() ? 0 : manifest_detail::parse_int_field(fields[3], "grade");
    e.image_path = fields[4];
    e.mask_path = fields[5];
    validate_entry(e);
    out.push_back(std::move(e));
  }
  return out;
}

inline Manifest load_manifest_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_manifest: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest: bad JSON in " + path + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError("manifest: top-level JSON array expected");
  Manifest out;
  for (const auto& rec : j) {
    SlideManifestEntry e;
    e.slide_id = rec.at("slide_id").get<std::string>();
    e.patient_id = rec.at("patient_id").get<std::string>();
    e.rs_score = rec.at("rs_score").get<int>();
    e.grade = rec.contains("grade") && !rec["grade"].is_null() ? rec["grade"].get<int>() : 0;
    e.image_path = rec.at("image_path").get<std::string>();
    e.mask_path = rec.at("mask_path").get<std::string>();
    validate_entry(e);
    out.push_back(std::move(e));
  }
  return out;
}

inline Manifest load_manifest(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".json") return load_manifest_json(path);
  return load_manifest_csv(path);
}

inline void save_manifest_csv(const std::string& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("save_manifest: cannot open " + path);
  f << kManifestCsvHeader << "\n";
  for (const auto& e : manifest) {
    f << e.slide_id << ',' << e.patient_id << ',' << e.rs_score << ',';
    if (e.grade > 0) f << e.grade;
    f << ',' << e.image_path << ',' << e.mask_path << "\n";
  }
}

/// Resolves a manifest-relative path against the manifest's directory.
inline std::string resolve_manifest_path(const std::string& manifest_path,
                                         const std::string& entry_path) {
  const std::filesystem::path p(entry_path);
  if (p.is_absolute()) return entry_path;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace wsirisk
