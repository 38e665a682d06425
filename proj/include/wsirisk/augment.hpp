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

// Seeded color augmentations: solarize, posterize, hue/saturation, grayscale.
// The full pipeline is a pure function of (patch, spec, seed, index), so
// augmented views are reproducible regardless of scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/image.hpp"
#include "wsirisk/rng.hpp"
#include "wsirisk/slide.hpp"

namespace wsirisk {

/// Transform parameters and application probabilities. Transforms apply in
/// the fixed order: solarize, posterize, hue/saturation, grayscale.
struct AugmentSpec {
  double solarize_p = 0.3;
  int solarize_threshold = 128;  // 256 disables even when the gate fires
  double posterize_p = 0.3;
  int posterize_bits = 4;
  double hue_sat_p = 0.3;
  double hue_max_deg = 18.0;   // shift drawn uniformly in [-hue_max, hue_max]
  double sat_min = 0.7;        // scale drawn uniformly in [sat_min, sat_max]
  double sat_max = 1.3;
  double grayscale_p = 0.3;
  std::uint64_t master_seed = 0;

  void validate() const {
    for (const double p : {solarize_p, posterize_p, hue_sat_p, grayscale_p})
      if (p < 0.0 || p > 1.0) throw ConfigError("augment: probability out of [0,1]");
    if (solarize_threshold < 0 || solarize_threshold > 256)
      throw ConfigError("augment: solarize_threshold out of [0,256]");
    if (posterize_bits < 1 || posterize_bits > 8)
      throw ConfigError("augment: posterize_bits out of [1,8]");
    if (hue_max_deg < 0.0 || hue_max_deg > 180.0)
      throw ConfigError("augment: hue_max_deg out of [0,180]");
    if (sat_min < 0.0 || sat_max > 2.0 || sat_min > sat_max)
      throw ConfigError("augment: saturation range out of [0,2] or inverted");
  }

  static AugmentSpec disabled() {
    AugmentSpec s;
    s.solarize_p = s.posterize_p = s.hue_sat_p = s.grayscale_p = 0.0;
    return s;
  }
};

/// Replaces every pixel with its Rec.601 luminance. Idempotent.
inline Image to_grayscale(const Image& patch) {
  Image out = patch;
  if (patch.channels != 3) return out;
  std::uint8_t* p = out.data.data();
  const std::size_t n = out.pixel_count();
  for (std::size_t i = 0; i < n; ++i, p += 3) {
    const std::uint8_t l = luma_u8(p[0], p[1], p[2]);
    p[0] = p[1] = p[2] = l;
  }
  return out;
}

/// Inverts every channel value at or above the threshold. threshold 0 is a
/// full inversion (an involution); 256 is the identity.
inline Image solarize(const Image& patch, int threshold) {
  if (threshold < 0 || threshold > 256)
    throw std::invalid_argument("solarize: threshold out of [0,256]");
  Image out = patch;
  for (auto& v : out.data)
    if (v >= threshold) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

/// Keeps the top `bits` bits of each channel.
inline Image posterize(const Image& patch, int bits) {
  if (bits < 1 || bits > 8) throw std::invalid_argument("posterize: bits out of [1,8]");
  const std::uint8_t mask = static_cast<std::uint8_t>(0xff << (8 - bits));
  Image out = patch;
  for (auto& v : out.data) v = static_cast<std::uint8_t>(v & mask);
  return out;
}

namespace hsv_detail {

struct Hsv {
  double h;  // [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

inline Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, 0.0, mx};
  if (d > 0.0) {
    if (mx == r)
      out.h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
    else if (mx == g)
      out.h = 60.0 * ((b - r) / d + 2.0);
    else
      out.h = 60.0 * ((r - g) / d + 4.0);
  }
  if (mx > 0.0) out.s = d / mx;
  return out;
}

inline void hsv_to_rgb(const Hsv& hsv, std::uint8_t& r8, std::uint8_t& g8,
                       std::uint8_t& b8) {
  const double c = hsv.v * hsv.s;
  const double hp = hsv.h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = hsv.v - c;
  r8 = clamp_u8(std::round((r + m) * 255.0));
  g8 = clamp_u8(std::round((g + m) * 255.0));
  b8 = clamp_u8(std::round((b + m) * 255.0));
}

}  // namespace hsv_detail

/// Shifts hue (degrees, modulo 360) and scales saturation (clamped to [0,1])
/// in HSV space, reconverting with round-to-nearest.
inline Image hue_saturation(const Image& patch, double hue_shift_deg, double sat_scale) {
  if (hue_shift_deg < -180.0 || hue_shift_deg > 180.0)
    throw std::invalid_argument("hue_saturation: hue shift out of [-180,180]");
  if (sat_scale < 0.0 || sat_scale > 2.0)
    throw std::invalid_argument("hue_saturation: sat scale out of [0,2]");
  Image out = patch;
  if (patch.channels != 3) return out;
  std::uint8_t* p = out.data.data();
  const std::size_t n = out.pixel_count();
  for (std::size_t i = 0; i < n; ++i, p += 3) {
    auto hsv = hsv_detail::rgb_to_hsv(p[0], p[1], p[2]);
    hsv.h = std::fmod(hsv.h + hue_shift_deg + 360.0, 360.0);
    hsv.s = std::min(1.0, std::max(0.0, hsv.s * sat_scale));
    hsv_detail::hsv_to_rgb(hsv, p[0], p[1], p[2]);
  }
  return out;
}

/// One draw of the augmentation pipeline. Gate uniforms and parameters are
/// consumed in a fixed order so the output is a pure function of the
/// generator state.
inline Image apply_augmentations(const Image& patch, const AugmentSpec& spec, Rng& rng) {
  Image out = patch;
  if (rng.next_double() < spec.solarize_p) out = solarize(out, spec.solarize_threshold);
  if (rng.next_double() < spec.posterize_p) out = posterize(out, spec.posterize_bits);
  if (rng.next_double() < spec.hue_sat_p) {
    const double hue = rng.uniform(-spec.hue_max_deg, spec.hue_max_deg);
    const double sat = rng.uniform(spec.sat_min, spec.sat_max);
    out = hue_saturation(out, hue, sat);
  }
  if (rng.next_double() < spec.grayscale_p) out = to_grayscale(out);
  return out;
}

/// Deterministic single view for a (spec, seed, patch index, view index)
/// tuple; identical tuples produce bit-identical pixels.
inline Image augment_view(const Image& patch, const AugmentSpec& spec,
                          std::uint64_t seed, std::uint64_t patch_index,
                          std::uint64_t view_index) {
  Rng rng(derive_seed(seed, patch_index, view_index));
  return apply_augmentations(patch, spec, rng);
}

/// Two independent draws from decorrelated substreams of `seed`.
inline std::pair<Image, Image> two_views(const Image& patch, const AugmentSpec& spec,
                                         std::uint64_t seed) {
  return {augment_view(patch, spec, seed, 0, 0), augment_view(patch, spec, seed, 0, 1)};
}

inline nlohmann::ordered_json augment_spec_to_json(const AugmentSpec& s) {
  return nlohmann::ordered_json{{"solarize_p", s.solarize_p},
                                {"solarize_threshold", s.solarize_threshold},
                                {"posterize_p", s.posterize_p},
                                {"posterize_bits", s.posterize_bits},
                                {"hue_sat_p", s.hue_sat_p},
                                {"hue_max_deg", s.hue_max_deg},
                                {"sat_min", s.sat_min},
                                {"sat_max", s.sat_max},
                                {"grayscale_p", s.grayscale_p},
                                {"master_seed", s.master_seed}};
}

inline AugmentSpec augment_spec_from_json(const nlohmann::json& j) {
  AugmentSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "solarize_p") s.solarize_p = value.get<double>();
    else if (key == "solarize_threshold") s.solarize_threshold = value.get<int>();
    else if (key == "posterize_p") s.posterize_p = value.get<double>();
    else if (key == "posterize_bits") s.posterize_bits = value.get<int>();
    else if (key == "hue_sat_p") s.hue_sat_p = value.get<double>();
    else if (key == "hue_max_deg") s.hue_max_deg = value.get<double>();
    else if (key == "sat_min") s.sat_min = value.get<double>();
    else if (key == "sat_max") s.sat_max = value.get<double>();
    else if (key == "grayscale_p") s.grayscale_p = value.get<double>();
    else if (key == "master_seed") s.master_seed = value.get<std::uint64_t>();
    else throw ConfigError("augment: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

}  // namespace wsirisk
