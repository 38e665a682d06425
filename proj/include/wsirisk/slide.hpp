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

// Slide-level primitives: fixed-grid tiling, grayscale conversion, Otsu
// thresholding of the slide luminance histogram, and the tissue gate.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsirisk/image.hpp"

namespace wsirisk {

inline constexpr int kPatchSize = 512;
inline constexpr double kDefaultMinTissueFraction = 0.10;

/// One slide-relative tile position on the fixed grid.
struct PatchRef {
  std::string slide_id;
  int x = 0;
  int y = 0;
  int size = kPatchSize;

  bool operator==(const PatchRef& o) const {
    return slide_id == o.slide_id && x == o.x && y == o.y && size == o.size;
  }
};

struct TileResult {
  std::vector<PatchRef> refs;
  std::vector<std::string> warnings;
};

/// Enumerates non-overlapping (or strided) patch positions row-major from
/// (0,0). Partial tiles at the right/bottom edges are dropped. A slide
/// smaller than one patch yields an empty sequence plus a warning record.
inline TileResult tile_slide(const std::string& slide_id, int width, int height,
                             int patch_size = kPatchSize, int stride = 0) {
  if (patch_size <= 0) throw std::invalid_argument("tile_slide: patch_size <= 0");
  if (stride == 0) stride = patch_size;
  if (stride <= 0) throw std::invalid_argument("tile_slide: stride <= 0");
  TileResult result;
  if (width < patch_size || height < patch_size) {
    result.warnings.push_back("slide '" + slide_id + "' (" + std::to_string(width) +
                              "x" + std::to_string(height) +
                              ") is smaller than one patch; no tiles emitted");
    return result;
  }
  for (int y = 0; y + patch_size <= height; y += stride)
    for (int x = 0; x + patch_size <= width; x += stride)
      result.refs.push_back(PatchRef{slide_id, x, y, patch_size});
  return result;
}

inline TileResult tile_slide(const std::string& slide_id, const Image& slide,
                             int patch_size = kPatchSize, int stride = 0) {
  return tile_slide(slide_id, slide.width, slide.height, patch_size, stride);
}

/// Rec.601 luma, rounded to nearest: round(0.299 R + 0.587 G + 0.114 B).
inline std::uint8_t luma_u8(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return clamp_u8(std::round(y));
}

/// Converts an RGB image to its 8-bit luminance plane. Grayscale input is
/// passed through unchanged.
inline Image luminance_plane(const Image& img) {
  if (img.channels == 1) return img;
  Image out = Image::gray(img.width, img.height);
  const std::uint8_t* s = img.data.data();
  std::uint8_t* d = out.data.data();
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i, s += 3) d[i] = luma_u8(s[0], s[1], s[2]);
  return out;
}

/// Counts over the 256 luminance levels. Sum of counts equals the number of
/// pixels histogrammed.
struct Histogram256 {
  std::array<std::uint64_t, 256> counts{};

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto c : counts) t += c;
    return t;
  }

  void add_plane(const Image& gray) {
    for (const std::uint8_t v : gray.data) ++counts[v];
  }
};

inline Histogram256 luminance_histogram(const Image& img) {
  Histogram256 h;
  if (img.channels == 1) {
    h.add_plane(img);
  } else {
    const std::uint8_t* s = img.data.data();
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i, s += 3) ++h.counts[luma_u8(s[0], s[1], s[2])];
  }
  return h;
}

/// Otsu's method: returns the threshold t maximizing the between-class
/// variance of the partitions {<= t} and {> t}. Ties break toward the
/// smallest t. If all mass sits in a single bin, that bin index is returned.
inline int otsu_threshold(const Histogram256& hist) {
  std::uint64_t total = 0;
  std::uint64_t total_moment = 0;
  int single_bin = -1;
  int nonzero_bins = 0;
  for (int i = 0; i < 256; ++i) {
    if (hist.counts[i] > 0) {
      ++nonzero_bins;
      single_bin = i;
    }
    total += hist.counts[i];
    total_moment += hist.counts[i] * static_cast<std::uint64_t>(i);
  }
  if (total == 0) throw std::invalid_argument("otsu_threshold: empty histogram");
  if (nonzero_bins == 1) return single_bin;  // degenerate single-class input

  long double best_variance = -1.0L;
  int best_t = single_bin;
  std::uint64_t c0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    c0 += hist.counts[t];
    s0 += hist.counts[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t c1 = total - c0;
    if (c0 == 0 || c1 == 0) continue;
    const std::uint64_t s1 = total_moment - s0;
    // sigma_b^2(t) proportional to (s0*c1 - s1*c0)^2 / (c0*c1); the signed
    // numerator stays exact in int64 for any 8-bit slide up to ~16M pixels.
    const long double num = static_cast<long double>(
        static_cast<std::int64_t>(s0 * c1) - static_cast<std::int64_t>(s1 * c0));
    const long double variance = num * num / (static_cast<long double>(c0) * c1);
    if (variance > best_variance) {
      best_variance = variance;
      best_t = t;
    }
  }
  return best_t;
}

/// Fraction of patch pixels at or below the luminance threshold. Tissue is
/// darker than background on H&E.
inline double tissue_fraction(const Image& patch, int threshold) {
  if (patch.empty()) throw std::invalid_argument("tissue_fraction: empty patch");
  std::uint64_t dark = 0;
  if (patch.channels == 1) {
    for (const std::uint8_t v : patch.data) dark += (v <= threshold) ? 1 : 0;
  } else {
    const std::uint8_t* s = patch.data.data();
    const std::size_t n = patch.pixel_count();
    for (std::size_t i = 0; i < n; ++i, s += 3)
      dark += (luma_u8(s[0], s[1], s[2]) <= threshold) ? 1 : 0;
  }
  return static_cast<double>(dark) / static_cast<double>(patch.pixel_count());
}

inline bool is_tissue(double fraction, double min_fraction = kDefaultMinTissueFraction) {
  return fraction >= min_fraction;
}

}  // namespace wsirisk
