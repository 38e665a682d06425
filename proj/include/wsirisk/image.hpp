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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace wsirisk {

/// 8-bit raster, row-major, 1 (grayscale) or 3 (RGB) interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c) {
    if (w < 0 || h < 0 || (c != 1 && c != 3))
      throw std::invalid_argument("Image: bad dimensions");
    data.assign(static_cast<std::size_t>(w) * h * c, 0);
  }

  static Image rgb(int w, int h) { return Image(w, h, 3); }
  static Image gray(int w, int h) { return Image(w, h, 1); }

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }

  std::uint8_t* px(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* px(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  std::uint8_t& at(int x, int y, int c) { return px(x, y)[c]; }
  std::uint8_t at(int x, int y, int c) const { return px(x, y)[c]; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
};

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
}

/// Copies a rectangular window. The window must lie fully inside the source.
inline Image copy_window(const Image& src, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || x + w > src.width || y + h > src.height)
    throw std::invalid_argument("copy_window: out of bounds");
  Image out(w, h, src.channels);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * src.channels;
  for (int r = 0; r < h; ++r) {
    const std::uint8_t* s = src.px(x, y + r);
    std::copy(s, s + row_bytes, out.px(0, r));
  }
  return out;
}

/// Bilinear resize with half-pixel center alignment, per channel,
/// round-to-nearest back to 8 bits.
inline Image bilinear_resize(const Image& src, int new_w, int new_h) {
  if (new_w <= 0 || new_h <= 0)
    throw std::invalid_argument("bilinear_resize: bad target size");
  if (src.width == new_w && src.height == new_h) return src;
  Image out(new_w, new_h, src.channels);
  const double sx = static_cast<double>(src.width) / new_w;
  const double sy = static_cast<double>(src.height) / new_h;
  for (int y = 0; y < new_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
        const double bot = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
        out.at(x, y, c) = clamp_u8(std::round(top * (1.0 - wy) + bot * wy));
      }
    }
  }
  return out;
}

}  // namespace wsirisk
