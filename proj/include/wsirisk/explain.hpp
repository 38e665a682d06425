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

// Gradient-weighted class activation maps over the final conv stage, plus
// heatmap rendering: channel weights are the spatial mean of the class
// logit's gradient with respect to the feature maps, the map is the ReLU of
// the weighted channel sum, max-normalized to [0,1], upsampled bilinearly
// and blended over the patch with a blue-to-red colormap.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wsirisk/checkpoint.hpp"
#include "wsirisk/image.hpp"
#include "wsirisk/nn.hpp"

namespace wsirisk {

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, all in [0,1]

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// CAM for one prepared input (1, C, S, S). All-zero feature response maps
/// to an all-zero heatmap; otherwise the maximum is exactly 1.
template <typename T>
Heatmap grad_cam(const Params<T>& params, const NetworkConfig& cfg,
                 const Tensor<T>& input, int target_class) {
  if (target_class < 0 || target_class >= cfg.num_classes)
    throw std::invalid_argument("grad_cam: class index out of range");
  if (input.shape.size() != 4 || input.dim(0) != 1)
    throw std::invalid_argument("grad_cam: expected a single-sample batch");

  ForwardCache<T> cache;
  forward(params, cfg, input, cache);
  const Tensor<T>& maps = cache.feature_maps();  // (1, C, H', W')
  const int channels = maps.dim(1);
  const int hw = maps.dim(2);
  const int spatial = hw * hw;

  const Tensor<T> dA = logit_feature_gradient(params, cfg, target_class);

  Heatmap heat;
  heat.width = hw;
  heat.height = hw;
  heat.values.assign(static_cast<std::size_t>(spatial), 0.0f);
  for (int c = 0; c < channels; ++c) {
    // Spatial mean of the gradient; constant per channel for a GAP trunk.
    T weight = T(0);
    const T* g = dA.data() + static_cast<std::size_t>(c) * spatial;
    for (int i = 0; i < spatial; ++i) weight += g[i];
    weight /= static_cast<T>(spatial);
    const T* a = maps.data() + static_cast<std::size_t>(c) * spatial;
    for (int i = 0; i < spatial; ++i)
      heat.values[i] += static_cast<float>(weight * a[i]);
  }
  float mx = 0.0f;
  for (auto& v : heat.values) {
    v = std::max(v, 0.0f);  // ReLU
    mx = std::max(mx, v);
  }
  if (mx > 0.0f)
    for (auto& v : heat.values) v /= mx;
  return heat;
}

/// CAM from a checkpoint for an input-sized RGB patch.
inline Heatmap grad_cam_for_patch(const Checkpoint& ckpt, const Image& patch_input,
                                  int target_class) {
  const int s = ckpt.config.input_size;
  if (patch_input.width != s || patch_input.height != s || patch_input.channels != 3)
    throw std::invalid_argument("grad_cam_for_patch: input must be RGB at network size");
  Tensor<float> batch({1, 3, s, s});
  float* dst = batch.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) *dst++ = patch_input.at(x, y, c) / 255.0f;
  return grad_cam(ckpt.params, ckpt.config, batch, target_class);
}

/// Blue (0) to red (1) linear colormap.
inline std::array<std::uint8_t, 3> colormap_blue_red(float v) {
  v = std::min(1.0f, std::max(0.0f, v));
  return {clamp_u8(std::round(255.0 * v)), 0, clamp_u8(std::round(255.0 * (1.0 - v)))};
}

/// Bilinear heatmap value at patch coordinates.
inline float sample_heatmap(const Heatmap& h, double fx, double fy) {
  fx = std::min(std::max(fx, 0.0), static_cast<double>(h.width - 1));
  fy = std::min(std::max(fy, 0.0), static_cast<double>(h.height - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, h.width - 1);
  const int y1 = std::min(y0 + 1, h.height - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  const double top = h.at(x0, y0) * (1.0 - wx) + h.at(x1, y0) * wx;
  const double bot = h.at(x0, y1) * (1.0 - wx) + h.at(x1, y1) * wx;
  return static_cast<float>(top * (1.0 - wy) + bot * wy);
}

/// Upsamples the heatmap over the patch and alpha-blends the colormap.
inline Image render_overlay(const Image& patch, const Heatmap& heat,
                            double opacity = 0.4) {
  if (patch.channels != 3)
    throw std::invalid_argument("render_overlay: patch must be RGB");
  if (heat.width <= 0 || heat.height <= 0)
    throw std::invalid_argument("render_overlay: empty heatmap");
  Image out = patch;
  const double sx = static_cast<double>(heat.width) / patch.width;
  const double sy = static_cast<double>(heat.height) / patch.height;
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      const float v = sample_heatmap(heat, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
      const auto color = colormap_blue_red(v);
      std::uint8_t* p = out.px(x, y);
      for (int c = 0; c < 3; ++c)
        p[c] = clamp_u8(std::round((1.0 - opacity) * p[c] + opacity * color[c]));
    }
  }
  return out;
}

/// Replaces the pixels under the top-decile heatmap region with a fill
/// color; used by the occlusion sanity check.
inline Image occlude_top_decile(const Image& patch_input, const Heatmap& heat,
                                const std::array<std::uint8_t, 3>& fill) {
  std::vector<float> sorted = heat.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx = (sorted.size() * 9) / 10;
  const float threshold = sorted[std::min(idx, sorted.size() - 1)];
  Image out = patch_input;
  const double sx = static_cast<double>(heat.width) / patch_input.width;
  const double sy = static_cast<double>(heat.height) / patch_input.height;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const int hx = std::min(heat.width - 1, static_cast<int>(x * sx));
      const int hy = std::min(heat.height - 1, static_cast<int>(y * sy));
      if (heat.at(hx, hy) >= threshold && heat.at(hx, hy) > 0.0f) {
        std::uint8_t* p = out.px(x, y);
        p[0] = fill[0];
        p[1] = fill[1];
        p[2] = fill[2];
      }
    }
  return out;
}

}  // namespace wsirisk
