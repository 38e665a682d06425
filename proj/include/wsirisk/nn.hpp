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

// Small trainable CNN with exact backward passes: stride-2 3x3 conv stages
// with ReLU, global average pooling, a class head, and an optional
// L2-normalized embedding head. Convolutions run as im2col + matmul.
// Gradients for every layer are validated against central finite
// differences in the test suite.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/rng.hpp"
#include "wsirisk/tensor.hpp"

namespace wsirisk {

/// Architecture description. The trunk is size-agnostic (global average
/// pool), but `input_size` pins the expected input for shape validation.
struct NetworkConfig {
  int input_size = 128;
  int in_channels = 3;
  std::vector<int> channels = {16, 32, 64, 64};  // stride-2 3x3 stages
  int num_classes = 2;
  int embedding_dim = 0;  // 0 = no embedding head

  int stages() const { return static_cast<int>(channels.size()); }
  int trunk_channels() const { return channels.empty() ? in_channels : channels.back(); }
  bool has_embedding() const { return embedding_dim > 0; }

  void validate() const {
    if (input_size < 8) throw ConfigError("network: input_size too small");
    if (in_channels != 1 && in_channels != 3)
      throw ConfigError("network: in_channels must be 1 or 3");
    if (channels.empty()) throw ConfigError("network: no conv stages");
    for (const int c : channels)
      if (c <= 0) throw ConfigError("network: nonpositive channel count");
    if (num_classes < 2) throw ConfigError("network: num_classes must be >= 2");
    if (embedding_dim < 0) throw ConfigError("network: negative embedding_dim");
  }

  /// Spatial extent after `stage` stride-2 convs with pad 1, kernel 3:
  /// out = floor((n - 1) / 2) + 1.
  int spatial_after(int stage) const {
    int n = input_size;
    for (int i = 0; i < stage; ++i) n = (n - 1) / 2 + 1;
    return n;
  }
};

inline nlohmann::ordered_json network_config_to_json(const NetworkConfig& c) {
  return nlohmann::ordered_json{{"input_size", c.input_size},
                                {"in_channels", c.in_channels},
                                {"channels", c.channels},
                                {"num_classes", c.num_classes},
                                {"embedding_dim", c.embedding_dim}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "input_size") c.input_size = value.get<int>();
    else if (key == "in_channels") c.in_channels = value.get<int>();
    else if (key == "channels") c.channels = value.get<std::vector<int>>();
    else if (key == "num_classes") c.num_classes = value.get<int>();
    else if (key == "embedding_dim") c.embedding_dim = value.get<int>();
    else throw ConfigError("network: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

/// All trainable tensors. conv_w[i] is (oc, ic, 3, 3); heads are (out, in).
template <typename T>
struct Params {
  std::vector<Tensor<T>> conv_w;
  std::vector<Tensor<T>> conv_b;
  Tensor<T> head_w, head_b;
  Tensor<T> emb_w, emb_b;

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      fn("conv" + std::to_string(i) + ".w", conv_w[i]);
      fn("conv" + std::to_string(i) + ".b", conv_b[i]);
    }
    fn("head.w", head_w);
    fn("head.b", head_b);
    if (emb_w.size() > 0) {
      fn("emb.w", emb_w);
      fn("emb.b", emb_b);
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<Params*>(this)->for_each(
        [&](const std::string& name, Tensor<T>& t) { fn(name, const_cast<const Tensor<T>&>(t)); });
  }

  static Params zeros_like(const NetworkConfig& cfg) {
    Params p;
    int ic = cfg.in_channels;
    for (const int oc : cfg.channels) {
      p.conv_w.emplace_back(std::vector<int>{oc, ic, 3, 3});
      p.conv_b.emplace_back(std::vector<int>{oc});
      ic = oc;
    }
    p.head_w = Tensor<T>({cfg.num_classes, cfg.trunk_channels()});
    p.head_b = Tensor<T>({cfg.num_classes});
    if (cfg.has_embedding()) {
      p.emb_w = Tensor<T>({cfg.embedding_dim, cfg.trunk_channels()});
      p.emb_b = Tensor<T>({cfg.embedding_dim});
    }
    return p;
  }

  void fill(T v) {
    for_each([v](const std::string&, Tensor<T>& t) { t.fill(v); });
  }

  template <typename U>
  Params<U> cast() const {
    Params<U> out;
    for (const auto& w : conv_w) out.conv_w.push_back(w.template cast<U>());
    for (const auto& b : conv_b) out.conv_b.push_back(b.template cast<U>());
    out.head_w = head_w.template cast<U>();
    out.head_b = head_b.template cast<U>();
    out.emb_w = emb_w.template cast<U>();
    out.emb_b = emb_b.template cast<U>();
    return out;
  }
};

/// He-style fan-in scaled normal init, deterministic per seed. Biases zero.
template <typename T>
Params<T> init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Params<T> p = Params<T>::zeros_like(cfg);
  std::uint64_t tensor_index = 0;
  p.for_each([&](const std::string& name, Tensor<T>& t) {
    ++tensor_index;
    if (name.ends_with(".b")) return;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d)
      fan_in *= static_cast<std::size_t>(t.shape[d]);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, 0x696e6974, tensor_index));
    for (auto& w : t.v) w = static_cast<T>(rng.normal(0.0, stddev));
  });
  return p;
}

namespace nn_detail {

/// C = A (m x k) * B (k x n), C preallocated, accumulate=false overwrites.
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// col (ic*9, oh*ow) from one sample (ic, h, w); kernel 3, pad 1.
template <typename T>
void im2col(const T* in, int ic, int h, int w, int stride, T* col, int oh, int ow) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::size_t r = 0;
  for (int c = 0; c < ic; ++c) {
    const T* src = in + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx, ++r) {
        T* dst = col + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            dst += ow;
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - 1;
            *dst++ = (ix >= 0 && ix < w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Scatter-add of a col buffer back to one sample's input gradient.
template <typename T>
void col2im_add(const T* col, int ic, int h, int w, int stride, T* din, int oh, int ow) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::size_t r = 0;
  for (int c = 0; c < ic; ++c) {
    T* dst = din + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx, ++r) {
        const T* src = col + r * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          T* drow = dst + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) drow[ix] += src[ox];
          }
          src += ow;
        }
      }
    }
  }
}

}  // namespace nn_detail

/// Activations retained by forward for the backward pass and for CAM.
template <typename T>
struct ForwardCache {
  // acts[0] = input batch (N, C, H, W); acts[i] = post-ReLU stage i output.
  std::vector<Tensor<T>> acts;
  Tensor<T> pooled;   // (N, C_last)
  Tensor<T> logits;   // (N, K)
  Tensor<T> probs;    // (N, K) softmax rows
  Tensor<T> emb_raw;  // (N, d) before normalization
  Tensor<T> emb;      // (N, d) unit rows
  bool valid = false;

  /// Final conv stage activations (N, C, H', W'), the Grad-CAM source.
  const Tensor<T>& feature_maps() const { return acts.back(); }
};

/// Row-wise softmax with max subtraction.
template <typename T>
void softmax_rows(const Tensor<T>& logits, Tensor<T>& probs) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  probs = Tensor<T>({n, k});
  for (int i = 0; i < n; ++i) {
    const T* in = logits.data() + static_cast<std::size_t>(i) * k;
    T* out = probs.data() + static_cast<std::size_t>(i) * k;
    T mx = in[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, in[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (int j = 0; j < k; ++j) out[j] /= sum;
  }
}

/// Fixed input centering applied inside the network: [0,1] inputs shift to
/// [-0.5, 0.5] before the first convolution. A constant, not a dataset
/// statistic; without it the shared DC component of pale H&E-like imagery
/// dominates early gradients.
inline constexpr double kInputCenter = 0.5;

/// Forward pass over a normalized batch (N, C, H, W) with values in [0,1].
/// Softmax rows sum to one, embedding rows are unit-norm, and the final
/// conv activations are retained in the cache.
template <typename T>
void forward(const Params<T>& params, const NetworkConfig& cfg, const Tensor<T>& batch,
             ForwardCache<T>& cache) {
  if (batch.shape.size() != 4 || batch.dim(1) != cfg.in_channels ||
      batch.dim(2) != cfg.input_size || batch.dim(3) != cfg.input_size)
    throw std::invalid_argument("forward: batch shape does not match network config");
  const int n = batch.dim(0);

  cache.acts.clear();
  cache.acts.reserve(cfg.stages() + 1);
  Tensor<T> centered = batch;
  for (auto& v : centered.v) v -= static_cast<T>(kInputCenter);
  cache.acts.push_back(std::move(centered));

  int ic = cfg.in_channels;
  int hw = cfg.input_size;
  std::vector<T> col;
  for (int s = 0; s < cfg.stages(); ++s) {
    const int oc = cfg.channels[s];
    const int oh = (hw - 1) / 2 + 1;
    Tensor<T> out({n, oc, oh, oh});
    col.resize(static_cast<std::size_t>(ic) * 9 * oh * oh);
    const Tensor<T>& in = cache.acts.back();
    const std::size_t in_sample = static_cast<std::size_t>(ic) * hw * hw;
    const std::size_t out_sample = static_cast<std::size_t>(oc) * oh * oh;
    for (int b = 0; b < n; ++b) {
      nn_detail::im2col(in.data() + b * in_sample, ic, hw, hw, 2, col.data(), oh, oh);
      T* dst = out.data() + b * out_sample;
      nn_detail::matmul(params.conv_w[s].data(), col.data(), dst, oc, ic * 9, oh * oh,
                        false);
      for (int c = 0; c < oc; ++c) {
        const T bias = params.conv_b[s][c];
        T* row = dst + static_cast<std::size_t>(c) * oh * oh;
        for (int i = 0; i < oh * oh; ++i) {
          row[i] += bias;
          if (row[i] < T(0)) row[i] = T(0);  // ReLU
        }
      }
    }
    cache.acts.push_back(std::move(out));
    ic = oc;
    hw = oh;
  }

  // Global average pool.
  const Tensor<T>& last = cache.acts.back();
  const int c_last = cfg.trunk_channels();
  const int spatial = hw * hw;
  cache.pooled = Tensor<T>({n, c_last});
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < c_last; ++c) {
      const T* src = last.data() + (static_cast<std::size_t>(b) * c_last + c) * spatial;
      T sum = T(0);
      for (int i = 0; i < spatial; ++i) sum += src[i];
      cache.pooled[static_cast<std::size_t>(b) * c_last + c] = sum / static_cast<T>(spatial);
    }
  }

  // Class head.
  const int k = cfg.num_classes;
  cache.logits = Tensor<T>({n, k});
  for (int b = 0; b < n; ++b) {
    const T* f = cache.pooled.data() + static_cast<std::size_t>(b) * c_last;
    T* out = cache.logits.data() + static_cast<std::size_t>(b) * k;
    for (int j = 0; j < k; ++j) {
      const T* wrow = params.head_w.data() + static_cast<std::size_t>(j) * c_last;
      T acc = params.head_b[j];
      for (int c = 0; c < c_last; ++c) acc += wrow[c] * f[c];
      out[j] = acc;
    }
  }
  softmax_rows(cache.logits, cache.probs);

  // Embedding head with L2 normalization.
  if (cfg.has_embedding()) {
    const int d = cfg.embedding_dim;
    cache.emb_raw = Tensor<T>({n, d});
    cache.emb = Tensor<T>({n, d});
    for (int b = 0; b < n; ++b) {
      const T* f = cache.pooled.data() + static_cast<std::size_t>(b) * c_last;
      T* raw = cache.emb_raw.data() + static_cast<std::size_t>(b) * d;
      for (int j = 0; j < d; ++j) {
        const T* wrow = params.emb_w.data() + static_cast<std::size_t>(j) * c_last;
        T acc = params.emb_b[j];
        for (int c = 0; c < c_last; ++c) acc += wrow[c] * f[c];
        raw[j] = acc;
      }
      T norm = T(0);
      for (int j = 0; j < d; ++j) norm += raw[j] * raw[j];
      norm = std::sqrt(norm);
      const T inv = (norm > T(1e-12)) ? T(1) / norm : T(0);
      T* z = cache.emb.data() + static_cast<std::size_t>(b) * d;
      for (int j = 0; j < d; ++j) z[j] = raw[j] * inv;
    }
  } else {
    cache.emb_raw = Tensor<T>({n, 0});
    cache.emb = Tensor<T>({n, 0});
  }
  cache.valid = true;
#ifndef NDEBUG
  assert(cache.logits.all_finite());
  assert(cache.probs.all_finite());
  assert(cache.emb.all_finite());
#endif
}

/// Backward pass from upstream gradients on logits and (optionally) the
/// normalized embedding rows. Parameter gradients accumulate into `grads`
/// (zeroed here); gradients are summed over the batch exactly as the losses
/// produced them.
template <typename T>
void backward(const Params<T>& params, const NetworkConfig& cfg,
              const ForwardCache<T>& cache, const Tensor<T>& dlogits,
              const Tensor<T>& demb, Params<T>& grads) {
  if (!cache.valid) throw std::invalid_argument("backward: forward cache missing");
  const int n = cache.acts[0].dim(0);
  const int c_last = cfg.trunk_channels();
  const int k = cfg.num_classes;
  if (dlogits.shape != std::vector<int>{n, k})
    throw std::invalid_argument("backward: dlogits shape mismatch");
  const bool use_emb = cfg.has_embedding() && demb.size() > 0;
  if (use_emb && demb.shape != std::vector<int>{n, cfg.embedding_dim})
    throw std::invalid_argument("backward: demb shape mismatch");

  grads = Params<T>::zeros_like(cfg);

  // Head backward into pooled features.
  Tensor<T> dpooled({n, c_last});
  for (int b = 0; b < n; ++b) {
    const T* f = cache.pooled.data() + static_cast<std::size_t>(b) * c_last;
    const T* dl = dlogits.data() + static_cast<std::size_t>(b) * k;
    T* df = dpooled.data() + static_cast<std::size_t>(b) * c_last;
    for (int j = 0; j < k; ++j) {
      const T g = dl[j];
      grads.head_b[j] += g;
      T* gw = grads.head_w.data() + static_cast<std::size_t>(j) * c_last;
      const T* w = params.head_w.data() + static_cast<std::size_t>(j) * c_last;
      for (int c = 0; c < c_last; ++c) {
        gw[c] += g * f[c];
        df[c] += g * w[c];
      }
    }
  }

  // Embedding head backward through L2 normalization.
  if (use_emb) {
    const int d = cfg.embedding_dim;
    for (int b = 0; b < n; ++b) {
      const T* raw = cache.emb_raw.data() + static_cast<std::size_t>(b) * d;
      const T* z = cache.emb.data() + static_cast<std::size_t>(b) * d;
      const T* dz = demb.data() + static_cast<std::size_t>(b) * d;
      T norm = T(0);
      for (int j = 0; j < d; ++j) norm += raw[j] * raw[j];
      norm = std::sqrt(norm);
      std::vector<T> draw(static_cast<std::size_t>(d), T(0));
      if (norm > T(1e-12)) {
        T zdot = T(0);
        for (int j = 0; j < d; ++j) zdot += z[j] * dz[j];
        for (int j = 0; j < d; ++j) draw[j] = (dz[j] - z[j] * zdot) / norm;
      }
      const T* f = cache.pooled.data() + static_cast<std::size_t>(b) * c_last;
      T* df = dpooled.data() + static_cast<std::size_t>(b) * c_last;
      for (int j = 0; j < d; ++j) {
        const T g = draw[j];
        grads.emb_b[j] += g;
        T* gw = grads.emb_w.data() + static_cast<std::size_t>(j) * c_last;
        const T* w = params.emb_w.data() + static_cast<std::size_t>(j) * c_last;
        for (int c = 0; c < c_last; ++c) {
          gw[c] += g * f[c];
          df[c] += g * w[c];
        }
      }
    }
  }

  // GAP backward: spread pooled gradient uniformly over the spatial grid.
  const int hw_last = cfg.spatial_after(cfg.stages());
  const int spatial = hw_last * hw_last;
  Tensor<T> dact({n, c_last, hw_last, hw_last});
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < c_last; ++c) {
      const T g = dpooled[static_cast<std::size_t>(b) * c_last + c] / static_cast<T>(spatial);
      T* dst = dact.data() + (static_cast<std::size_t>(b) * c_last + c) * spatial;
      for (int i = 0; i < spatial; ++i) dst[i] = g;
    }

  // Conv stages in reverse, ReLU mask first.
  std::vector<T> col, dcol;
  for (int s = cfg.stages() - 1; s >= 0; --s) {
    const int oc = cfg.channels[s];
    const int ic = (s == 0) ? cfg.in_channels : cfg.channels[s - 1];
    const int oh = cfg.spatial_after(s + 1);
    const int ih = cfg.spatial_after(s);
    const Tensor<T>& post = cache.acts[static_cast<std::size_t>(s) + 1];
    const Tensor<T>& in = cache.acts[static_cast<std::size_t>(s)];
    const std::size_t out_sample = static_cast<std::size_t>(oc) * oh * oh;
    const std::size_t in_sample = static_cast<std::size_t>(ic) * ih * ih;

    Tensor<T> din({n, ic, ih, ih});
    col.resize(static_cast<std::size_t>(ic) * 9 * oh * oh);
    dcol.resize(col.size());
    for (int b = 0; b < n; ++b) {
      // ReLU backward in place on a copy of this sample's upstream grad.
      T* dy = dact.data() + b * out_sample;
      const T* act = post.data() + b * out_sample;
      for (std::size_t i = 0; i < out_sample; ++i)
        if (act[i] <= T(0)) dy[i] = T(0);

      for (int c = 0; c < oc; ++c) {
        const T* row = dy + static_cast<std::size_t>(c) * oh * oh;
        T acc = T(0);
        for (int i = 0; i < oh * oh; ++i) acc += row[i];
        grads.conv_b[s][c] += acc;
      }

      nn_detail::im2col(in.data() + b * in_sample, ic, ih, ih, 2, col.data(), oh, oh);
      // dW (oc, ic*9) += dy (oc, oh*ow) * col^T; computed as dot rows.
      for (int c = 0; c < oc; ++c) {
        const T* dyrow = dy + static_cast<std::size_t>(c) * oh * oh;
        T* gw = grads.conv_w[s].data() + static_cast<std::size_t>(c) * ic * 9;
        for (int r = 0; r < ic * 9; ++r) {
          const T* crow = col.data() + static_cast<std::size_t>(r) * oh * oh;
          T acc = T(0);
          for (int i = 0; i < oh * oh; ++i) acc += dyrow[i] * crow[i];
          gw[r] += acc;
        }
      }
      // dcol (ic*9, oh*ow) = W^T (ic*9, oc) * dy (oc, oh*ow).
      std::fill(dcol.begin(), dcol.end(), T(0));
      for (int c = 0; c < oc; ++c) {
        const T* wrow = params.conv_w[s].data() + static_cast<std::size_t>(c) * ic * 9;
        const T* dyrow = dy + static_cast<std::size_t>(c) * oh * oh;
        for (int r = 0; r < ic * 9; ++r) {
          const T w = wrow[r];
          if (w == T(0)) continue;
          T* drow = dcol.data() + static_cast<std::size_t>(r) * oh * oh;
          for (int i = 0; i < oh * oh; ++i) drow[i] += w * dyrow[i];
        }
      }
      nn_detail::col2im_add(dcol.data(), ic, ih, ih, 2, din.data() + b * in_sample, oh,
                            oh);
    }
    dact = std::move(din);
  }
#ifndef NDEBUG
  grads.for_each([](const std::string&, const Tensor<T>& t) { assert(t.all_finite()); });
#endif
}

/// Gradient of one class logit with respect to the final conv activations,
/// via the head and GAP backward path. With a GAP trunk this is constant
/// over samples and spatial positions: W_head[class][c] / (H'*W').
/// Returns (C, H', W').
template <typename T>
Tensor<T> logit_feature_gradient(const Params<T>& params, const NetworkConfig& cfg,
                                 int class_index) {
  if (class_index < 0 || class_index >= cfg.num_classes)
    throw std::invalid_argument("logit_feature_gradient: class index out of range");
  const int c_last = cfg.trunk_channels();
  const int hw = cfg.spatial_after(cfg.stages());
  const int spatial = hw * hw;
  Tensor<T> dA({c_last, hw, hw});
  const T* w = params.head_w.data() + static_cast<std::size_t>(class_index) * c_last;
  for (int c = 0; c < c_last; ++c) {
    const T g = w[c] / static_cast<T>(spatial);
    T* dst = dA.data() + static_cast<std::size_t>(c) * spatial;
    for (int i = 0; i < spatial; ++i) dst[i] = g;
  }
  return dA;
}

/// Adam with bias correction. State tensors mirror the parameter layout.
template <typename T>
class Adam {
 public:
  Adam(const NetworkConfig& cfg, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Params<T>::zeros_like(cfg)), v_(Params<T>::zeros_like(cfg)) {}

  void step(Params<T>& params, const Params<T>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    auto update = [&](Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi;
        const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p[i] = static_cast<T>(static_cast<double>(p[i]) -
                              lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    };
    for (std::size_t s = 0; s < params.conv_w.size(); ++s) {
      update(params.conv_w[s], grads.conv_w[s], m_.conv_w[s], v_.conv_w[s]);
      update(params.conv_b[s], grads.conv_b[s], m_.conv_b[s], v_.conv_b[s]);
    }
    update(params.head_w, grads.head_w, m_.head_w, v_.head_w);
    update(params.head_b, grads.head_b, m_.head_b, v_.head_b);
    if (params.emb_w.size() > 0) {
      update(params.emb_w, grads.emb_w, m_.emb_w, v_.emb_w);
      update(params.emb_b, grads.emb_b, m_.emb_b, v_.emb_b);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  Params<T> m_, v_;
};

}  // namespace wsirisk
