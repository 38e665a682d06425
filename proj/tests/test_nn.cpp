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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wsirisk/checkpoint.hpp"
#include "wsirisk/losses.hpp"
#include "wsirisk/nn.hpp"
#include "wsirisk/rng.hpp"

using namespace wsirisk;

namespace {

NetworkConfig tiny_config(int embedding_dim = 4) {
  NetworkConfig cfg;
  cfg.input_size = 8;
  cfg.in_channels = 3;
  cfg.channels = {4, 6};
  cfg.num_classes = 3;
  cfg.embedding_dim = embedding_dim;
  return cfg;
}

template <typename T>
Tensor<T> random_batch(const NetworkConfig& cfg, int n, Rng& rng) {
  Tensor<T> batch({n, cfg.in_channels, cfg.input_size, cfg.input_size});
  for (auto& v : batch.v) v = static_cast<T>(rng.next_double());
  return batch;
}

/// Flattens all parameters, runs f over perturbations, compares to analytic.
double param_grad_max_rel_error(const NetworkConfig& cfg, Params<double>& params,
                                const Tensor<double>& batch,
                                const Tensor<double>& upstream_logits,
                                const Tensor<double>& upstream_emb) {
  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);
  Params<double> grads;
  backward(params, cfg, cache, upstream_logits, upstream_emb, grads);

  auto objective = [&]() {
    ForwardCache<double> c;
    forward(params, cfg, batch, c);
    double j = 0.0;
    for (std::size_t i = 0; i < c.logits.size(); ++i)
      j += upstream_logits[i] * c.logits[i];
    for (std::size_t i = 0; i < c.emb.size(); ++i) j += upstream_emb[i] * c.emb[i];
    return j;
  };

  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  std::vector<Tensor<double>*> tensors;
  std::vector<Tensor<double>*> grad_tensors;
  params.for_each([&](const std::string&, Tensor<double>& t) { tensors.push_back(&t); });
  grads.for_each([&](const std::string&, Tensor<double>& t) { grad_tensors.push_back(&t); });
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    for (std::size_t i = 0; i < tensors[ti]->size(); ++i) {
      const double orig = (*tensors[ti])[i];
      (*tensors[ti])[i] = orig + h;
      const double fp = objective();
      (*tensors[ti])[i] = orig - h;
      const double fm = objective();
      (*tensors[ti])[i] = orig;
      const double g = (fp - fm) / (2.0 * h);
      const double a = (*grad_tensors[ti])[i];
      num += (g - a) * (g - a);
      den += g * g;
    }
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace

TEST_CASE("init is deterministic per seed and seed-sensitive") {
  const NetworkConfig cfg = tiny_config();
  const auto a = init_params<float>(cfg, 11);
  const auto b = init_params<float>(cfg, 11);
  const auto c = init_params<float>(cfg, 12);
  CHECK(a.conv_w[0].v == b.conv_w[0].v);
  CHECK(a.head_w.v == b.head_w.v);
  CHECK(a.conv_w[0].v != c.conv_w[0].v);
}

TEST_CASE("init variance tracks 2/fan_in on a large layer") {
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.channels = {64, 64};
  cfg.num_classes = 2;
  const auto p = init_params<double>(cfg, 3);
  const auto& w = p.conv_w[1];  // 64x64x3x3, fan_in 576
  double mean = 0.0;
  for (const double v : w.v) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (const double v : w.v) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  const double expected = 2.0 / 576.0;
  CHECK(var > expected * 0.8);
  CHECK(var < expected * 1.2);
}

TEST_CASE("biases start at zero") {
  const auto p = init_params<double>(tiny_config(), 5);
  for (const double v : p.conv_b[0].v) CHECK(v == 0.0);
  for (const double v : p.head_b.v) CHECK(v == 0.0);
}

TEST_CASE("forward satisfies its output contracts") {
  const NetworkConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 21);
  Rng rng(22);
  const auto batch = random_batch<double>(cfg, 3, rng);
  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);

  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int k = 0; k < cfg.num_classes; ++k) sum += cache.probs[i * cfg.num_classes + k];
    CHECK(std::abs(sum - 1.0) < 1e-6);
    double norm = 0.0;
    for (int d = 0; d < cfg.embedding_dim; ++d) {
      const double z = cache.emb[i * cfg.embedding_dim + d];
      norm += z * z;
    }
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
  }
  CHECK(cache.feature_maps().shape ==
        std::vector<int>{3, 6, cfg.spatial_after(2), cfg.spatial_after(2)});
  CHECK(cache.logits.all_finite());
}

TEST_CASE("zeroed class head yields uniform probabilities") {
  const NetworkConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 30);
  params.head_w.fill(0.0);
  params.head_b.fill(0.0);
  Rng rng(31);
  const auto batch = random_batch<double>(cfg, 2, rng);
  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);
  for (std::size_t i = 0; i < cache.probs.size(); ++i)
    CHECK(cache.probs[i] == doctest::Approx(1.0 / cfg.num_classes).epsilon(1e-12));
}

TEST_CASE("duplicate batch rows produce identical outputs") {
  const NetworkConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 40);
  Rng rng(41);
  auto batch = random_batch<double>(cfg, 2, rng);
  const std::size_t sample = batch.size() / 2;
  for (std::size_t i = 0; i < sample; ++i) batch[sample + i] = batch[i];
  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);
  for (int k = 0; k < cfg.num_classes; ++k)
    CHECK(cache.logits[k] == cache.logits[cfg.num_classes + k]);
}

TEST_CASE("forward rejects shape mismatches") {
  const NetworkConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 50);
  ForwardCache<double> cache;
  Tensor<double> bad({1, 3, 7, 7});
  CHECK_THROWS_AS(forward(params, cfg, bad, cache), std::invalid_argument);
}

TEST_CASE("softmax is translation invariant within 1e-9") {
  Tensor<double> logits({2, 4});
  Rng rng(60);
  for (auto& v : logits.v) v = rng.uniform(-3.0, 3.0);
  Tensor<double> p1, p2;
  softmax_rows(logits, p1);
  for (auto& v : logits.v) v += 7.25;
  softmax_rows(logits, p2);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(std::abs(p1[i] - p2[i]) < 1e-9);
}

TEST_CASE("backward matches finite differences for every parameter") {
  const NetworkConfig cfg = tiny_config();
  auto params = init_params<double>(cfg, 70);
  Rng rng(71);
  const auto batch = random_batch<double>(cfg, 2, rng);
  Tensor<double> ul({2, cfg.num_classes});
  Tensor<double> ue({2, cfg.embedding_dim});
  for (auto& v : ul.v) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ue.v) v = rng.uniform(-1.0, 1.0);
  CHECK(param_grad_max_rel_error(cfg, params, batch, ul, ue) < 1e-4);
}

TEST_CASE("backward without an embedding head also checks out") {
  const NetworkConfig cfg = tiny_config(0);
  auto params = init_params<double>(cfg, 80);
  Rng rng(81);
  const auto batch = random_batch<double>(cfg, 2, rng);
  Tensor<double> ul({2, cfg.num_classes});
  for (auto& v : ul.v) v = rng.uniform(-1.0, 1.0);
  Tensor<double> ue({2, 0});
  CHECK(param_grad_max_rel_error(cfg, params, batch, ul, ue) < 1e-4);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  const NetworkConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 90);
  Rng rng(91);
  const auto batch = random_batch<double>(cfg, 2, rng);
  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);
  Tensor<double> ul({2, cfg.num_classes});
  Tensor<double> ue({2, cfg.embedding_dim});
  Params<double> grads;
  backward(params, cfg, cache, ul, ue, grads);
  grads.for_each([](const std::string&, const Tensor<double>& t) {
    for (const double v : t.v) CHECK(v == 0.0);
  });
}

TEST_CASE("backward requires a forward cache") {
  const NetworkConfig cfg = tiny_config();
  const auto params = init_params<double>(cfg, 95);
  ForwardCache<double> cache;  // never filled
  Tensor<double> ul({2, cfg.num_classes});
  Tensor<double> ue({2, cfg.embedding_dim});
  Params<double> grads;
  CHECK_THROWS_AS(backward(params, cfg, cache, ul, ue, grads), std::invalid_argument);
}

TEST_CASE("softmax-CE end-to-end gradient through the network") {
  // Composite check: train-style gradient (CE on softmax of logits) against
  // finite differences of the scalar loss.
  const NetworkConfig cfg = tiny_config(0);
  auto params = init_params<double>(cfg, 100);
  Rng rng(101);
  const auto batch = random_batch<double>(cfg, 2, rng);
  const std::vector<int> labels{1, 2};

  ForwardCache<double> cache;
  forward(params, cfg, batch, cache);
  const Tensor<double> dlogits =
      softmax_backward(cache.probs, cross_entropy_grad(cache.probs, labels));
  Params<double> grads;
  backward(params, cfg, cache, dlogits, Tensor<double>({2, 0}), grads);

  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  std::vector<Tensor<double>*> tensors, grad_tensors;
  params.for_each([&](const std::string&, Tensor<double>& t) { tensors.push_back(&t); });
  grads.for_each([&](const std::string&, Tensor<double>& t) { grad_tensors.push_back(&t); });
  auto loss = [&]() {
    ForwardCache<double> c;
    forward(params, cfg, batch, c);
    return cross_entropy(c.probs, labels);
  };
  for (std::size_t ti = 0; ti < tensors.size(); ++ti)
    for (std::size_t i = 0; i < tensors[ti]->size(); ++i) {
      const double orig = (*tensors[ti])[i];
      (*tensors[ti])[i] = orig + h;
      const double fp = loss();
      (*tensors[ti])[i] = orig - h;
      const double fm = loss();
      (*tensors[ti])[i] = orig;
      const double g = (fp - fm) / (2.0 * h);
      num += (g - (*grad_tensors[ti])[i]) * (g - (*grad_tensors[ti])[i]);
      den += g * g;
    }
  CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-12) < 1e-4);
}

TEST_CASE("checkpoint round-trip reproduces forward outputs bit-exactly") {
  const NetworkConfig cfg = tiny_config();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_params<float>(cfg, 110);
  ckpt.metadata = {{"epoch", 7}, {"seed", 110}};

  const auto dir = std::filesystem::temp_directory_path() / "wsirisk_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "net.ckpt").string();
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);

  CHECK(back.metadata.at("epoch") == 7);
  Rng rng(111);
  const auto batch = random_batch<float>(cfg, 2, rng);
  ForwardCache<float> c1, c2;
  forward(ckpt.params, cfg, batch, c1);
  forward(back.params, back.config, batch, c2);
  CHECK(c1.logits.v == c2.logits.v);
  CHECK(c1.emb.v == c2.emb.v);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects version mismatch and corruption") {
  const NetworkConfig cfg = tiny_config();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_params<float>(cfg, 120);
  auto bytes = encode_checkpoint(ckpt);

  auto corrupted = bytes;
  corrupted[8] = 99;  // version field, invalidates CRC too
  CHECK_THROWS_AS(decode_checkpoint(corrupted), IoError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 10);
  CHECK_THROWS_AS(decode_checkpoint(truncated), IoError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0xff;
  CHECK_THROWS_AS(decode_checkpoint(flipped), IoError);
}

TEST_CASE("adam descends a simple quadratic") {
  // Sanity: repeated steps on grad = params should shrink every weight.
  const NetworkConfig cfg = tiny_config(0);
  auto params = init_params<float>(cfg, 130);
  Adam<float> opt(cfg, 0.05);
  auto norm = [&]() {
    double n = 0.0;
    params.for_each([&](const std::string&, const Tensor<float>& t) {
      for (const float v : t.v) n += static_cast<double>(v) * v;
    });
    return n;
  };
  const double before = norm();
  for (int step = 0; step < 50; ++step) {
    Params<float> grads = params;  // gradient of 0.5*||theta||^2
    opt.step(params, grads);
  }
  CHECK(norm() < before * 0.5);
}
