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

#include "wsirisk/augment.hpp"
#include "wsirisk/rng.hpp"

using namespace wsirisk;

namespace {

Image random_patch(int w, int h, std::uint64_t seed) {
  Image img = Image::rgb(w, h);
  Rng rng(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  return img;
}

int max_abs_channel_diff(const Image& a, const Image& b) {
  int worst = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<int>(a.data[i]) - b.data[i]));
  return worst;
}

}  // namespace

TEST_CASE("to_grayscale maps red to its luminance and is idempotent") {
  Image img = Image::rgb(4, 4);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) img.data[3 * i] = 255;
  const Image gray = to_grayscale(img);
  CHECK(gray.at(0, 0, 0) == 76);
  CHECK(gray.at(0, 0, 1) == 76);
  CHECK(gray.at(0, 0, 2) == 76);
  CHECK(to_grayscale(gray).data == gray.data);

  Image flat = Image::rgb(3, 3);
  std::fill(flat.data.begin(), flat.data.end(), 90);
  CHECK(to_grayscale(flat).data == flat.data);
}

TEST_CASE("solarize inverts at or above the threshold") {
  Image img = Image::rgb(2, 1);
  img.data = {200, 100, 128, 0, 127, 255};
  const Image s = solarize(img, 128);
  CHECK(s.data == std::vector<std::uint8_t>{55, 100, 127, 0, 127, 0});
  CHECK(solarize(img, 256).data == img.data);  // disabled threshold

  const Image patch = random_patch(16, 16, 3);
  CHECK(solarize(solarize(patch, 0), 0).data == patch.data);  // involution
}

TEST_CASE("posterize keeps the top bits") {
  Image img = Image::rgb(1, 1);
  img.data = {200, 100, 255};
  CHECK(posterize(img, 8).data == img.data);
  const Image p1 = posterize(img, 1);
  CHECK(p1.data == std::vector<std::uint8_t>{128, 0, 128});
  const Image patch = random_patch(8, 8, 4);
  CHECK(posterize(patch, 8).data == patch.data);
}

TEST_CASE("hue_saturation identity configuration is near-exact") {
  const Image patch = random_patch(24, 24, 9);
  const Image out = hue_saturation(patch, 0.0, 1.0);
  CHECK(max_abs_channel_diff(patch, out) <= 1);
}

TEST_CASE("zero saturation collapses to equal channels") {
  const Image patch = random_patch(16, 16, 10);
  const Image out = hue_saturation(patch, 0.0, 0.0);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    CHECK(out.data[3 * i] == out.data[3 * i + 1]);
    CHECK(out.data[3 * i + 1] == out.data[3 * i + 2]);
  }
}

TEST_CASE("a full 360-degree hue wrap is the identity up to rounding") {
  const Image patch = random_patch(16, 16, 12);
  const Image wrapped = hue_saturation(hue_saturation(patch, 180.0, 1.0), 180.0, 1.0);
  CHECK(max_abs_channel_diff(patch, wrapped) <= 2);  // two reconversion roundings
}

TEST_CASE("two_views with all probabilities zero returns the input twice") {
  const Image patch = random_patch(20, 20, 15);
  const auto [a, b] = two_views(patch, AugmentSpec::disabled(), 99);
  CHECK(a.data == patch.data);
  CHECK(b.data == patch.data);
}

TEST_CASE("identical seeds reproduce identical view pairs") {
  const Image patch = random_patch(20, 20, 16);
  AugmentSpec spec;
  spec.solarize_p = spec.posterize_p = spec.hue_sat_p = spec.grayscale_p = 0.5;
  const auto [a1, b1] = two_views(patch, spec, 4242);
  const auto [a2, b2] = two_views(patch, spec, 4242);
  CHECK(a1.data == a2.data);
  CHECK(b1.data == b2.data);
}

TEST_CASE("distinct substreams produce distinct views under randomized params") {
  const Image patch = random_patch(20, 20, 17);
  AugmentSpec spec;
  spec.solarize_p = spec.posterize_p = spec.grayscale_p = 0.0;
  spec.hue_sat_p = 1.0;  // parameters drawn per view
  const auto [a, b] = two_views(patch, spec, 31337);
  CHECK(a.data != b.data);
}

TEST_CASE("augment_view is a pure function of (spec, seed, index, view)") {
  const Image patch = random_patch(12, 12, 20);
  AugmentSpec spec;
  spec.solarize_p = 1.0;
  spec.hue_sat_p = 1.0;
  const Image v1 = augment_view(patch, spec, 7, 3, 0);
  const Image v2 = augment_view(patch, spec, 7, 3, 0);
  const Image v3 = augment_view(patch, spec, 7, 4, 0);
  CHECK(v1.data == v2.data);
  CHECK(v1.data != v3.data);
}

TEST_CASE("augment spec json round-trip and unknown-key rejection") {
  AugmentSpec spec;
  spec.posterize_bits = 5;
  spec.master_seed = 77;
  const AugmentSpec back = augment_spec_from_json(augment_spec_to_json(spec));
  CHECK(back.posterize_bits == 5);
  CHECK(back.master_seed == 77);
  nlohmann::json j = augment_spec_to_json(spec);
  j["mystery"] = 1;
  CHECK_THROWS_AS(augment_spec_from_json(j), ConfigError);
}

TEST_CASE("augment spec validation rejects bad ranges") {
  AugmentSpec spec;
  spec.posterize_bits = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = AugmentSpec{};
  spec.solarize_p = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = AugmentSpec{};
  spec.sat_min = 1.0;
  spec.sat_max = 0.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
