/* Copyright 2026 The MPMC Lab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <doctest.h>

#include <string>

#include "fixtures.hpp"
#include "mpmclab/augment.hpp"

using namespace mpmclab;
using namespace mpmclab::augment;

namespace {

AugmentPolicy geometry_only(double flip_prob, double scale_min = 1.0, int size = 32) {
  AugmentPolicy p;
  p.flip_prob = flip_prob;
  p.crop_scale_min = scale_min;
  p.crop_scale_max = 1.0;
  p.out_height = p.out_width = size;
  return p;
}

AugmentPolicy photometric_off() {
  AugmentPolicy p;
  p.jitter = 0;
  p.contrast = 0;
  p.blur_sigma_max = 0;
  p.cutout_count = 0;
  return p;
}

double record_value(const AugmentRecord& r, const std::string& key) {
  for (const auto& [k, v] : r.photometric)
    if (k == key) return v;
  FAIL("missing record entry " << key);
  return 0;
}

}  // namespace

TEST_CASE("no flip and a full-frame crop are the identity") {
  Rng rng(1);
  const auto img = fixture::random_image(32, 32, rng);
  const auto lab = fixture::random_labels(32, 32, 4, rng, 0.1);
  const auto v = weak_augment(img, lab, geometry_only(0.0), 9);
  CHECK_FALSE(v.record.flip);
  CHECK(v.record.crop == CropRect{0, 0, 32, 32});
  CHECK(v.image == img);
  CHECK(*v.label == lab);
}

TEST_CASE("flip mirrors columns") {
  Rng rng(2);
  const auto img = fixture::random_image(32, 40, rng);
  const auto lab = fixture::random_labels(32, 40, 4, rng);
  auto p = geometry_only(1.0);
  p.out_width = 40;
  const auto v = weak_augment(img, lab, p, 3);
  REQUIRE(v.record.flip);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) {
      REQUIRE(v.label->at(y, x) == lab.at(y, 39 - x));
      for (int c = 0; c < 3; ++c) REQUIRE(v.image.at(y, x, c) == img.at(y, 39 - x, c));
    }
}

TEST_CASE("a record replays the same geometry") {
  Rng rng(3);
  const auto img = fixture::random_image(48, 48, rng);
  const auto lab = fixture::random_labels(48, 48, 5, rng);
  const auto p = geometry_only(0.5, 0.6, 48);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = weak_augment(img, lab, p, seed);
    const auto& c = v.record.crop;
    REQUIRE(c.top >= 0);
    REQUIRE(c.left >= 0);
    REQUIRE(c.top + c.height <= 48);
    REQUIRE(c.left + c.width <= 48);
    REQUIRE(apply_geometry(lab, v.record) == *v.label);
    REQUIRE(apply_geometry(lab, v.record) == apply_geometry(lab, v.record));
    REQUIRE(apply_geometry(img, v.record) == v.image);
    REQUIRE(weak_augment(img, lab, p, seed).image == v.image);
  }
}

TEST_CASE("image and label geometry agree pixel for pixel at native crop size") {
  // Each pixel's red channel encodes its label, so alignment is checkable.
  Rng rng(4);
  const auto lab = fixture::random_labels(16, 16, 200, rng);
  ImageGrid img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(y, x, 0) = lab.at(y, x) / 255.0;
  AugmentRecord r;
  r.crop = {3, 2, 10, 12};
  r.out_height = 10;
  r.out_width = 12;
  for (bool flip : {false, true}) {
    r.flip = flip;
    const auto gi = apply_geometry(img, r);
    const auto gl = apply_geometry(lab, r);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 12; ++x) {
        REQUIRE(gl.at(y, x) == lab.at(3 + y, 2 + (flip ? 11 - x : x)));
        REQUIRE(std::lround(gi.at(y, x, 0) * 255.0) == gl.at(y, x));
      }
  }
}

TEST_CASE("crop outside the image is rejected") {
  AugmentRecord r;
  r.crop = {10, 0, 30, 32};
  r.out_height = r.out_width = 32;
  CHECK_THROWS_AS(apply_geometry(LabelGrid(32, 32), r), ConfigError);
  AugmentPolicy p;
  p.crop_scale_max = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("zero photometric magnitudes leave the view unchanged") {
  Rng rng(5);
  const auto img = fixture::random_image(32, 32, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = strong_augment(img, photometric_off(), seed);
    CHECK(s.image == img);
    CHECK(s.record.photometric.empty());
    CHECK_FALSE(s.record.flip);
  }
}

TEST_CASE("cutout writes the fill color") {
  Rng rng(6);
  const auto img = fixture::random_image(32, 32, rng);
  auto p = photometric_off();
  p.cutout_count = 1;
  p.cutout_size = 0.25;
  p.cutout_fill = {0.3, 0.4, 0.5};
  const auto s = strong_augment(img, p, 11);
  const int y0 = static_cast<int>(record_value(s.record, "cutout_y"));
  const int x0 = static_cast<int>(record_value(s.record, "cutout_x"));
  const int side = static_cast<int>(record_value(s.record, "cutout_side"));
  CHECK(side == 8);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool inside = y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
      for (int c = 0; c < 3; ++c) REQUIRE(s.image.at(y, x, c) == (inside ? p.cutout_fill[c] : img.at(y, x, c)));
    }
}

TEST_CASE("strong views stay in the unit range") {
  Rng rng(7);
  AugmentPolicy p;
  p.jitter = 0.6;
  p.contrast = 0.9;
  p.jitter_prob = 1.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = strong_augment(fixture::random_image(32, 32, rng), p, seed);
    for (Real v : s.image.pixels()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("strong views keep geometry-sensitive structure") {
  // 8-pixel checkerboard; block interiors are farther from an edge than
  // the widest blur kernel reaches, so their bright/dark side must survive.
  ImageGrid board(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) board.at(y, x, c) = ((y / 8 + x / 8) % 2) ? 0.8 : 0.2;
  AugmentPolicy p;
  p.cutout_count = 0;
  p.jitter_prob = 1.0;
  p.blur_prob = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = strong_augment(board, p, seed);
    CHECK(s.record.crop == CropRect{0, 0, 32, 32});
    for (int c = 0; c < 3; ++c) {
      double mean = 0;
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) mean += s.image.at(y, x, c);
      mean /= 1024;
      for (int by = 0; by < 4; ++by)
        for (int bx = 0; bx < 4; ++bx)
          for (int y = by * 8 + 3; y <= by * 8 + 4; ++y)
            for (int x = bx * 8 + 3; x <= bx * 8 + 4; ++x)
              REQUIRE((s.image.at(y, x, c) > mean) == ((by + bx) % 2 == 1));
    }
  }
}

TEST_CASE("strong augmentation is deterministic in its seed") {
  Rng rng(8);
  const auto img = fixture::random_image(32, 32, rng);
  AugmentPolicy p;
  CHECK(strong_augment(img, p, 5).image == strong_augment(img, p, 5).image);
  CHECK_FALSE(strong_augment(img, p, 5).image == strong_augment(img, p, 6).image);
}
