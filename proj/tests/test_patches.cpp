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

#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "mpmclab/patches.hpp"
#include "mpmclab/synthdata.hpp"

using namespace mpmclab;
using namespace mpmclab::patches;

namespace {

void check_against_oracle(const LabelGrid& label, const seg::RfGeometry& g, int C) {
  const PatchGrid grid(g, label.height(), label.width());
  const auto got = patch_targets(label, grid, C);
  const auto want = oracle::patch_targets(label, g.stride, g.rf_size, g.offset, C);
  REQUIRE(got.num_patches == grid.count());
  REQUIRE(got.num_classes == C);
  REQUIRE(got.targets == want.targets);
  REQUIRE(got.excluded == want.excluded);
}

}  // namespace

TEST_CASE("uniform grid is one-hot in every patch") {
  const LabelGrid g(32, 32, 3);
  const PatchGrid grid({4, 7, -2}, 32, 32);
  const auto t = patch_targets(g, grid, 5);
  for (int r = 0; r < t.num_patches; ++r) {
    REQUIRE_FALSE(t.excluded[r]);
    for (int c = 0; c < 5; ++c) REQUIRE(t.at(r, c) == (c == 3));
  }
  CHECK(t.active_count() == t.num_patches);
}

TEST_CASE("all-ignore grid excludes every patch") {
  const LabelGrid g(32, 32, kIgnoreLabel);
  const auto t = patch_targets(g, PatchGrid({4, 7, -2}, 32, 32), 4);
  for (auto e : t.excluded) REQUIRE(e == 1);
  for (auto v : t.targets) REQUIRE(v == 0);
  CHECK(t.active_count() == 0);
}

TEST_CASE("random grid with rf 7 and stride 4 matches the window scan") {
  Rng rng(1);
  check_against_oracle(fixture::random_labels(32, 32, 4, rng, 0.1), {4, 7, -2}, 4);
  check_against_oracle(fixture::blocky_labels(32, 32, 6, rng), {4, 7, -2}, 6);
}

TEST_CASE("window scan equivalence across geometries") {
  Rng rng(2);
  const seg::RfGeometry geoms[] = {{4, 7, -2}, {2, 6, -2}, {4, 16, -6}, {1, 3, -1}, {8, 19, 0}};
  for (int n = 0; n < 200; ++n) {
    const auto& g = geoms[n % 5];
    const int C = 3 + static_cast<int>(rng.below(6));
    const auto label = n % 2 ? fixture::random_labels(32, 32, C, rng, 0.3) : fixture::blocky_labels(32, 32, C, rng);
    check_against_oracle(label, g, C);
  }
}

TEST_CASE("pixel to patch ownership") {
  const PatchGrid grid({4, 16, -6}, 64, 64);
  CHECK(grid.cols() == 16);
  CHECK(pixel_to_patch(0, 0, grid) == 0);
  CHECK(pixel_to_patch(5, 9, grid) == 18);
  CHECK(pixel_to_patch(63, 63, grid) == grid.count() - 1);
  CHECK_THROWS_AS(pixel_to_patch(64, 0, grid), ContractError);
  CHECK_THROWS_AS(pixel_to_patch(0, -1, grid), ContractError);
}

TEST_CASE("pixel ownership partitions the image into stride tiles") {
  for (int stride : {1, 2, 4, 8}) {
    const PatchGrid grid({stride, 5, -2}, 32, 48);
    std::vector<int> hits(grid.count(), 0);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 48; ++x) {
        const int r = pixel_to_patch(y, x, grid);
        REQUIRE(r >= 0);
        REQUIRE(r < grid.count());
        REQUIRE(r == oracle::owner(y, x, stride, grid.cols()));
        ++hits[r];
      }
    for (int h : hits) REQUIRE(h == stride * stride);
  }
}

TEST_CASE("adding a class pixel never removes a positive") {
  Rng rng(3);
  const PatchGrid grid({4, 7, -2}, 32, 32);
  for (int n = 0; n < 50; ++n) {
    auto label = fixture::random_labels(32, 32, 4, rng, 0.5);
    const auto before = patch_targets(label, grid, 4);
    label.at(rng.range(0, 31), rng.range(0, 31)) = static_cast<std::uint8_t>(rng.below(4));
    const auto after = patch_targets(label, grid, 4);
    for (std::size_t k = 0; k < before.targets.size(); ++k) REQUIRE(after.targets[k] >= before.targets[k]);
  }
}

TEST_CASE("positives are sparse on skewed synthetic scenes") {
  synth::DatasetSpec s;
  s.num_classes = 6;
  const PatchGrid grid(seg::rf_geometry(seg::SegmentorSpec{}), s.height, s.width);
  double positives = 0, patches = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto t = patch_targets(synth::generate_scene(s, k).label, grid, s.num_classes);
    for (int r = 0; r < t.num_patches; ++r) {
      if (t.excluded[r]) continue;
      patches += 1;
      for (int c = 0; c < s.num_classes; ++c) positives += t.at(r, c);
    }
  }
  CHECK(positives / patches <= s.num_classes / 2.0);
}
