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
#include "mpmclab/patches.hpp"

#include <algorithm>
#include <string>

namespace mpmclab::patches {

PatchGrid::PatchGrid(seg::RfGeometry g, int h, int w) : geometry(g), image_height(h), image_width(w) {
  if (g.stride < 1 || g.rf_size < 1) throw ContractError("PatchGrid: invalid geometry");
  if (h <= 0 || w <= 0 || h % g.stride != 0 || w % g.stride != 0)
    throw ContractError("PatchGrid: stride " + std::to_string(g.stride) + " does not tile " + std::to_string(h) +
                        "x" + std::to_string(w));
}

int PatchLabelMatrix::active_count() const {
  return static_cast<int>(std::count(excluded.begin(), excluded.end(), 0));
}

PatchLabelMatrix patch_targets(const LabelGrid& label, const PatchGrid& grid, int num_classes) {
  if (label.height() != grid.image_height || label.width() != grid.image_width)
    throw ContractError("patch_targets: label shape does not match grid");
  const int H = label.height(), W = label.width();
  const int C = num_classes;
  // Per-class integral images, (H+1) x (W+1); class C counts labeled pixels.
  const int planes = C + 1;
  std::vector<int> sat(static_cast<std::size_t>(planes) * (H + 1) * (W + 1), 0);
  auto idx = [&](int c, int y, int x) { return (static_cast<std::size_t>(c) * (H + 1) + y) * (W + 1) + x; };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int v = label.at(y, x);
      for (int c = 0; c < planes; ++c) {
        const int hit = (c < C) ? (v == c) : (v != kIgnoreLabel && v < C);
        sat[idx(c, y + 1, x + 1)] = hit + sat[idx(c, y, x + 1)] + sat[idx(c, y + 1, x)] - sat[idx(c, y, x)];
      }
    }
  const auto& g = grid.geometry;
  PatchLabelMatrix m;
  m.num_patches = grid.count();
  m.num_classes = C;
  m.geometry = g;
  m.targets.assign(static_cast<std::size_t>(m.num_patches) * C, 0);
  m.excluded.assign(m.num_patches, 0);
  for (int i = 0; i < grid.rows(); ++i) {
    const int y0 = std::max(0, i * g.stride + g.offset);
    const int y1 = std::min(H, i * g.stride + g.offset + g.rf_size);
    for (int j = 0; j < grid.cols(); ++j) {
      const int x0 = std::max(0, j * g.stride + g.offset);
      const int x1 = std::min(W, j * g.stride + g.offset + g.rf_size);
      const int r = i * grid.cols() + j;
      auto count = [&](int c) {
        return sat[idx(c, y1, x1)] - sat[idx(c, y0, x1)] - sat[idx(c, y1, x0)] + sat[idx(c, y0, x0)];
      };
      if (y1 <= y0 || x1 <= x0 || count(C) == 0) {
        m.excluded[r] = 1;
        continue;
      }
      for (int c = 0; c < C; ++c) m.targets[static_cast<std::size_t>(r) * C + c] = count(c) > 0 ? 1 : 0;
    }
  }
  return m;
}

int pixel_to_patch(int y, int x, const PatchGrid& grid) {
  if (y < 0 || x < 0 || y >= grid.image_height || x >= grid.image_width)
    throw ContractError("pixel_to_patch: pixel (" + std::to_string(y) + "," + std::to_string(x) + ") out of bounds");
  return (y / grid.geometry.stride) * grid.cols() + x / grid.geometry.stride;
}

}  // namespace mpmclab::patches
