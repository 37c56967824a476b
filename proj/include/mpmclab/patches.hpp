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
#ifndef MPMCLAB_PATCHES_HPP
#define MPMCLAB_PATCHES_HPP

#include <cstdint>
#include <vector>

#include "mpmclab/grid.hpp"
#include "mpmclab/segmodel.hpp"

namespace mpmclab::patches {

/// Feature-cell tiling of an H x W image under a tap geometry.
struct PatchGrid {
  seg::RfGeometry geometry;
  int image_height = 0;
  int image_width = 0;

  PatchGrid(seg::RfGeometry g, int h, int w);
  int rows() const { return image_height / geometry.stride; }
  int cols() const { return image_width / geometry.stride; }
  int count() const { return rows() * cols(); }
};

/// R x C binary multi-label targets. Excluded patches have no labeled pixel
/// in their window and take no part in the multi-label loss.
struct PatchLabelMatrix {
  int num_patches = 0;
  int num_classes = 0;
  std::vector<std::uint8_t> targets;  // row-major R x C
  std::vector<std::uint8_t> excluded;  // R
  seg::RfGeometry geometry;

  std::uint8_t at(int r, int c) const { return targets[static_cast<std::size_t>(r) * num_classes + c]; }
  int active_count() const;
  bool operator==(const PatchLabelMatrix&) const = default;
};

/// target[r][c] = 1 iff class c occurs at a non-ignore pixel of patch r's
/// receptive-field window, clipped to the image.
PatchLabelMatrix patch_targets(const LabelGrid& label, const PatchGrid& grid, int num_classes);

/// Index of the feature cell owning pixel (y, x) under stride tiling.
int pixel_to_patch(int y, int x, const PatchGrid& grid);

}  // namespace mpmclab::patches

#endif  // MPMCLAB_PATCHES_HPP
