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
#ifndef MPMCLAB_SEGMODEL_HPP
#define MPMCLAB_SEGMODEL_HPP

#include <span>
#include <vector>

#include "mpmclab/params.hpp"

namespace mpmclab::seg {

/// Encoder of conv stages, each: conv3x3 -> ReLU -> conv3x3 -> ReLU, then a
/// stride x stride average pool when stride > 1. The decoder sums a 1x1
/// projection of every stage output after bilinear upsampling to H x W.
struct SegmentorSpec {
  int in_channels = 3;
  std::vector<int> stage_channels{16, 32, 32};
  std::vector<int> stage_strides{2, 2, 1};
  int tap_layer = 0;
  int num_classes = 4;

  /// Throws ConfigError for an inconsistent spec; when height/width are
  /// positive also checks that the cumulative stride at tap_layer divides them.
  void validate(int height = 0, int width = 0) const;
  int num_stages() const { return static_cast<int>(stage_channels.size()); }
  /// Product of strides of stages 0..stage.
  int cumulative_stride(int stage) const;
  int tap_channels() const { return stage_channels.at(tap_layer); }
  bool operator==(const SegmentorSpec&) const = default;
};

/// Receptive-field geometry of one feature cell. Cell (i, j) sees input rows
/// [i*stride + offset, i*stride + offset + rf_size - 1] (same for columns)
/// before clipping to the image.
struct RfGeometry {
  int stride = 1;
  int rf_size = 1;
  int offset = 0;
  bool operator==(const RfGeometry&) const = default;
};

/// One layer of the receptive-field recurrence.
struct RfLayer {
  int kernel;
  int stride;
  int pad;
};

/// Standard recurrence over a layer chain: rf += (k-1)*jump; jump *= s;
/// the first pixel of cell 0 moves by -pad*jump.
RfGeometry rf_geometry(std::span<const RfLayer> layers);
/// Geometry at the spec's tap layer.
RfGeometry rf_geometry(const SegmentorSpec& spec);
/// Geometry at the output of an arbitrary stage.
RfGeometry rf_geometry(const SegmentorSpec& spec, int stage);

ParamSet init_params(const SegmentorSpec& spec, std::uint64_t seed);
/// Sets every decoder projection weight and bias to zero.
void zero_head(ParamSet& params);

struct SegOutput {
  ag::Var logits;  // {C, H, W}
  ag::Var tap;      // {d, H/stride, W/stride}
  ag::Var last;     // deepest stage output, used for feature export
};

/// Full forward pass. params must come from bind() of init_params(spec, ...).
SegOutput seg_forward(const SegmentorSpec& spec, std::span<const ag::Var> params, const ag::Var& image);

/// Encoder stages 0..spec.tap_layer only.
ag::Var tap_forward(const SegmentorSpec& spec, std::span<const ag::Var> params, const ag::Var& image);

}  // namespace mpmclab::seg

#endif  // MPMCLAB_SEGMODEL_HPP
