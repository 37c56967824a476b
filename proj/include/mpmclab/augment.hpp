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
#ifndef MPMCLAB_AUGMENT_HPP
#define MPMCLAB_AUGMENT_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpmclab/grid.hpp"

namespace mpmclab::augment {

struct CropRect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  bool operator==(const CropRect&) const = default;
};

/// Magnitudes and probabilities for both views.
struct AugmentPolicy {
  // weak: geometry
  double flip_prob = 0.5;
  /// Crop side as a fraction of the source side, drawn uniformly.
  double crop_scale_min = 0.7;
  double crop_scale_max = 1.0;
  int out_height = 64;
  int out_width = 64;

  // strong: photometric only
  double jitter_prob = 0.8;
  double jitter = 0.25;  // per-channel gain in [1-j, 1+j], bias in [-j/2, j/2]
  double contrast = 0.3;  // factor in [1-c, 1+c] around the image mean
  double blur_prob = 0.5;
  double blur_sigma_max = 1.2;
  int cutout_count = 1;
  double cutout_size = 0.25;  // square side as a fraction of min(h, w)
  std::array<Real, 3> cutout_fill{0.5, 0.5, 0.5};

  void validate() const;
};

struct AugmentRecord {
  bool flip = false;
  CropRect crop;
  int out_height = 0;
  int out_width = 0;
  /// Named photometric parameters in application order.
  std::vector<std::pair<std::string, double>> photometric;
  std::uint64_t seed = 0;
};

struct WeakView {
  ImageGrid image;
  std::optional<LabelGrid> label;
  AugmentRecord record;
};

/// Flip + crop-and-resize. Image uses bilinear resampling, label nearest.
WeakView weak_augment(const ImageGrid& image, const std::optional<LabelGrid>& label,
                      const AugmentPolicy& policy, std::uint64_t seed);

/// Replays the geometric part of a record.
ImageGrid apply_geometry(const ImageGrid& image, const AugmentRecord& record);
LabelGrid apply_geometry(const LabelGrid& label, const AugmentRecord& record);

struct StrongView {
  ImageGrid image;
  AugmentRecord record;
};

/// Photometric-only perturbation of an (already weak) view: color jitter,
/// contrast, Gaussian blur, cutout; clipped to [0, 1].
StrongView strong_augment(const ImageGrid& image, const AugmentPolicy& policy, std::uint64_t seed);

ImageGrid gaussian_blur(const ImageGrid& image, double sigma);

}  // namespace mpmclab::augment

#endif  // MPMCLAB_AUGMENT_HPP
