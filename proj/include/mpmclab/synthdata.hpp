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
#ifndef MPMCLAB_SYNTHDATA_HPP
#define MPMCLAB_SYNTHDATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mpmclab/grid.hpp"

namespace mpmclab::synth {

/// Procedural scene generator parameters. Background is always class 0.
struct DatasetSpec {
  int num_classes = 4;
  int height = 64;
  int width = 64;
  int shapes_min = 2;
  int shapes_max = 5;
  /// Foreground class c (1-based) is drawn with weight skew^-(c-1).
  double class_frequency_skew = 2.0;
  /// Shape radius range as a fraction of min(height, width).
  double radius_min = 0.04;
  double radius_max = 0.22;
  /// Per-pixel additive Gaussian noise on shapes and background.
  double noise_sigma = 0.06;
  /// 0 gives every class a distinct hue; 1 makes paired classes share one,
  /// leaving only shape and texture to tell them apart.
  double color_overlap = 0.6;
  std::uint64_t seed = 1;

  /// Throws ConfigError when out of range.
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

struct Rational {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  /// Parses "a/b" or a decimal such as "0.25".
  static Rational parse(const std::string& text);
  bool operator==(const Rational&) const = default;
};

struct SplitManifest {
  std::vector<int> labeled_ids;
  std::vector<int> unlabeled_ids;
  std::vector<int> val_ids;
  Rational label_fraction;
  bool operator==(const SplitManifest&) const = default;
};

struct Scene {
  ImageGrid image;
  LabelGrid label;
};

/// Deterministic in (spec, scene_seed). Pixel values are quantized to k/255
/// so PNG storage is exact.
Scene generate_scene(const DatasetSpec& spec, std::uint64_t scene_seed);

/// labeled count = max(1, round(fraction * num_train)); val ids follow the
/// train ids as num_train .. num_train + num_val - 1.
SplitManifest make_splits(int num_train, Rational fraction, std::uint64_t seed, int num_val = 0);

struct Dataset {
  DatasetSpec spec;
  std::vector<ImageGrid> images;  // indexed by id
  std::vector<LabelGrid> labels;
  SplitManifest split;

  int num_classes() const { return spec.num_classes; }
  std::size_t size() const { return images.size(); }
};

/// Scenes use seed derive_seed(spec.seed, {id}); the split uses split_seed.
Dataset generate_dataset(const DatasetSpec& spec, int num_train, int num_val, Rational fraction,
                         std::uint64_t split_seed);

/// Layout: images/{id}.png (RGB8), masks/{id}.png (gray8 class ids),
/// manifest.json (spec, ids, splits, class count).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Per-class pixel counts over a set of label grids (ignore excluded).
std::vector<std::uint64_t> class_histogram(const std::vector<LabelGrid>& labels, int num_classes);

/// Mean RGB over a set of images; used as the cutout fill value.
std::array<Real, 3> mean_color(const std::vector<ImageGrid>& images);

std::string scene_id(int index);

}  // namespace mpmclab::synth

#endif  // MPMCLAB_SYNTHDATA_HPP
