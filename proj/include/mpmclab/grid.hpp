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
#ifndef MPMCLAB_GRID_HPP
#define MPMCLAB_GRID_HPP

#include <cstdint>
#include <vector>

#include "mpmclab/common.hpp"
#include "mpmclab/tensor.hpp"

namespace mpmclab {

/// H x W x 3 image, channel values in [0, 1], stored interleaved (y, x, ch).
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, Real fill = 0.0)
      : height_(height), width_(width),
        pixels_(static_cast<std::size_t>(height) * width * 3, fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  Real& at(int y, int x, int ch) { return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + ch]; }
  Real at(int y, int x, int ch) const { return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + ch]; }
  std::vector<Real>& pixels() noexcept { return pixels_; }
  const std::vector<Real>& pixels() const noexcept { return pixels_; }

  /// Planar {3, H, W} copy for the network input.
  Tensor to_tensor() const;

  bool operator==(const ImageGrid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Real> pixels_;
};

/// H x W class map; values are class ids or kIgnoreLabel.
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(int height, int width, std::uint8_t fill = 0)
      : height_(height), width_(width), labels_(static_cast<std::size_t>(height) * width, fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::uint8_t& at(int y, int x) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::vector<std::uint8_t>& labels() noexcept { return labels_; }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  bool operator==(const LabelGrid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Throws LoadError if any value is >= num_classes and not the ignore label.
void validate_labels(const LabelGrid& labels, int num_classes, const std::string& context);

}  // namespace mpmclab

#endif  // MPMCLAB_GRID_HPP
