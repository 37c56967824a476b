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
#include "mpmclab/augment.hpp"

#include <algorithm>
#include <cmath>

#include "mpmclab/rng.hpp"

namespace mpmclab::augment {
namespace {

void check_record(const AugmentRecord& r, int h, int w) {
  const auto& c = r.crop;
  if (c.height <= 0 || c.width <= 0 || c.top < 0 || c.left < 0 || c.top + c.height > h ||
      c.left + c.width > w)
    throw ConfigError("crop rect exceeds image bounds");
  if (r.out_height <= 0 || r.out_width <= 0) throw ConfigError("output size must be positive");
}

// Source coordinate of output index o for a crop of length n starting at s.
double source_coord(int o, int out, int start, int n) {
  return start + (o + 0.5) * static_cast<double>(n) / out - 0.5;
}

}  // namespace

void AugmentPolicy::validate() const {
  if (!(flip_prob >= 0 && flip_prob <= 1)) throw ConfigError("flip_prob must be in [0, 1]");
  if (!(crop_scale_min > 0 && crop_scale_min <= crop_scale_max))
    throw ConfigError("crop scale range must satisfy 0 < min <= max");
  if (crop_scale_max > 1.0) throw ConfigError("crop larger than image (crop_scale_max > 1)");
  if (out_height <= 0 || out_width <= 0) throw ConfigError("training resolution must be positive");
  if (jitter < 0 || contrast < 0 || blur_sigma_max < 0 || cutout_size < 0 || cutout_count < 0)
    throw ConfigError("augmentation magnitudes must be non-negative");
  if (cutout_size > 1) throw ConfigError("cutout_size must be <= 1");
}

ImageGrid apply_geometry(const ImageGrid& image, const AugmentRecord& r) {
  check_record(r, image.height(), image.width());
  const auto& c = r.crop;
  ImageGrid out(r.out_height, r.out_width);
  for (int oy = 0; oy < r.out_height; ++oy) {
    const double sy = std::clamp(source_coord(oy, r.out_height, c.top, c.height),
                                 static_cast<double>(c.top), static_cast<double>(c.top + c.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, c.top + c.height - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < r.out_width; ++ox) {
      const double sx = std::clamp(source_coord(ox, r.out_width, c.left, c.width),
                                   static_cast<double>(c.left), static_cast<double>(c.left + c.width - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, c.left + c.width - 1);
      const double fx = sx - x0;
      const int dx = r.flip ? r.out_width - 1 - ox : ox;
      for (int ch = 0; ch < 3; ++ch) {
        double v;
        if (fy == 0.0 && fx == 0.0) {
          v = image.at(y0, x0, ch);
        } else {
          v = (1 - fy) * ((1 - fx) * image.at(y0, x0, ch) + fx * image.at(y0, x1, ch)) +
              fy * ((1 - fx) * image.at(y1, x0, ch) + fx * image.at(y1, x1, ch));
        }
        out.at(oy, dx, ch) = v;
      }
    }
  }
  return out;
}

LabelGrid apply_geometry(const LabelGrid& label, const AugmentRecord& r) {
  check_record(r, label.height(), label.width());
  const auto& c = r.crop;
  LabelGrid out(r.out_height, r.out_width);
  for (int oy = 0; oy < r.out_height; ++oy) {
    const int sy = std::min(c.top + static_cast<int>((oy + 0.5) * c.height / r.out_height), c.top + c.height - 1);
    for (int ox = 0; ox < r.out_width; ++ox) {
      const int sx = std::min(c.left + static_cast<int>((ox + 0.5) * c.width / r.out_width), c.left + c.width - 1);
      out.at(oy, r.flip ? r.out_width - 1 - ox : ox) = label.at(sy, sx);
    }
  }
  return out;
}

WeakView weak_augment(const ImageGrid& image, const std::optional<LabelGrid>& label,
                      const AugmentPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (label && (label->height() != image.height() || label->width() != image.width()))
    throw ContractError("weak_augment: image and label shapes differ");
  Rng rng(derive_seed(seed, {0x3EA4}));
  AugmentRecord rec;
  rec.seed = seed;
  rec.out_height = policy.out_height;
  rec.out_width = policy.out_width;
  rec.flip = rng.bernoulli(policy.flip_prob);
  const double s = rng.uniform(policy.crop_scale_min, policy.crop_scale_max);
  const int ch = std::clamp(static_cast<int>(std::lround(s * image.height())), 1, image.height());
  const int cw = std::clamp(static_cast<int>(std::lround(s * image.width())), 1, image.width());
  rec.crop = {static_cast<int>(rng.below(image.height() - ch + 1)),
              static_cast<int>(rng.below(image.width() - cw + 1)), ch, cw};
  WeakView v{apply_geometry(image, rec), std::nullopt, rec};
  if (label) v.label = apply_geometry(*label, rec);
  return v;
}

ImageGrid gaussian_blur(const ImageGrid& image, double sigma) {
  if (sigma <= 0) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int H = image.height(), W = image.width();
  ImageGrid tmp(H, W), out(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * image.at(y, std::clamp(x + i, 0, W - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, H - 1), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

StrongView strong_augment(const ImageGrid& image, const AugmentPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (image.height() <= 0 || image.width() <= 0) throw ContractError("strong_augment: empty image");
  Rng rng(derive_seed(seed, {0x57A0}));
  StrongView v{image, {}};
  v.record.seed = seed;
  v.record.crop = {0, 0, image.height(), image.width()};
  v.record.out_height = image.height();
  v.record.out_width = image.width();
  auto& px = v.image.pixels();
  auto& log = v.record.photometric;

  if (policy.jitter > 0 && rng.bernoulli(policy.jitter_prob)) {
    std::array<double, 3> gain, bias;
    for (int c = 0; c < 3; ++c) {
      gain[c] = rng.uniform(1 - policy.jitter, 1 + policy.jitter);
      bias[c] = rng.uniform(-policy.jitter / 2, policy.jitter / 2);
      log.emplace_back("gain" + std::to_string(c), gain[c]);
      log.emplace_back("bias" + std::to_string(c), bias[c]);
    }
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = gain[i % 3] * px[i] + bias[i % 3];
  }
  if (policy.contrast > 0) {
    const double f = rng.uniform(1 - policy.contrast, 1 + policy.contrast);
    double mean = 0;
    for (double p : px) mean += p;
    mean /= static_cast<double>(px.size());
    for (auto& p : px) p = mean + f * (p - mean);
    log.emplace_back("contrast", f);
  }
  if (policy.blur_sigma_max > 0 && rng.bernoulli(policy.blur_prob)) {
    const double sigma = rng.uniform(0.1, policy.blur_sigma_max);
    v.image = gaussian_blur(v.image, sigma);
    log.emplace_back("blur_sigma", sigma);
  }
  auto& out = v.image.pixels();
  for (auto& p : out) p = std::clamp(p, 0.0, 1.0);
  if (policy.cutout_count > 0 && policy.cutout_size > 0) {
    const int side = std::max(1, static_cast<int>(std::lround(policy.cutout_size *
                                                              std::min(image.height(), image.width()))));
    for (int n = 0; n < policy.cutout_count; ++n) {
      const int cy = static_cast<int>(rng.below(image.height()));
      const int cx = static_cast<int>(rng.below(image.width()));
      const int y0 = std::max(0, cy - side / 2), x0 = std::max(0, cx - side / 2);
      const int y1 = std::min(image.height(), y0 + side), x1 = std::min(image.width(), x0 + side);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) v.image.at(y, x, c) = std::clamp(policy.cutout_fill[c], 0.0, 1.0);
      log.emplace_back("cutout_y", y0);
      log.emplace_back("cutout_x", x0);
      log.emplace_back("cutout_side", side);
    }
  }
  return v;
}

}  // namespace mpmclab::augment
