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
#ifndef MPMCLAB_METRICS_HPP
#define MPMCLAB_METRICS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpmclab/mpmc.hpp"
#include "mpmclab/patches.hpp"

namespace mpmclab::metrics {

struct SegScores {
  /// NaN for classes absent from both prediction and ground truth.
  std::vector<double> iou;
  std::vector<double> dice;
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  int counted_classes = 0;
};

/// Per-class TP/FP/FN pixel counts; ignore pixels in gt are skipped.
/// Mergeable: merge() is associative and commutative.
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(int num_classes);

  void add(const LabelGrid& pred, const LabelGrid& gt);
  void merge(const ConfusionAccumulator& other);
  SegScores scores() const;
  double pixel_accuracy() const;

  int num_classes() const { return static_cast<int>(tp_.size()); }
  std::uint64_t tp(int c) const { return tp_[c]; }
  std::uint64_t fp(int c) const { return fp_[c]; }
  std::uint64_t fn(int c) const { return fn_[c]; }

 private:
  std::vector<std::uint64_t> tp_, fp_, fn_;
  std::uint64_t correct_ = 0, total_ = 0;
};

SegScores miou(const LabelGrid& pred, const LabelGrid& gt, int num_classes);
inline SegScores dice(const LabelGrid& pred, const LabelGrid& gt, int num_classes) {
  return miou(pred, gt, num_classes);
}

/// 1 - (mismatched bits / C) for every patch.
std::vector<double> hamming_accuracy(std::span<const std::uint8_t> pred_labels,
                                     const patches::PatchLabelMatrix& targets);
/// probs >= threshold -> 1.
std::vector<std::uint8_t> threshold_probs(const mpmc::MpmcOutput& out, double threshold = 0.5);

/// log(1 + e^f) computed as max(f, 0) + log1p(e^-|f|).
Real energy(Real logit);
std::vector<Real> energy_scores(std::span<const Real> logits);

/// mIoU restricted to each patch's stride tile; NaN where the tile has no
/// countable class (all ignore).
std::vector<double> tile_miou(const LabelGrid& pred, const LabelGrid& gt, const patches::PatchGrid& grid,
                              int num_classes);

struct BinRow {
  std::string label;  // "90+", "80-90", ..., "0-10"
  std::size_t count = 0;
  double fraction = 0.0;
  double mean_delta = 0.0;  // NaN when the bin is empty
  bool empty() const { return count == 0; }
};

/// Ten hamming-accuracy deciles, highest first. Entries with a NaN delta are
/// skipped.
std::vector<BinRow> patch_bin_analysis(std::span<const double> hamming, std::span<const double> delta_miou);
/// Decile index (0 = "90+", 9 = "0-10") for a score in [0, 1].
int decile_bin(double score);

struct EnergyClassStats {
  std::size_t tp_count = 0;
  std::size_t fn_count = 0;
  double tp_mean = 0.0;
  double fn_mean = 0.0;
};

/// Per-class mean label-wise energy of true-positive and false-negative
/// (patch, class) pairs. Positives come from gt patch targets; a positive is
/// a TP when the prediction's patch targets also contain the class.
struct EnergyReport {
  std::vector<EnergyClassStats> classes;
  /// Fraction of classes with both groups non-empty where tp_mean > fn_mean.
  double separated_fraction() const;
  int comparable_classes() const;
};

class EnergyAccumulator {
 public:
  explicit EnergyAccumulator(int num_classes);
  void add(const LabelGrid& pred, const LabelGrid& gt, const mpmc::MpmcOutput& logits, const patches::PatchGrid& grid);
  EnergyReport report() const;

 private:
  std::vector<double> tp_sum_, fn_sum_;
  std::vector<std::size_t> tp_n_, fn_n_;
};

EnergyReport tp_fn_energy_summary(std::span<const LabelGrid> predictions, std::span<const LabelGrid> gt,
                                  std::span<const mpmc::MpmcOutput> logits, const patches::PatchGrid& grid);

/// Pixel accuracy per ground-truth instance size bin. Instances are
/// 4-connected components of one class (class 0 excluded).
struct InstanceSizeAccuracy {
  static constexpr std::array<int, 5> kEdges{0, 16, 64, 256, 1024};
  std::vector<std::uint64_t> correct = std::vector<std::uint64_t>(kEdges.size(), 0);
  std::vector<std::uint64_t> total = std::vector<std::uint64_t>(kEdges.size(), 0);

  void add(const LabelGrid& pred, const LabelGrid& gt);
  static std::string bin_label(std::size_t i);
  double accuracy(std::size_t i) const;
};

}  // namespace mpmclab::metrics

#endif  // MPMCLAB_METRICS_HPP
