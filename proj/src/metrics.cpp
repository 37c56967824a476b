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
#include "mpmclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpmclab::metrics {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same(const LabelGrid& a, const LabelGrid& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ContractError("metrics: prediction/gt shape mismatch");
}

}  // namespace

ConfusionAccumulator::ConfusionAccumulator(int num_classes)
    : tp_(num_classes, 0), fp_(num_classes, 0), fn_(num_classes, 0) {}

void ConfusionAccumulator::add(const LabelGrid& pred, const LabelGrid& gt) {
  check_same(pred, gt);
  const int C = num_classes();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt.labels()[i];
    if (g == kIgnoreLabel || g >= C) continue;
    const int p = pred.labels()[i];
    ++total_;
    if (p == g) {
      ++tp_[g];
      ++correct_;
    } else {
      ++fn_[g];
      if (p < C) ++fp_[p];
    }
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& o) {
  if (o.num_classes() != num_classes()) throw ContractError("ConfusionAccumulator::merge: class count mismatch");
  for (int c = 0; c < num_classes(); ++c) {
    tp_[c] += o.tp_[c];
    fp_[c] += o.fp_[c];
    fn_[c] += o.fn_[c];
  }
  correct_ += o.correct_;
  total_ += o.total_;
}

SegScores ConfusionAccumulator::scores() const {
  SegScores s;
  const int C = num_classes();
  s.iou.assign(C, kNaN);
  s.dice.assign(C, kNaN);
  double si = 0, sd = 0;
  for (int c = 0; c < C; ++c) {
    const double tp = static_cast<double>(tp_[c]), fp = static_cast<double>(fp_[c]), fn = static_cast<double>(fn_[c]);
    if (tp + fp + fn == 0) continue;
    s.iou[c] = tp / (tp + fp + fn);
    s.dice[c] = 2 * tp / (2 * tp + fp + fn);
    si += s.iou[c];
    sd += s.dice[c];
    ++s.counted_classes;
  }
  if (s.counted_classes > 0) {
    s.mean_iou = si / s.counted_classes;
    s.mean_dice = sd / s.counted_classes;
  }
  return s;
}

double ConfusionAccumulator::pixel_accuracy() const {
  return total_ ? static_cast<double>(correct_) / static_cast<double>(total_) : 0.0;
}

SegScores miou(const LabelGrid& pred, const LabelGrid& gt, int num_classes) {
  ConfusionAccumulator acc(num_classes);
  acc.add(pred, gt);
  return acc.scores();
}

std::vector<double> hamming_accuracy(std::span<const std::uint8_t> pred, const patches::PatchLabelMatrix& t) {
  if (pred.size() != t.targets.size()) throw ContractError("hamming_accuracy: shape mismatch");
  const int C = t.num_classes;
  std::vector<double> out(t.num_patches);
  for (int r = 0; r < t.num_patches; ++r) {
    int mismatched = 0;
    for (int c = 0; c < C; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * C + c;
      mismatched += (pred[k] != 0) != (t.targets[k] != 0);
    }
    out[r] = 1.0 - static_cast<double>(mismatched) / C;
  }
  return out;
}

std::vector<std::uint8_t> threshold_probs(const mpmc::MpmcOutput& out, double threshold) {
  std::vector<std::uint8_t> b(out.probs.size());
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = out.probs[k] >= threshold ? 1 : 0;
  return b;
}

Real energy(Real f) { return std::max(f, 0.0) + std::log1p(std::exp(-std::abs(f))); }

std::vector<Real> energy_scores(std::span<const Real> logits) {
  std::vector<Real> e(logits.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = energy(logits[i]);
  return e;
}

std::vector<double> tile_miou(const LabelGrid& pred, const LabelGrid& gt, const patches::PatchGrid& grid,
                              int num_classes) {
  check_same(pred, gt);
  if (gt.height() != grid.image_height || gt.width() != grid.image_width)
    throw ContractError("tile_miou: grid does not match labels");
  const int s = grid.geometry.stride;
  std::vector<double> out(grid.count(), kNaN);
  for (int i = 0; i < grid.rows(); ++i)
    for (int j = 0; j < grid.cols(); ++j) {
      ConfusionAccumulator acc(num_classes);
      LabelGrid p(s, s), g(s, s);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          p.at(y, x) = pred.at(i * s + y, j * s + x);
          g.at(y, x) = gt.at(i * s + y, j * s + x);
        }
      acc.add(p, g);
      const auto sc = acc.scores();
      if (sc.counted_classes > 0) out[i * grid.cols() + j] = sc.mean_iou;
    }
  return out;
}

int decile_bin(double score) {
  int idx = static_cast<int>(std::floor(score * 10.0 + 1e-9));
  idx = std::clamp(idx, 0, 9);
  return 9 - idx;
}

std::vector<BinRow> patch_bin_analysis(std::span<const double> hamming, std::span<const double> delta) {
  if (hamming.size() != delta.size()) throw ContractError("patch_bin_analysis: series length mismatch");
  std::vector<BinRow> rows(10);
  rows[0].label = "90+";
  for (int b = 1; b < 10; ++b) rows[b].label = std::to_string(90 - 10 * b) + "-" + std::to_string(100 - 10 * b);
  std::vector<double> sums(10, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < hamming.size(); ++i) {
    if (std::isnan(delta[i]) || std::isnan(hamming[i])) continue;
    const int b = decile_bin(hamming[i]);
    ++rows[b].count;
    sums[b] += delta[i];
    ++used;
  }
  for (int b = 0; b < 10; ++b) {
    rows[b].fraction = used ? static_cast<double>(rows[b].count) / static_cast<double>(used) : 0.0;
    rows[b].mean_delta = rows[b].count ? sums[b] / static_cast<double>(rows[b].count) : kNaN;
  }
  return rows;
}

double EnergyReport::separated_fraction() const {
  int comparable = 0, separated = 0;
  for (const auto& c : classes) {
    if (c.tp_count == 0 || c.fn_count == 0) continue;
    ++comparable;
    separated += c.tp_mean > c.fn_mean;
  }
  return comparable ? static_cast<double>(separated) / comparable : 0.0;
}

int EnergyReport::comparable_classes() const {
  int n = 0;
  for (const auto& c : classes) n += (c.tp_count > 0 && c.fn_count > 0);
  return n;
}

EnergyAccumulator::EnergyAccumulator(int num_classes)
    : tp_sum_(num_classes, 0.0), fn_sum_(num_classes, 0.0), tp_n_(num_classes, 0), fn_n_(num_classes, 0) {}

void EnergyAccumulator::add(const LabelGrid& pred, const LabelGrid& gt, const mpmc::MpmcOutput& logits,
                            const patches::PatchGrid& grid) {
  const int C = static_cast<int>(tp_sum_.size());
  if (logits.num_classes != C || logits.num_patches != grid.count())
    throw ContractError("EnergyAccumulator: logits do not match grid/classes");
  const auto gt_t = patches::patch_targets(gt, grid, C);
  const auto pr_t = patches::patch_targets(pred, grid, C);
  for (int r = 0; r < gt_t.num_patches; ++r) {
    if (gt_t.excluded[r]) continue;
    for (int c = 0; c < C; ++c) {
      if (!gt_t.at(r, c)) continue;
      const Real e = energy(logits.logit(r, c));
      if (pr_t.at(r, c)) {
        tp_sum_[c] += e;
        ++tp_n_[c];
      } else {
        fn_sum_[c] += e;
        ++fn_n_[c];
      }
    }
  }
}

EnergyReport EnergyAccumulator::report() const {
  EnergyReport rep;
  for (std::size_t c = 0; c < tp_sum_.size(); ++c) {
    EnergyClassStats s;
    s.tp_count = tp_n_[c];
    s.fn_count = fn_n_[c];
    s.tp_mean = tp_n_[c] ? tp_sum_[c] / static_cast<double>(tp_n_[c]) : 0.0;
    s.fn_mean = fn_n_[c] ? fn_sum_[c] / static_cast<double>(fn_n_[c]) : 0.0;
    rep.classes.push_back(s);
  }
  return rep;
}

EnergyReport tp_fn_energy_summary(std::span<const LabelGrid> predictions, std::span<const LabelGrid> gt,
                                  std::span<const mpmc::MpmcOutput> logits, const patches::PatchGrid& grid) {
  if (predictions.size() != gt.size() || gt.size() != logits.size())
    throw ContractError("tp_fn_energy_summary: batch mismatch");
  if (logits.empty()) return EnergyAccumulator(0).report();
  EnergyAccumulator acc(logits[0].num_classes);
  for (std::size_t i = 0; i < gt.size(); ++i) acc.add(predictions[i], gt[i], logits[i], grid);
  return acc.report();
}

void InstanceSizeAccuracy::add(const LabelGrid& pred, const LabelGrid& gt) {
  check_same(pred, gt);
  const int H = gt.height(), W = gt.width();
  std::vector<int> comp(gt.size(), -1);
  std::vector<std::size_t> stack, members;
  for (int start = 0; start < static_cast<int>(gt.size()); ++start) {
    const int cls = gt.labels()[start];
    if (comp[start] >= 0 || cls == 0 || cls == kIgnoreLabel) continue;
    members.clear();
    stack.assign(1, static_cast<std::size_t>(start));
    comp[start] = start;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      members.push_back(k);
      const int y = static_cast<int>(k) / W, x = static_cast<int>(k) % W;
      const int ny[4] = {y - 1, y + 1, y, y}, nx[4] = {x, x, x - 1, x + 1};
      for (int d = 0; d < 4; ++d) {
        if (ny[d] < 0 || ny[d] >= H || nx[d] < 0 || nx[d] >= W) continue;
        const std::size_t nk = static_cast<std::size_t>(ny[d]) * W + nx[d];
        if (comp[nk] < 0 && gt.labels()[nk] == cls) {
          comp[nk] = start;
          stack.push_back(nk);
        }
      }
    }
    std::size_t bin = 0;
    while (bin + 1 < kEdges.size() && members.size() >= static_cast<std::size_t>(kEdges[bin + 1])) ++bin;
    for (auto k : members) {
      ++total[bin];
      correct[bin] += pred.labels()[k] == cls;
    }
  }
}

std::string InstanceSizeAccuracy::bin_label(std::size_t i) {
  if (i + 1 >= kEdges.size()) return std::to_string(kEdges[i]) + "+";
  return std::to_string(kEdges[i]) + "-" + std::to_string(kEdges[i + 1]);
}

double InstanceSizeAccuracy::accuracy(std::size_t i) const {
  return total[i] ? static_cast<double>(correct[i]) / static_cast<double>(total[i]) : kNaN;
}

}  // namespace mpmclab::metrics
