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

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "mpmclab/metrics.hpp"

using namespace mpmclab;
using namespace mpmclab::metrics;

namespace {

mpmc::MpmcOutput head_output(std::vector<Real> logits, int C) {
  mpmc::MpmcOutput o;
  o.num_classes = C;
  o.num_patches = static_cast<int>(logits.size()) / C;
  o.logits = std::move(logits);
  for (Real l : o.logits) o.probs.push_back(mpmc::sigmoid(l));
  return o;
}

}  // namespace

TEST_CASE("perfect, disjoint and half-overlap segmentations") {
  Rng rng(1);
  const auto gt = fixture::random_labels(16, 16, 4, rng, 0.1);
  const auto same = miou(gt, gt, 4);
  CHECK(same.mean_iou == 1.0);
  CHECK(same.mean_dice == 1.0);

  LabelGrid a(8, 8, 0), b(8, 8, 1);
  const auto disjoint = miou(a, b, 2);
  CHECK(disjoint.iou[0] == 0.0);
  CHECK(disjoint.iou[1] == 0.0);
  CHECK(disjoint.dice[1] == 0.0);
  CHECK(disjoint.mean_iou == 0.0);

  // One foreground class: prediction covers the left half, gt covers all.
  LabelGrid pred(8, 8, 0), full(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 4; ++x) pred.at(y, x) = 1;
  const auto half = miou(pred, full, 2);
  CHECK(half.iou[1] == doctest::Approx(0.5));
  CHECK(half.dice[1] == doctest::Approx(2.0 / 3.0));
  CHECK(std::isnan(miou(full, full, 3).iou[2]));
  CHECK(miou(full, full, 3).counted_classes == 1);
}

TEST_CASE("dice is 2 iou / (1 + iou) on random masks") {
  Rng rng(2);
  for (int n = 0; n < 100; ++n) {
    const int C = 2 + static_cast<int>(rng.below(6));
    const auto p = fixture::blocky_labels(24, 24, C, rng), g = fixture::random_labels(24, 24, C, rng, 0.2);
    const auto s = miou(p, g, C);
    for (int c = 0; c < C; ++c) {
      if (std::isnan(s.iou[c])) continue;
      REQUIRE(s.dice[c] == doctest::Approx(2 * s.iou[c] / (1 + s.iou[c])).epsilon(1e-12));
      REQUIRE(s.dice[c] >= s.iou[c]);
    }
  }
}

TEST_CASE("ignore pixels are skipped and accumulators merge") {
  Rng rng(3);
  LabelGrid gt(8, 8, kIgnoreLabel), pred(8, 8, 2);
  CHECK(miou(pred, gt, 3).counted_classes == 0);
  std::vector<std::pair<LabelGrid, LabelGrid>> items;
  for (int i = 0; i < 6; ++i) items.emplace_back(fixture::random_labels(16, 16, 4, rng), fixture::random_labels(16, 16, 4, rng, 0.1));
  ConfusionAccumulator whole(4), a(4), b(4), c(4);
  for (int i = 0; i < 6; ++i) {
    whole.add(items[i].first, items[i].second);
    (i < 2 ? a : i < 4 ? b : c).add(items[i].first, items[i].second);
  }
  ConfusionAccumulator ab_c = a, c_ba = c, ba = b;
  ab_c.merge(b);
  ab_c.merge(c);
  ba.merge(a);
  c_ba.merge(ba);
  for (int k = 0; k < 4; ++k) {
    CHECK(ab_c.tp(k) == whole.tp(k));
    CHECK(c_ba.fp(k) == whole.fp(k));
    CHECK(c_ba.fn(k) == whole.fn(k));
  }
  CHECK(ab_c.pixel_accuracy() == whole.pixel_accuracy());
  CHECK(c_ba.scores().mean_iou == doctest::Approx(whole.scores().mean_iou).epsilon(1e-15));
}

TEST_CASE("hamming accuracy") {
  patches::PatchLabelMatrix t;
  t.num_patches = 1;
  t.num_classes = 10;
  t.targets = {1, 0, 1, 1, 0, 0, 0, 1, 0, 0};
  t.excluded = {0};
  CHECK(hamming_accuracy(t.targets, t)[0] == 1.0);
  std::vector<std::uint8_t> comp(10), one = t.targets;
  for (int c = 0; c < 10; ++c) comp[c] = !t.targets[c];
  one[4] = 1;
  CHECK(hamming_accuracy(comp, t)[0] == 0.0);
  CHECK(hamming_accuracy(one, t)[0] == doctest::Approx(0.9));
  // Simultaneous class permutation leaves the score unchanged.
  auto pt = t;
  auto pone = one;
  for (int c = 0; c < 10; ++c) {
    pt.targets[(c + 3) % 10] = t.targets[c];
    pone[(c + 3) % 10] = one[c];
  }
  CHECK(hamming_accuracy(pone, pt)[0] == hamming_accuracy(one, t)[0]);
  const auto q = head_output({0.0, -1.0, 2.0}, 3);
  CHECK(threshold_probs(q) == std::vector<std::uint8_t>{1, 0, 1});
}

TEST_CASE("energy scores") {
  CHECK(energy(0.0) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(energy(-1000.0) == 0.0);
  CHECK(std::abs(energy(30.0) - 30.0) < 1e-9);
  CHECK(std::isfinite(energy(1e4)));
  double prev = energy(-50.0);
  CHECK(prev > 0.0);
  for (double f = -49.5; f <= 50.0; f += 0.5) {
    const double e = energy(f);
    REQUIRE(e > prev);
    REQUIRE(e == doctest::Approx(std::log1p(std::exp(f))).epsilon(1e-12));
    prev = e;
  }
  const std::vector<Real> fs{-2.0, 0.0, 3.0};
  const auto es = energy_scores(fs);
  for (int i = 0; i < 3; ++i) CHECK(es[i] == energy(fs[i]));
}

TEST_CASE("decile bins and bin analysis") {
  CHECK(decile_bin(1.0) == 0);
  CHECK(decile_bin(0.95) == 0);
  CHECK(decile_bin(0.9) == 0);
  CHECK(decile_bin(0.8999) == 1);
  CHECK(decile_bin(0.75) == 2);
  CHECK(decile_bin(0.0) == 9);

  const std::vector<double> perfect(50, 1.0), zero(50, 0.0);
  const auto rows = patch_bin_analysis(perfect, zero);
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].label == "90+");
  CHECK(rows[1].label == "80-90");
  CHECK(rows[9].label == "0-10");
  CHECK(rows[0].fraction == 1.0);
  CHECK(rows[0].mean_delta == 0.0);
  for (int b = 1; b < 10; ++b) {
    CHECK(rows[b].empty());
    CHECK(std::isnan(rows[b].mean_delta));
  }

  // Histogram oracle on random A/B data with some NaN deltas.
  Rng rng(4);
  std::vector<double> ham(500), delta(500);
  for (int i = 0; i < 500; ++i) {
    ham[i] = static_cast<double>(rng.below(11)) / 10.0;
    delta[i] = rng.bernoulli(0.05) ? std::nan("") : rng.normal();
  }
  const auto r = patch_bin_analysis(ham, delta);
  std::vector<int> count(10, 0);
  std::vector<double> sum(10, 0.0);
  int used = 0;
  for (int i = 0; i < 500; ++i) {
    if (std::isnan(delta[i])) continue;
    const int tenths = static_cast<int>(std::lround(ham[i] * 10));
    const int b = tenths >= 9 ? 0 : 9 - tenths;
    ++count[b];
    sum[b] += delta[i];
    ++used;
  }
  double total = 0;
  for (int b = 0; b < 10; ++b) {
    CHECK(r[b].count == static_cast<std::size_t>(count[b]));
    CHECK(r[b].fraction == doctest::Approx(static_cast<double>(count[b]) / used));
    if (count[b]) CHECK(r[b].mean_delta == doctest::Approx(sum[b] / count[b]).epsilon(1e-12));
    total += r[b].fraction;
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("tile mIoU compares stride tiles") {
  Rng rng(5);
  const patches::PatchGrid grid({4, 7, -2}, 16, 16);
  const auto gt = fixture::blocky_labels(16, 16, 3, rng);
  const auto same = tile_miou(gt, gt, grid, 3);
  for (double v : same) CHECK(v == 1.0);
  auto pred = gt;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) pred.at(y, x) = static_cast<std::uint8_t>((gt.at(y, x) + 1) % 3);
  const auto t = tile_miou(pred, gt, grid, 3);
  CHECK(t[0] == 0.0);
  for (std::size_t r = 1; r < t.size(); ++r) CHECK(t[r] == 1.0);
  LabelGrid ign = gt;
  for (int y = 12; y < 16; ++y)
    for (int x = 12; x < 16; ++x) ign.at(y, x) = kIgnoreLabel;
  CHECK(std::isnan(tile_miou(gt, ign, grid, 3).back()));
}

TEST_CASE("energy summary") {
  const patches::PatchGrid grid({4, 7, -2}, 16, 16);
  const int C = 3, R = grid.count();
  Rng rng(6);

  SUBCASE("perfectly separating logits") {
    std::vector<LabelGrid> gt{fixture::blocky_labels(16, 16, C, rng), fixture::blocky_labels(16, 16, C, rng)};
    std::vector<LabelGrid> pred{LabelGrid(16, 16, 0), gt[1]};
    pred[1].at(0, 0) = static_cast<std::uint8_t>((gt[1].at(0, 0) + 1) % C);
    std::vector<mpmc::MpmcOutput> q;
    for (int b = 0; b < 2; ++b) {
      const auto gt_t = patches::patch_targets(gt[b], grid, C);
      const auto pr_t = patches::patch_targets(pred[b], grid, C);
      std::vector<Real> l(R * C);
      for (int k = 0; k < R * C; ++k) l[k] = gt_t.targets[k] && pr_t.targets[k] ? 5.0 : -5.0;
      q.push_back(head_output(l, C));
    }
    const auto rep = tp_fn_energy_summary(pred, gt, q, grid);
    for (const auto& c : rep.classes)
      if (c.tp_count && c.fn_count) CHECK(c.tp_mean > c.fn_mean);
    CHECK(rep.comparable_classes() > 0);
    CHECK(rep.separated_fraction() == 1.0);
  }
  SUBCASE("random logits regroup exactly") {
    std::vector<LabelGrid> gt, pred;
    std::vector<mpmc::MpmcOutput> q;
    for (int b = 0; b < 4; ++b) {
      gt.push_back(fixture::blocky_labels(16, 16, C, rng));
      pred.push_back(fixture::blocky_labels(16, 16, C, rng));
      q.push_back(head_output(fixture::random_vector(R * C, rng, 3.0), C));
    }
    const auto rep = tp_fn_energy_summary(pred, gt, q, grid);
    std::vector<double> tp(C, 0), fn(C, 0);
    std::vector<int> ntp(C, 0), nfn(C, 0);
    for (int b = 0; b < 4; ++b) {
      const auto g = oracle::patch_targets(gt[b], 4, 7, -2, C);
      const auto p = oracle::patch_targets(pred[b], 4, 7, -2, C);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
          const int k = r * C + c;
          if (g.excluded[r] || !g.targets[k]) continue;
          const double e = std::log1p(std::exp(q[b].logits[k]));
          if (p.targets[k]) tp[c] += e, ++ntp[c];
          else fn[c] += e, ++nfn[c];
        }
    }
    for (int c = 0; c < C; ++c) {
      CHECK(rep.classes[c].tp_count == static_cast<std::size_t>(ntp[c]));
      CHECK(rep.classes[c].fn_count == static_cast<std::size_t>(nfn[c]));
      if (ntp[c]) CHECK(rep.classes[c].tp_mean == doctest::Approx(tp[c] / ntp[c]).epsilon(1e-12));
      if (nfn[c]) CHECK(rep.classes[c].fn_mean == doctest::Approx(fn[c] / nfn[c]).epsilon(1e-12));
      CHECK(rep.classes[c].tp_mean >= 0.0);
    }
  }
  SUBCASE("no false negatives") {
    std::vector<LabelGrid> gt{fixture::blocky_labels(16, 16, C, rng)};
    std::vector<mpmc::MpmcOutput> q{head_output(fixture::random_vector(R * C, rng), C)};
    const auto rep = tp_fn_energy_summary(gt, gt, q, grid);
    for (const auto& c : rep.classes) CHECK(c.fn_count == 0);
    CHECK(rep.comparable_classes() == 0);
    CHECK(rep.separated_fraction() == 0.0);
  }
}

TEST_CASE("instance-size accuracy bins components") {
  LabelGrid gt(40, 40, 0), pred(40, 40, 0);
  // 2x2 component of class 1, 10x10 of class 2, background ignored.
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) gt.at(y, x) = 1;
  for (int y = 20; y < 30; ++y)
    for (int x = 20; x < 30; ++x) gt.at(y, x) = pred.at(y, x) = 2;
  InstanceSizeAccuracy acc;
  acc.add(pred, gt);
  CHECK(acc.total[0] == 4);
  CHECK(acc.accuracy(0) == 0.0);
  CHECK(acc.total[2] == 100);
  CHECK(acc.accuracy(2) == 1.0);
  CHECK(std::isnan(acc.accuracy(4)));
  CHECK(InstanceSizeAccuracy::bin_label(0) == "0-16");
  CHECK(InstanceSizeAccuracy::bin_label(4) == "1024+");
}
