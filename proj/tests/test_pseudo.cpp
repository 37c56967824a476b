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
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "mpmclab/gradcheck.hpp"
#include "mpmclab/logging.hpp"
#include "mpmclab/pseudo.hpp"

using namespace mpmclab;
using namespace mpmclab::pseudo;

namespace {

const patches::PatchGrid kGrid({4, 7, -2}, 16, 16);

mpmc::MpmcOutput head_output(std::vector<Real> logits, int C) {
  mpmc::MpmcOutput o;
  o.num_classes = C;
  o.num_patches = static_cast<int>(logits.size()) / C;
  o.logits = std::move(logits);
  for (Real l : o.logits) o.probs.push_back(mpmc::sigmoid(l));
  return o;
}

PseudoBatch random_pseudo(int C, Rng& rng, double th = 0.4) {
  return make_pseudo(fixture::random_tensor({C, 16, 16}, rng, 2.0), th);
}

}  // namespace

TEST_CASE("uniform logits give confidence 1/C and an empty mask") {
  const auto pb = make_pseudo(Tensor({4, 16, 16}, 0.3), 0.5);
  for (Real c : pb.confidence) REQUIRE(c == doctest::Approx(0.25));
  CHECK(pb.mask_count() == 0);
}

TEST_CASE("a saturated logit fixes label and confidence") {
  Tensor t({4, 16, 16}, 0.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) t.at(2, y, x) = 30.0;
  const auto pb = make_pseudo(t, 0.95);
  for (auto l : pb.hard_labels.labels()) REQUIRE(l == 2);
  for (Real c : pb.confidence) REQUIRE(c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pb.mask_count() == 256);
}

TEST_CASE("mask count never grows with the threshold") {
  Rng rng(1);
  const auto logits = fixture::random_tensor({5, 16, 16}, rng, 2.0);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double th = 0.0; th <= 1.0; th += 0.05) {
    const auto pb = make_pseudo(logits, th);
    REQUIRE(pb.mask_count() <= prev);
    for (std::size_t i = 0; i < pb.mask.size(); ++i) REQUIRE((pb.mask[i] != 0) == (pb.confidence[i] >= th));
    prev = pb.mask_count();
  }
}

TEST_CASE("weight maps from uniform and saturated head logits") {
  Rng rng(2);
  const int C = 4, R = kGrid.count();
  const auto pb = random_pseudo(C, rng);
  const auto u = build_weight_maps(pb, head_output(std::vector<Real>(R * C, 0.4), C), kGrid);
  for (Real v : u.lambda_s) REQUIRE(v == doctest::Approx(0.25));
  for (Real v : u.lambda_m) REQUIRE(v == doctest::Approx(0.25));
  CHECK(u.lambda_m == u.gamma);

  std::vector<Real> hot(R * C, 0.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) hot[patches::pixel_to_patch(y, x, kGrid) * C + pb.hard_labels.at(y, x)] = 30.0;
  // A tile can own pixels of several pseudo classes; check only single-class tiles.
  const auto s = build_weight_maps(pb, head_output(hot, C), kGrid);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int r = patches::pixel_to_patch(y, x, kGrid);
      int hits = 0;
      for (int c = 0; c < C; ++c) hits += hot[r * C + c] > 0;
      if (hits == 1) REQUIRE(s.lambda_s[y * 16 + x] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("weight maps equal the per-pixel recomputation") {
  Rng rng(3);
  for (int n = 0; n < 50; ++n) {
    const int C = 3 + static_cast<int>(rng.below(5));
    const auto pb = random_pseudo(C, rng);
    const auto q = head_output(fixture::random_vector(kGrid.count() * C, rng, 3.0), C);
    const auto w = build_weight_maps(pb, q, kGrid);
    std::vector<Real> ls, gamma;
    oracle::weight_maps(q.logits, C, pb.hard_labels, 4, ls, gamma);
    for (std::size_t i = 0; i < ls.size(); ++i) REQUIRE(w.lambda_s[i] == doctest::Approx(ls[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < gamma.size(); ++i) REQUIRE(w.gamma[i] == doctest::Approx(gamma[i]).epsilon(1e-12));
  }
}

TEST_CASE("gamma rows are distributions and keep their argmax under positive scaling") {
  Rng rng(4);
  const int C = 5, R = kGrid.count();
  const auto pb = random_pseudo(C, rng);
  auto logits = fixture::random_vector(R * C, rng, 2.0);
  const auto w = build_weight_maps(pb, head_output(logits, C), kGrid);
  for (auto& l : logits) l *= 2.7;
  const auto w2 = build_weight_maps(pb, head_output(logits, C), kGrid);
  for (int r = 0; r < R; ++r) {
    double sum = 0;
    int a = 0, b = 0;
    for (int c = 0; c < C; ++c) {
      sum += w.gamma[r * C + c];
      if (w.gamma[r * C + c] > w.gamma[r * C + a]) a = c;
      if (w2.gamma[r * C + c] > w2.gamma[r * C + b]) b = c;
    }
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(a == b);
  }
  for (Real v : w.lambda_s) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  const auto probs_based = build_weight_maps(pb, head_output(logits, C), kGrid, true);
  CHECK_FALSE(probs_based.gamma == w2.gamma);
}

TEST_CASE("unsupervised segmentation loss") {
  Rng rng(5);
  const int C = 4;
  std::vector<Tensor> logits{fixture::random_tensor({C, 16, 16}, rng), fixture::random_tensor({C, 16, 16}, rng)};
  std::vector<PseudoBatch> pbs{random_pseudo(C, rng), random_pseudo(C, rng)};
  std::vector<std::vector<Real>> ls{fixture::random_vector(256, rng), fixture::random_vector(256, rng)};
  for (auto& v : ls)
    for (auto& x : v) x = std::abs(x);

  SUBCASE("matches the pixel loop") {
    std::vector<LabelGrid> labels{pbs[0].hard_labels, pbs[1].hard_labels};
    labels[0].at(3, 3) = kIgnoreLabel;
    pbs[0].hard_labels.at(3, 3) = kIgnoreLabel;
    std::vector<std::vector<std::uint8_t>> masks{pbs[0].mask, pbs[1].mask};
    CHECK(unsup_seg_loss(logits, pbs, ls) == doctest::Approx(oracle::unsup_seg(logits, labels, masks, ls)).epsilon(1e-12));
  }
  SUBCASE("an empty mask gives zero with a warning") {
    for (auto& pb : pbs) std::fill(pb.mask.begin(), pb.mask.end(), 0);
    const long before = log::warning_count();
    const auto old = log::level();
    log::set_level(log::Level::kError);
    CHECK(unsup_seg_loss(logits, pbs, ls) == 0.0);
    log::set_level(old);
    CHECK(log::warning_count() == before + 1);
  }
  SUBCASE("unit weights reduce to the masked mean cross-entropy") {
    std::vector<std::vector<Real>> ones(2, std::vector<Real>(256, 1.0));
    std::size_t count = 0;
    Real sum = 0;
    for (int b = 0; b < 2; ++b) sum += pixel_cross_entropy_sum(logits[b], pbs[b].hard_labels, {}, pbs[b].mask, count).value;
    CHECK(unsup_seg_loss(logits, pbs, ones) == doctest::Approx(sum / count).epsilon(1e-14));
  }
  SUBCASE("autograd version agrees") {
    std::vector<ag::Var> vs{ag::constant(logits[0]), ag::constant(logits[1])};
    CHECK(unsup_seg_loss(vs, pbs, ls).item() == doctest::Approx(unsup_seg_loss(logits, pbs, ls)).epsilon(1e-14));
  }
}

TEST_CASE("unsupervised multi-label loss") {
  Rng rng(6);
  const int C = 4, R = 16;
  std::vector<mpmc::MpmcOutput> teacher, student;
  std::vector<std::vector<Real>> lm;
  for (int b = 0; b < 3; ++b) {
    teacher.push_back(head_output(fixture::random_vector(R * C, rng, 2.0), C));
    student.push_back(head_output(fixture::random_vector(R * C, rng, 2.0), C));
    auto w = fixture::random_vector(R * C, rng);
    for (auto& x : w) x = std::abs(x);
    lm.push_back(w);
  }
  std::vector<std::vector<Real>> tp, sl;
  for (int b = 0; b < 3; ++b) {
    tp.push_back(teacher[b].probs);
    sl.push_back(student[b].logits);
  }
  CHECK(unsup_multilabel_loss(teacher, student, lm) == doctest::Approx(oracle::unsup_multilabel(tp, sl, lm, C)).epsilon(1e-12));

  std::vector<std::vector<Real>> zeros(3, std::vector<Real>(R * C, 0.0));
  CHECK(unsup_multilabel_loss(teacher, student, zeros) == 0.0);

  // Matching the teacher gives the soft-target self-entropy, the minimum.
  const Real self = unsup_multilabel_loss(teacher, teacher, lm);
  double entropy = 0;
  for (int b = 0; b < 3; ++b)
    for (int k = 0; k < R * C; ++k) {
      const double t = teacher[b].probs[k];
      entropy += lm[b][k] * -(t * std::log(t) + (1 - t) * std::log(1 - t)) / C;
    }
  CHECK(self == doctest::Approx(entropy / 3).epsilon(1e-9));
  for (int n = 0; n < 20; ++n) {
    auto moved = teacher;
    for (auto& o : moved)
      for (std::size_t k = 0; k < o.logits.size(); ++k) {
        o.logits[k] += 0.3 * rng.normal();
        o.probs[k] = mpmc::sigmoid(o.logits[k]);
      }
    REQUIRE(unsup_multilabel_loss(teacher, moved, lm) > self);
  }

  std::vector<ag::Var> vs;
  for (const auto& o : student) vs.push_back(ag::constant(mpmc::to_chw(o.logits, C, 4, 4)));
  CHECK(unsup_multilabel_loss(teacher, vs, lm).item() == doctest::Approx(unsup_multilabel_loss(teacher, student, lm)).epsilon(1e-12));
}

TEST_CASE("total loss arithmetic and abort") {
  CHECK(total_loss({1, 1, 1, 1}, 0.1, 0.25) == doctest::Approx(2.35).epsilon(1e-15));
  CHECK(total_loss({0.7, 0.2, 5, 9}, 0.0, 0.0) == doctest::Approx(0.9).epsilon(1e-15));
  try {
    total_loss({1, 1, std::nan(""), 1}, 0.1, 0.25);
    FAIL("expected an abort");
  } catch (const TrainingAbort& e) {
    CHECK(e.component() == "L_u");
  }
  CHECK_THROWS_AS(total_loss({1, std::numeric_limits<double>::infinity(), 1, 1}, 0.1, 0.25), TrainingAbort);
}

TEST_CASE("gradient of the total is the weighted sum of component gradients") {
  const fixture::StepProblem prob(21);
  const auto x = prob.flat();
  fixture::Terms all;
  std::vector<Real> g_all;
  prob.evaluate(x, all, &g_all);
  std::vector<Real> sum(x.size(), 0.0);
  const double weight[] = {1.0, 1.0, all.alpha, all.beta};
  for (int k = 0; k < 4; ++k) {
    fixture::Terms one;
    one.sup = k == 0, one.sup_ml = k == 1, one.unsup = k == 2, one.unsup_ml = k == 3;
    one.alpha = one.beta = 1.0;
    std::vector<Real> g;
    prob.evaluate(x, one, &g);
    for (std::size_t i = 0; i < x.size(); ++i) sum[i] += weight[k] * g[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(g_all[i] == doctest::Approx(sum[i]).epsilon(1e-10).scale(1e-12));
  const auto coords = sample_coords(x.size(), 24, 5);
  CHECK(finite_difference_check(prob.objective(all), x, 1e-5, coords).max_rel_error < 1e-3);
}

TEST_CASE("teacher inference is frozen and repeatable") {
  const fixture::StepProblem prob(31);
  const auto teacher_seg = seg::init_params(prob.seg_spec, 2);
  const auto teacher_mpmc = mpmc::init_params(prob.mpmc_spec, 3);
  const auto a = teacher_infer(prob.seg_spec, teacher_seg, &prob.mpmc_spec, &teacher_mpmc, prob.strong_image, 0.5);
  std::vector<Real> g;
  prob.evaluate(prob.flat(), {}, &g);
  const auto b = teacher_infer(prob.seg_spec, teacher_seg, &prob.mpmc_spec, &teacher_mpmc, prob.strong_image, 0.5);
  CHECK(a.seg_logits.storage() == b.seg_logits.storage());
  CHECK(a.mpmc->logits == b.mpmc->logits);
  CHECK(a.pseudo.mask == b.pseudo.mask);
  const auto none = teacher_infer(prob.seg_spec, teacher_seg, nullptr, nullptr, prob.strong_image, 0.5);
  CHECK_FALSE(none.mpmc.has_value());
  CHECK(none.pseudo.hard_labels == a.pseudo.hard_labels);
}
