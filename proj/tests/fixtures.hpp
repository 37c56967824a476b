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
// Random instances, toy specs and composed objectives used by several tests.
#ifndef MPMCLAB_TESTS_FIXTURES_HPP
#define MPMCLAB_TESTS_FIXTURES_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpmclab/gradcheck.hpp"
#include "mpmclab/mpmc.hpp"
#include "mpmclab/params.hpp"
#include "mpmclab/patches.hpp"
#include "mpmclab/pseudo.hpp"
#include "mpmclab/rng.hpp"
#include "mpmclab/segmodel.hpp"

namespace fixture {

using namespace mpmclab;

/// Labels in {0..C-1}, with roughly ignore_rate of pixels set to ignore.
inline LabelGrid random_labels(int h, int w, int C, Rng& rng, double ignore_rate = 0.0) {
  LabelGrid g(h, w);
  for (auto& v : g.labels()) v = rng.bernoulli(ignore_rate) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.below(C));
  return g;
}

/// Piecewise-constant labels (random rectangles over a random background),
/// closer to real masks than i.i.d. noise.
inline LabelGrid blocky_labels(int h, int w, int C, Rng& rng, int rects = 4) {
  LabelGrid g(h, w, static_cast<std::uint8_t>(rng.below(C)));
  for (int k = 0; k < rects; ++k) {
    const int y0 = rng.range(0, h - 1), x0 = rng.range(0, w - 1);
    const int y1 = std::min(h - 1, y0 + rng.range(0, h / 2)), x1 = std::min(w - 1, x0 + rng.range(0, w / 2));
    const auto c = static_cast<std::uint8_t>(rng.below(C));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) g.at(y, x) = c;
  }
  return g;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = scale * rng.normal();
  return t;
}

inline std::vector<Real> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<Real> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline ImageGrid random_image(int h, int w, Rng& rng) {
  ImageGrid g(h, w);
  for (auto& v : g.pixels()) v = rng.uniform();
  return g;
}

/// Two-stage segmentor small enough for coordinate-wise finite differences.
inline seg::SegmentorSpec tiny_seg(int C = 3) {
  seg::SegmentorSpec s;
  s.stage_channels = {4, 4};
  s.stage_strides = {2, 1};
  s.tap_layer = 0;
  s.num_classes = C;
  return s;
}

inline mpmc::MpmcSpec tiny_mpmc(int d = 4, int C = 3) {
  mpmc::MpmcSpec m;
  m.in_channels = d;
  m.num_classes = C;
  m.scales = {3, 5};
  m.hidden = 4;
  m.num_blocks = 1;
  return m;
}

/// Every shipped tap geometry: the default segmentor at each encoder stage.
inline std::vector<seg::SegmentorSpec> shipped_specs() {
  std::vector<seg::SegmentorSpec> out;
  for (int tap = 0; tap < 3; ++tap) {
    seg::SegmentorSpec s;
    s.tap_layer = tap;
    out.push_back(s);
  }
  return out;
}

/// Which terms a composed objective includes.
struct Terms {
  bool sup = true, sup_ml = true, unsup = true, unsup_ml = true;
  double alpha = 0.1, beta = 0.25;
};

/// Frozen inputs of one training step: a labeled image and an unlabeled
/// strong view, with teacher products computed once from separate weights.
struct StepProblem {
  seg::SegmentorSpec seg_spec = tiny_seg();
  mpmc::MpmcSpec mpmc_spec = tiny_mpmc();
  ParamSet seg_params, mpmc_params;
  Tensor labeled_image, strong_image;
  LabelGrid label;
  patches::PatchLabelMatrix targets;
  pseudo::PseudoBatch pseudo;
  mpmc::MpmcOutput teacher_q;
  pseudo::WeightMaps weights;
  std::size_t seg_size = 0;

  explicit StepProblem(std::uint64_t seed, int size = 16) {
    Rng rng(seed);
    const int C = seg_spec.num_classes;
    seg_params = seg::init_params(seg_spec, seed);
    mpmc_params = mpmc::init_params(mpmc_spec, seed + 1);
    seg_size = seg_params.total_size();
    labeled_image = random_image(size, size, rng).to_tensor();
    strong_image = random_image(size, size, rng).to_tensor();
    label = blocky_labels(size, size, C, rng);
    const patches::PatchGrid grid(seg::rf_geometry(seg_spec), size, size);
    targets = patches::patch_targets(label, grid, C);
    const auto teacher_seg = seg::init_params(seg_spec, seed + 7);
    const auto teacher_mpmc = mpmc::init_params(mpmc_spec, seed + 8);
    auto t = pseudo::teacher_infer(seg_spec, teacher_seg, &mpmc_spec, &teacher_mpmc,
                                   random_image(size, size, rng).to_tensor(), 0.0);
    // Threshold on a random half so the mask is neither empty nor full.
    pseudo = t.pseudo;
    for (auto& m : pseudo.mask) m = rng.bernoulli(0.5);
    teacher_q = *t.mpmc;
    weights = pseudo::build_weight_maps(pseudo, teacher_q, grid);
  }

  std::vector<Real> flat() const {
    auto a = seg_params.flatten();
    const auto b = mpmc_params.flatten();
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }

  /// Total loss at flat parameters; fills grad when non-null.
  Real evaluate(std::span<const Real> x, const Terms& terms, std::vector<Real>* grad) const {
    ParamSet sp = seg_params, mp = mpmc_params;
    sp.unflatten(x.subspan(0, seg_size));
    mp.unflatten(x.subspan(seg_size));
    const auto bs = bind(sp, true);
    const auto bm = bind(mp, true);
    const mpmc::FocalParams fp;
    const auto lab = seg::seg_forward(seg_spec, bs, ag::constant(labeled_image));
    const auto unl = seg::seg_forward(seg_spec, bs, ag::constant(strong_image));
    ag::Var sup, sup_ml, unsup, unsup_ml;
    if (terms.sup) {
      const std::vector<ag::Var> l{lab.logits};
      const std::vector<LabelGrid> y{label};
      sup = pseudo::supervised_seg_loss(l, y);
    }
    if (terms.sup_ml) {
      const std::vector<ag::Var> q{mpmc::mpmc_forward(mpmc_spec, bm, lab.tap)};
      const std::vector<patches::PatchLabelMatrix> tg{targets};
      sup_ml = mpmc::labeled_multilabel_loss(q, tg, fp);
    }
    if (terms.unsup) {
      const std::vector<ag::Var> l{unl.logits};
      const std::vector<pseudo::PseudoBatch> pb{pseudo};
      const std::vector<std::vector<Real>> ls{weights.lambda_s};
      unsup = pseudo::unsup_seg_loss(l, pb, ls);
    }
    if (terms.unsup_ml) {
      const std::vector<ag::Var> q{mpmc::mpmc_forward(mpmc_spec, bm, unl.tap)};
      const std::vector<mpmc::MpmcOutput> tq{teacher_q};
      const std::vector<std::vector<Real>> lm{weights.lambda_m};
      unsup_ml = pseudo::unsup_multilabel_loss(tq, q, lm);
    }
    const auto total = pseudo::total_loss(sup, sup_ml, unsup, unsup_ml, terms.alpha, terms.beta);
    if (grad) {
      ag::backward(total);
      auto g = gradients(sp, bs).flatten();
      const auto gm = gradients(mp, bm).flatten();
      g.insert(g.end(), gm.begin(), gm.end());
      *grad = std::move(g);
    }
    return total.item();
  }

  Objective objective(const Terms& terms) const {
    return {[this, terms](std::span<const Real> x) { return evaluate(x, terms, nullptr); },
            [this, terms](std::span<const Real> x) {
              std::vector<Real> g;
              evaluate(x, terms, &g);
              return g;
            }};
  }
};

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mpmclab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture

#endif  // MPMCLAB_TESTS_FIXTURES_HPP
