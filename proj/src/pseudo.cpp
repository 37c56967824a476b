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
#include "mpmclab/pseudo.hpp"

#include <algorithm>
#include <cmath>

#include "mpmclab/logging.hpp"

namespace mpmclab::pseudo {
namespace {

void softmax_inplace(std::span<Real> v) {
  const Real m = *std::max_element(v.begin(), v.end());
  Real s = 0;
  for (auto& x : v) s += x = std::exp(x - m);
  for (auto& x : v) x /= s;
}

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

}  // namespace

std::size_t PseudoBatch::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

PseudoBatch make_pseudo(const Tensor& logits, double threshold) {
  require(logits.rank() == 3, "make_pseudo: expected {C, H, W} logits");
  const int C = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  PseudoBatch pb;
  pb.num_classes = C;
  pb.hard_labels = LabelGrid(H, W);
  pb.confidence.resize(static_cast<std::size_t>(H) * W);
  pb.mask.resize(pb.confidence.size());
  std::vector<Real> p(C);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) p[c] = logits.at(c, y, x);
      softmax_inplace(p);
      const int best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      pb.hard_labels.at(y, x) = static_cast<std::uint8_t>(best);
      pb.confidence[k] = p[best];
      pb.mask[k] = p[best] >= threshold ? 1 : 0;
    }
  return pb;
}

TeacherOutput teacher_infer(const seg::SegmentorSpec& seg_spec, const ParamSet& seg_params,
                            const mpmc::MpmcSpec* mpmc_spec, const ParamSet* mpmc_params, const Tensor& weak_image,
                            double threshold) {
  const auto sp = bind(seg_params, false);
  const auto out = seg::seg_forward(seg_spec, sp, ag::constant(weak_image));
  TeacherOutput t;
  t.seg_logits = out.logits.value();
  t.pseudo = make_pseudo(t.seg_logits, threshold);
  if (mpmc_spec && mpmc_params) {
    const auto mp = bind(*mpmc_params, false);
    t.mpmc = mpmc::to_output(mpmc::mpmc_forward(*mpmc_spec, mp, out.tap).value());
  }
  return t;
}

WeightMaps build_weight_maps(const PseudoBatch& pseudo, const mpmc::MpmcOutput& q, const patches::PatchGrid& grid,
                             bool gamma_from_probs) {
  require(pseudo.height() == grid.image_height && pseudo.width() == grid.image_width,
          "build_weight_maps: pseudo-label shape does not match grid");
  require(q.num_patches == grid.count(), "build_weight_maps: patch count mismatch");
  require(q.num_classes == pseudo.num_classes, "build_weight_maps: class count mismatch");
  const int C = q.num_classes;
  WeightMaps wm;
  wm.gamma = gamma_from_probs ? q.probs : q.logits;
  for (int r = 0; r < q.num_patches; ++r)
    softmax_inplace(std::span<Real>(wm.gamma).subspan(static_cast<std::size_t>(r) * C, C));
  wm.lambda_m = wm.gamma;
  const int H = grid.image_height, W = grid.image_width;
  wm.lambda_s.resize(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int r = patches::pixel_to_patch(y, x, grid);
      wm.lambda_s[static_cast<std::size_t>(y) * W + x] =
          wm.gamma[static_cast<std::size_t>(r) * C + pseudo.hard_labels.at(y, x)];
    }
  return wm;
}

WeightMaps unit_weight_maps(int height, int width, int num_patches, int num_classes) {
  WeightMaps wm;
  wm.lambda_s.assign(static_cast<std::size_t>(height) * width, 1.0);
  wm.lambda_m.assign(static_cast<std::size_t>(num_patches) * num_classes, 1.0);
  wm.gamma.assign(wm.lambda_m.size(), 1.0 / num_classes);
  return wm;
}

LossGrad pixel_cross_entropy_sum(const Tensor& logits, const LabelGrid& labels, std::span<const Real> weights,
                                 std::span<const std::uint8_t> mask, std::size_t& count) {
  require(logits.rank() == 3, "pixel_cross_entropy: expected {C, H, W} logits");
  const int C = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  const std::size_t n = static_cast<std::size_t>(H) * W;
  require(labels.height() == H && labels.width() == W, "pixel_cross_entropy: label shape mismatch");
  require(weights.empty() || weights.size() == n, "pixel_cross_entropy: weight map shape mismatch");
  require(mask.empty() || mask.size() == n, "pixel_cross_entropy: mask shape mismatch");
  LossGrad lg;
  lg.dlogits = Tensor(logits.shape(), 0.0);
  std::vector<Real> p(C);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      const int label = labels.at(y, x);
      if (label == kIgnoreLabel || (!mask.empty() && !mask[k])) continue;
      if (label >= C) throw ContractError("pixel_cross_entropy: label outside class range");
      ++count;
      const Real wgt = weights.empty() ? 1.0 : weights[k];
      for (int c = 0; c < C; ++c) p[c] = logits.at(c, y, x);
      const Real m = *std::max_element(p.begin(), p.end());
      Real s = 0;
      for (int c = 0; c < C; ++c) s += std::exp(p[c] - m);
      const Real lse = m + std::log(s);
      lg.value += wgt * (lse - p[label]);
      if (wgt != 0.0) {
        for (int c = 0; c < C; ++c) {
          const Real sm = std::exp(p[c] - lse);
          lg.dlogits.at(c, y, x) = wgt * (sm - (c == label ? 1.0 : 0.0));
        }
      }
    }
  return lg;
}

ag::Var supervised_seg_loss(std::span<const ag::Var> logits, std::span<const LabelGrid> labels) {
  require(!logits.empty() && logits.size() == labels.size(), "supervised_seg_loss: batch mismatch");
  std::size_t count = 0;
  Real total = 0;
  std::vector<Tensor> grads;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    auto lg = pixel_cross_entropy_sum(logits[b].value(), labels[b], {}, {}, count);
    total += lg.value;
    grads.push_back(std::move(lg.dlogits));
  }
  const Real inv = count > 0 ? 1.0 / static_cast<Real>(count) : 0.0;
  for (auto& g : grads)
    for (auto& v : g.storage()) v *= inv;
  return ag::custom_scalar(logits, total * inv, std::move(grads));
}

namespace {

struct UnsupSeg {
  Real value;
  std::vector<Tensor> grads;
};

UnsupSeg unsup_seg_impl(std::span<const Tensor* const> logits, std::span<const PseudoBatch> pseudo,
                        std::span<const std::vector<Real>> lambda_s) {
  require(logits.size() == pseudo.size() && pseudo.size() == lambda_s.size(), "unsup_seg_loss: batch mismatch");
  std::size_t count = 0;
  Real total = 0;
  UnsupSeg out;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const Tensor& t = *logits[b];
    require(t.rank() == 3 && t.dim(1) == pseudo[b].height() && t.dim(2) == pseudo[b].width(),
            "unsup_seg_loss: student logits and pseudo-labels differ in shape");
    auto lg = pixel_cross_entropy_sum(t, pseudo[b].hard_labels, lambda_s[b], pseudo[b].mask, count);
    total += lg.value;
    out.grads.push_back(std::move(lg.dlogits));
  }
  if (count == 0) {
    if (!logits.empty()) log::warn("unsup_seg_loss: no pixel passed the confidence threshold");
    out.value = 0.0;
    for (auto& g : out.grads) g.fill(0.0);
    return out;
  }
  const Real inv = 1.0 / static_cast<Real>(count);
  for (auto& g : out.grads)
    for (auto& v : g.storage()) v *= inv;
  out.value = total * inv;
  return out;
}

}  // namespace

Real unsup_seg_loss(std::span<const Tensor> student_logits, std::span<const PseudoBatch> pseudo,
                    std::span<const std::vector<Real>> lambda_s) {
  std::vector<const Tensor*> ptrs;
  for (const auto& t : student_logits) ptrs.push_back(&t);
  return unsup_seg_impl(ptrs, pseudo, lambda_s).value;
}

ag::Var unsup_seg_loss(std::span<const ag::Var> student_logits, std::span<const PseudoBatch> pseudo,
                       std::span<const std::vector<Real>> lambda_s) {
  std::vector<const Tensor*> ptrs;
  for (const auto& v : student_logits) ptrs.push_back(&v.value());
  auto r = unsup_seg_impl(ptrs, pseudo, lambda_s);
  return ag::custom_scalar(student_logits, r.value, std::move(r.grads));
}

namespace {

// Per-image value and gradient w.r.t. student logits (R x C layout).
Real soft_bce_image(const mpmc::MpmcOutput& t, std::span<const Real> s_logits, std::span<const Real> lambda_m,
                    std::vector<Real>* dlogits) {
  require(t.logits.size() == s_logits.size() && lambda_m.size() == s_logits.size(),
          "unsup_multilabel_loss: teacher, student and lambda_m differ in size");
  const int C = t.num_classes;
  Real total = 0;
  if (dlogits) dlogits->assign(s_logits.size(), 0.0);
  for (std::size_t k = 0; k < s_logits.size(); ++k) {
    const Real target = t.probs[k];
    const Real s = mpmc::sigmoid(s_logits[k]);
    const Real sc = std::clamp(s, mpmc::kProbEps, 1.0 - mpmc::kProbEps);
    const Real bce = -(target * std::log(sc) + (1.0 - target) * std::log(1.0 - sc));
    total += lambda_m[k] * bce / C;
    if (dlogits && sc == s) (*dlogits)[k] = lambda_m[k] * (s - target) / C;
  }
  return total;
}

}  // namespace

Real unsup_multilabel_loss(std::span<const mpmc::MpmcOutput> teacher_q, std::span<const mpmc::MpmcOutput> student_q,
                           std::span<const std::vector<Real>> lambda_m) {
  require(teacher_q.size() == student_q.size() && student_q.size() == lambda_m.size(),
          "unsup_multilabel_loss: batch mismatch");
  if (teacher_q.empty()) return 0.0;
  Real total = 0;
  for (std::size_t b = 0; b < teacher_q.size(); ++b)
    total += soft_bce_image(teacher_q[b], student_q[b].logits, lambda_m[b], nullptr);
  return total / static_cast<Real>(teacher_q.size());
}

ag::Var unsup_multilabel_loss(std::span<const mpmc::MpmcOutput> teacher_q, std::span<const ag::Var> student_logits,
                              std::span<const std::vector<Real>> lambda_m) {
  require(teacher_q.size() == student_logits.size() && student_logits.size() == lambda_m.size(),
          "unsup_multilabel_loss: batch mismatch");
  require(!teacher_q.empty(), "unsup_multilabel_loss: empty batch");
  const Real inv_b = 1.0 / static_cast<Real>(teacher_q.size());
  Real total = 0;
  std::vector<Tensor> grads;
  for (std::size_t b = 0; b < teacher_q.size(); ++b) {
    const Tensor& t = student_logits[b].value();
    const auto s = mpmc::to_output(t);
    std::vector<Real> d;
    total += soft_bce_image(teacher_q[b], s.logits, lambda_m[b], &d);
    for (auto& v : d) v *= inv_b;
    grads.push_back(mpmc::to_chw(d, t.dim(0), t.dim(1), t.dim(2)));
  }
  return ag::custom_scalar(student_logits, total * inv_b, std::move(grads));
}

Real total_loss(const LossComponents& c, double alpha, double beta) {
  const std::pair<const char*, Real> parts[] = {
      {"L_l", c.sup}, {"L^M_l", c.sup_ml}, {"L_u", c.unsup}, {"L^M_u", c.unsup_ml}};
  for (const auto& [name, v] : parts)
    if (!std::isfinite(v)) throw TrainingAbort(name, std::string("non-finite loss component ") + name);
  return c.sup + c.sup_ml + alpha * c.unsup + beta * c.unsup_ml;
}

ag::Var total_loss(const ag::Var& sup, const ag::Var& sup_ml, const ag::Var& unsup, const ag::Var& unsup_ml,
                   double alpha, double beta) {
  LossComponents c;
  c.sup = sup.defined() ? sup.item() : 0.0;
  c.sup_ml = sup_ml.defined() ? sup_ml.item() : 0.0;
  c.unsup = unsup.defined() ? unsup.item() : 0.0;
  c.unsup_ml = unsup_ml.defined() ? unsup_ml.item() : 0.0;
  total_loss(c, alpha, beta);
  ag::Var acc;
  auto accumulate = [&acc](const ag::Var& v, double w) {
    if (!v.defined()) return;
    ag::Var term = w == 1.0 ? v : ag::scale(v, w);
    acc = acc.defined() ? ag::add(acc, term) : term;
  };
  accumulate(sup, 1.0);
  accumulate(sup_ml, 1.0);
  if (alpha != 0.0) accumulate(unsup, alpha);
  if (beta != 0.0) accumulate(unsup_ml, beta);
  if (!acc.defined()) acc = ag::constant(Tensor({1}, 0.0));
  return acc;
}

}  // namespace mpmclab::pseudo
