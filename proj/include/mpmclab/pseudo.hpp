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
#ifndef MPMCLAB_PSEUDO_HPP
#define MPMCLAB_PSEUDO_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpmclab/mpmc.hpp"
#include "mpmclab/segmodel.hpp"

namespace mpmclab::pseudo {

/// Teacher pseudo-labels for one weak view.
struct PseudoBatch {
  LabelGrid hard_labels;
  std::vector<Real> confidence;  // H*W, max softmax probability
  std::vector<std::uint8_t> mask;  // confidence >= th
  int num_classes = 0;

  int height() const { return hard_labels.height(); }
  int width() const { return hard_labels.width(); }
  std::size_t mask_count() const;
};

/// Softmax over classes at each pixel of {C, H, W} logits, argmax labels,
/// and the threshold mask.
PseudoBatch make_pseudo(const Tensor& seg_logits, double threshold);

struct TeacherOutput {
  PseudoBatch pseudo;
  std::optional<mpmc::MpmcOutput> mpmc;
  Tensor seg_logits;
};

/// Runs the teacher on a weak view without recording gradients. The MPMC
/// head is evaluated when mpmc_spec and mpmc_params are given.
TeacherOutput teacher_infer(const seg::SegmentorSpec& seg_spec, const ParamSet& seg_params,
                            const mpmc::MpmcSpec* mpmc_spec, const ParamSet* mpmc_params, const Tensor& weak_image,
                            double threshold);

/// lambda_m = gamma (R x C); lambda_s[y][x] = gamma[pixel_to_patch(y, x)][label(y, x)].
struct WeightMaps {
  std::vector<Real> lambda_s;  // H*W
  std::vector<Real> lambda_m;  // R*C
  std::vector<Real> gamma;    // R*C, rows sum to 1
};

/// gamma[r] = softmax over classes of the teacher head's logits (or of its
/// sigmoid probabilities when gamma_from_probs is set).
WeightMaps build_weight_maps(const PseudoBatch& pseudo, const mpmc::MpmcOutput& teacher_q,
                             const patches::PatchGrid& grid, bool gamma_from_probs = false);

/// Uniform weight maps (all ones) for ablations that disable lambda_s/lambda_m.
WeightMaps unit_weight_maps(int height, int width, int num_patches, int num_classes);

/// Value and d(value)/d(logits) for a single image.
struct LossGrad {
  Real value = 0.0;
  Tensor dlogits;
};

/// Masked, weighted pixel cross-entropy summed over pixels (not normalized).
/// Pixels with mask 0 or label kIgnoreLabel contribute nothing. Returns the
/// unnormalized sum, its gradient, and the counted pixels in count.
LossGrad pixel_cross_entropy_sum(const Tensor& logits, const LabelGrid& labels, std::span<const Real> weights,
                                 std::span<const std::uint8_t> mask, std::size_t& count);

/// Supervised term: mean cross-entropy over non-ignore pixels of the batch.
ag::Var supervised_seg_loss(std::span<const ag::Var> logits, std::span<const LabelGrid> labels);

/// Unsupervised segmentation term: sum of lambda_s-weighted cross-entropy
/// against hard pseudo-labels over masked pixels, divided by the number of
/// masked pixels in the batch. Zero (with a warning) when no pixel passes.
Real unsup_seg_loss(std::span<const Tensor> student_logits, std::span<const PseudoBatch> pseudo,
                    std::span<const std::vector<Real>> lambda_s);
ag::Var unsup_seg_loss(std::span<const ag::Var> student_logits, std::span<const PseudoBatch> pseudo,
                       std::span<const std::vector<Real>> lambda_s);

/// Unsupervised multi-label term: mean over images of
/// sum_r (1/C) sum_i lambda_m[r][i] * BCE(teacher prob, student prob).
Real unsup_multilabel_loss(std::span<const mpmc::MpmcOutput> teacher_q, std::span<const mpmc::MpmcOutput> student_q,
                           std::span<const std::vector<Real>> lambda_m);
ag::Var unsup_multilabel_loss(std::span<const mpmc::MpmcOutput> teacher_q, std::span<const ag::Var> student_logits,
                              std::span<const std::vector<Real>> lambda_m);

struct LossComponents {
  Real sup = 0.0;       // L_l
  Real sup_ml = 0.0;    // L^M_l
  Real unsup = 0.0;     // L_u
  Real unsup_ml = 0.0;  // L^M_u
};

/// L_l + L^M_l + alpha L_u + beta L^M_u. Throws TrainingAbort naming the
/// first non-finite component.
Real total_loss(const LossComponents& c, double alpha, double beta);
ag::Var total_loss(const ag::Var& sup, const ag::Var& sup_ml, const ag::Var& unsup, const ag::Var& unsup_ml,
                   double alpha, double beta);

}  // namespace mpmclab::pseudo

#endif  // MPMCLAB_PSEUDO_HPP
