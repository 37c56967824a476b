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
#ifndef MPMCLAB_MPMC_HPP
#define MPMCLAB_MPMC_HPP

#include <span>
#include <vector>

#include "mpmclab/params.hpp"
#include "mpmclab/patches.hpp"

// Multi-scale patch-based multi-label classifier head.
//
// Input is the tap feature map z {d, h, w}. The head concatenates z with
// average-pooled copies of z (stride 1, zero padding, divisor k*k), runs a
// stack of conv blocks (3x3, 3x3, 1x1, each followed by ReLU) and a final
// 1x1 linear layer, producing one logit per class per feature cell.
namespace mpmclab::mpmc {

struct MpmcSpec {
  int in_channels = 16;
  int num_classes = 4;
  /// Average-pool kernel sizes; each must be odd.
  std::vector<int> scales{7, 19};
  /// Whether the unpooled feature map is part of the concatenation.
  bool use_original = true;
  int hidden = 32;
  int num_blocks = 3;

  void validate() const;
  int concat_channels() const {
    return in_channels * (static_cast<int>(scales.size()) + (use_original ? 1 : 0));
  }
  bool operator==(const MpmcSpec&) const = default;
};

/// Per-patch logits and sigmoid probabilities, row-major R x C.
struct MpmcOutput {
  int num_patches = 0;
  int num_classes = 0;
  std::vector<Real> logits;
  std::vector<Real> probs;

  Real logit(int r, int c) const { return logits[static_cast<std::size_t>(r) * num_classes + c]; }
  Real prob(int r, int c) const { return probs[static_cast<std::size_t>(r) * num_classes + c]; }
};

struct FocalParams {
  double gamma_pos = 0.0;
  double gamma_neg = 1.0;
};

inline constexpr Real kProbEps = 1e-7;

Real sigmoid(Real x);

ParamSet init_params(const MpmcSpec& spec, std::uint64_t seed);
/// Zeros the final linear layer, giving probs = 0.5 everywhere.
void zero_head(ParamSet& params);

/// Returns logits as a {C, h, w} node. Throws ConfigError when a pooling
/// kernel exceeds the feature map.
ag::Var mpmc_forward(const MpmcSpec& spec, std::span<const ag::Var> params, const ag::Var& z);

/// Converts {C, h, w} logits to the R x C layout (r = y * w + x).
MpmcOutput to_output(const Tensor& logits);
/// Inverse layout change for gradients: R x C -> {C, h, w}.
Tensor to_chw(std::span<const Real> rc, int num_classes, int h, int w);

/// Mean over non-excluded patches of
///   l_r = -(1/C) sum_c [y=1: (1-q)^g+ log q ; y=0: q^g- log(1-q)],
/// with q clamped to [eps, 1-eps].
Real asymmetric_focal_loss(std::span<const Real> probs, const patches::PatchLabelMatrix& targets,
                           const FocalParams& fp);

/// Per-patch l_r (0 for excluded patches) and d(sum_r l_r)/d(logits).
struct PatchLossGrad {
  std::vector<Real> per_patch;
  std::vector<Real> dlogits;  // R x C
};
PatchLossGrad focal_terms(const MpmcOutput& out, const patches::PatchLabelMatrix& targets, const FocalParams& fp);

/// Mean over images of the sum over patches of l_r.
Real labeled_multilabel_loss(std::span<const MpmcOutput> outputs,
                             std::span<const patches::PatchLabelMatrix> targets, const FocalParams& fp);

/// Differentiable version; logits are {C, h, w} nodes from mpmc_forward.
ag::Var labeled_multilabel_loss(std::span<const ag::Var> logits,
                                std::span<const patches::PatchLabelMatrix> targets, const FocalParams& fp);

}  // namespace mpmclab::mpmc

#endif  // MPMCLAB_MPMC_HPP
