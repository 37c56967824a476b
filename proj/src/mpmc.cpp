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
#include "mpmclab/mpmc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mpmclab::mpmc {

Real sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

void MpmcSpec::validate() const {
  if (in_channels <= 0) throw ConfigError("mpmc in_channels must be positive");
  if (num_classes < 1 || num_classes > kMaxClasses) throw ConfigError("mpmc num_classes out of range");
  for (int s : scales)
    if (s < 1 || s % 2 == 0) throw ConfigError("mpmc pooling scale " + std::to_string(s) + " must be odd and >= 1");
  if (scales.empty() && !use_original) throw ConfigError("mpmc needs at least one input scale");
  if (hidden <= 0 || num_blocks < 0) throw ConfigError("mpmc hidden width must be positive");
}

ParamSet init_params(const MpmcSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, {0x3F3C}));
  ParamSet p;
  int cin = spec.concat_channels();
  for (int b = 0; b < spec.num_blocks; ++b) {
    const std::string base = "mpmc.block" + std::to_string(b);
    p.add(base + ".conv0.w", he_normal({spec.hidden, cin, 3, 3}, rng));
    p.add(base + ".conv0.b", Tensor({spec.hidden}, 0.0));
    p.add(base + ".conv1.w", he_normal({spec.hidden, spec.hidden, 3, 3}, rng));
    p.add(base + ".conv1.b", Tensor({spec.hidden}, 0.0));
    p.add(base + ".conv2.w", he_normal({spec.hidden, spec.hidden, 1, 1}, rng));
    p.add(base + ".conv2.b", Tensor({spec.hidden}, 0.0));
    cin = spec.hidden;
  }
  p.add("mpmc.head.w", he_normal({spec.num_classes, cin, 1, 1}, rng, 0.1));
  p.add("mpmc.head.b", Tensor({spec.num_classes}, 0.0));
  return p;
}

void zero_head(ParamSet& params) {
  for (std::size_t i = 0; i < params.count(); ++i)
    if (params.names[i].rfind("mpmc.head", 0) == 0) params.tensors[i].fill(0.0);
}

ag::Var mpmc_forward(const MpmcSpec& spec, std::span<const ag::Var> params, const ag::Var& z) {
  spec.validate();
  const std::size_t expected = static_cast<std::size_t>(6 * spec.num_blocks + 2);
  if (params.size() != expected) throw ContractError("mpmc_forward: wrong parameter count");
  const auto& shape = z.shape();
  if (shape.size() != 3 || shape[0] != spec.in_channels)
    throw ContractError("mpmc_forward: feature map " + shape_string(shape) + " does not match spec");
  const int h = shape[1], w = shape[2];
  std::vector<ag::Var> parts;
  if (spec.use_original) parts.push_back(z);
  for (int s : spec.scales) {
    if (s > h || s > w)
      throw ConfigError("mpmc pooling scale " + std::to_string(s) + " exceeds feature map " + std::to_string(h) +
                        "x" + std::to_string(w));
    parts.push_back(ag::avg_pool2d(z, s, 1, s / 2));
  }
  ag::Var x = parts.size() == 1 ? parts[0] : ag::concat_channels(parts);
  std::size_t i = 0;
  for (int b = 0; b < spec.num_blocks; ++b) {
    x = ag::relu(ag::conv2d(x, params[i], params[i + 1], 1, 1));
    x = ag::relu(ag::conv2d(x, params[i + 2], params[i + 3], 1, 1));
    x = ag::relu(ag::conv2d(x, params[i + 4], params[i + 5], 1, 0));
    i += 6;
  }
  return ag::conv2d(x, params[i], params[i + 1], 1, 0);
}

MpmcOutput to_output(const Tensor& logits) {
  if (logits.rank() != 3) throw ContractError("to_output: expected {C, h, w} logits");
  const int C = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  MpmcOutput o;
  o.num_patches = h * w;
  o.num_classes = C;
  o.logits.resize(static_cast<std::size_t>(h) * w * C);
  o.probs.resize(o.logits.size());
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t k = static_cast<std::size_t>(y * w + x) * C + c;
        o.logits[k] = logits.at(c, y, x);
        o.probs[k] = sigmoid(o.logits[k]);
      }
  return o;
}

Tensor to_chw(std::span<const Real> rc, int num_classes, int h, int w) {
  if (rc.size() != static_cast<std::size_t>(num_classes) * h * w) throw ContractError("to_chw: size mismatch");
  Tensor t({num_classes, h, w});
  for (int c = 0; c < num_classes; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(c, y, x) = rc[static_cast<std::size_t>(y * w + x) * num_classes + c];
  return t;
}

namespace {

void check_shapes(std::size_t probs, const patches::PatchLabelMatrix& t) {
  if (probs != t.targets.size() || t.excluded.size() != static_cast<std::size_t>(t.num_patches))
    throw ContractError("focal loss: probs (" + std::to_string(probs) + ") and targets (" +
                        std::to_string(t.targets.size()) + ") differ in size");
}

// Value of one class term and its derivative with respect to q (unclamped q).
struct Term {
  Real value;
  Real dq;
};

Term focal_term(Real q, bool positive, const FocalParams& fp) {
  const Real qc = std::clamp(q, kProbEps, 1.0 - kProbEps);
  const bool clamped = qc != q;
  Term t{};
  if (positive) {
    const Real g = fp.gamma_pos;
    const Real wgt = g == 0.0 ? 1.0 : std::pow(1.0 - qc, g);
    t.value = -wgt * std::log(qc);
    if (!clamped) {
      const Real dw = g == 0.0 ? 0.0 : -g * std::pow(1.0 - qc, g - 1.0);
      t.dq = -(dw * std::log(qc) + wgt / qc);
    }
  } else {
    const Real g = fp.gamma_neg;
    const Real wgt = g == 0.0 ? 1.0 : std::pow(qc, g);
    t.value = -wgt * std::log(1.0 - qc);
    if (!clamped) {
      const Real dw = g == 0.0 ? 0.0 : g * std::pow(qc, g - 1.0);
      t.dq = -(dw * std::log(1.0 - qc) - wgt / (1.0 - qc));
    }
  }
  return t;
}

}  // namespace

Real asymmetric_focal_loss(std::span<const Real> probs, const patches::PatchLabelMatrix& targets,
                           const FocalParams& fp) {
  check_shapes(probs.size(), targets);
  const int C = targets.num_classes;
  Real total = 0.0;
  int active = 0;
  for (int r = 0; r < targets.num_patches; ++r) {
    if (targets.excluded[r]) continue;
    Real lr = 0.0;
    for (int c = 0; c < C; ++c)
      lr += focal_term(probs[static_cast<std::size_t>(r) * C + c], targets.at(r, c) != 0, fp).value;
    total += lr / C;
    ++active;
  }
  return active > 0 ? total / active : 0.0;
}

PatchLossGrad focal_terms(const MpmcOutput& out, const patches::PatchLabelMatrix& targets, const FocalParams& fp) {
  check_shapes(out.probs.size(), targets);
  const int C = targets.num_classes;
  PatchLossGrad g;
  g.per_patch.assign(targets.num_patches, 0.0);
  g.dlogits.assign(out.logits.size(), 0.0);
  for (int r = 0; r < targets.num_patches; ++r) {
    if (targets.excluded[r]) continue;
    Real lr = 0.0;
    for (int c = 0; c < C; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * C + c;
      const Real q = out.probs[k];
      const Term t = focal_term(q, targets.at(r, c) != 0, fp);
      lr += t.value;
      g.dlogits[k] = t.dq * q * (1.0 - q) / C;
    }
    g.per_patch[r] = lr / C;
  }
  return g;
}

Real labeled_multilabel_loss(std::span<const MpmcOutput> outputs,
                             std::span<const patches::PatchLabelMatrix> targets, const FocalParams& fp) {
  if (outputs.empty()) throw ContractError("labeled_multilabel_loss: empty batch");
  if (outputs.size() != targets.size()) throw ContractError("labeled_multilabel_loss: batch size mismatch");
  Real total = 0.0;
  for (std::size_t b = 0; b < outputs.size(); ++b) {
    const auto g = focal_terms(outputs[b], targets[b], fp);
    for (Real v : g.per_patch) total += v;
  }
  return total / static_cast<Real>(outputs.size());
}

ag::Var labeled_multilabel_loss(std::span<const ag::Var> logits,
                                std::span<const patches::PatchLabelMatrix> targets, const FocalParams& fp) {
  if (logits.empty()) throw ContractError("labeled_multilabel_loss: empty batch");
  if (logits.size() != targets.size()) throw ContractError("labeled_multilabel_loss: batch size mismatch");
  const Real inv_b = 1.0 / static_cast<Real>(logits.size());
  Real total = 0.0;
  std::vector<Tensor> grads;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const Tensor& t = logits[b].value();
    const MpmcOutput out = to_output(t);
    auto g = focal_terms(out, targets[b], fp);
    for (Real v : g.per_patch) total += v;
    for (auto& d : g.dlogits) d *= inv_b;
    grads.push_back(to_chw(g.dlogits, t.dim(0), t.dim(1), t.dim(2)));
  }
  return ag::custom_scalar(logits, total * inv_b, std::move(grads));
}

}  // namespace mpmclab::mpmc
