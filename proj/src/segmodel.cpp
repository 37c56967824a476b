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
#include "mpmclab/segmodel.hpp"

#include <string>

namespace mpmclab::seg {

void SegmentorSpec::validate(int height, int width) const {
  if (stage_channels.empty()) throw ConfigError("segmentor needs at least one stage");
  if (stage_channels.size() != stage_strides.size())
    throw ConfigError("stage_channels and stage_strides differ in length");
  for (int c : stage_channels)
    if (c <= 0) throw ConfigError("stage channel counts must be positive");
  for (int s : stage_strides)
    if (s < 1) throw ConfigError("stage strides must be >= 1");
  if (tap_layer < 0 || tap_layer >= num_stages())
    throw ConfigError("tap_layer " + std::to_string(tap_layer) + " outside 0.." + std::to_string(num_stages() - 1));
  if (num_classes < 2 || num_classes > kMaxClasses) throw ConfigError("num_classes out of range");
  if (in_channels <= 0) throw ConfigError("in_channels must be positive");
  if (height > 0 && width > 0) {
    for (int s = 0; s < num_stages(); ++s) {
      const int cs = cumulative_stride(s);
      if (height % cs != 0 || width % cs != 0)
        throw ConfigError("cumulative stride " + std::to_string(cs) + " at stage " + std::to_string(s) +
                          " does not divide input " + std::to_string(height) + "x" + std::to_string(width));
    }
  }
}

int SegmentorSpec::cumulative_stride(int stage) const {
  int s = 1;
  for (int i = 0; i <= stage; ++i) s *= stage_strides.at(i);
  return s;
}

RfGeometry rf_geometry(std::span<const RfLayer> layers) {
  int rf = 1, jump = 1, first = 0;
  for (const auto& l : layers) {
    first -= l.pad * jump;
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return {jump, rf, first};
}

namespace {

std::vector<RfLayer> layer_chain(const SegmentorSpec& spec, int stage) {
  std::vector<RfLayer> layers;
  for (int s = 0; s <= stage; ++s) {
    layers.push_back({3, 1, 1});
    layers.push_back({3, 1, 1});
    const int st = spec.stage_strides[s];
    if (st > 1) layers.push_back({st, st, 0});
  }
  return layers;
}

std::size_t enc_index(int stage, int conv) { return static_cast<std::size_t>(4 * stage + 2 * conv); }
std::size_t dec_index(const SegmentorSpec& spec, int stage) {
  return static_cast<std::size_t>(4 * spec.num_stages() + 2 * stage);
}

ag::Var run_stage(const SegmentorSpec& spec, std::span<const ag::Var> p, int s, ag::Var x) {
  for (int k = 0; k < 2; ++k) {
    const auto i = enc_index(s, k);
    x = ag::relu(ag::conv2d(x, p[i], p[i + 1], 1, 1));
  }
  const int st = spec.stage_strides[s];
  if (st > 1) x = ag::avg_pool2d(x, st, st, 0);
  return x;
}

void check_params(const SegmentorSpec& spec, std::span<const ag::Var> params, const ag::Var& image) {
  const std::size_t expected = static_cast<std::size_t>(6 * spec.num_stages());
  if (params.size() != expected)
    throw ContractError("seg_forward: expected " + std::to_string(expected) + " parameter tensors, got " +
                        std::to_string(params.size()));
  const auto& shape = image.shape();
  if (shape.size() != 3 || shape[0] != spec.in_channels)
    throw ContractError("seg_forward: image shape " + shape_string(shape) + " does not match spec");
  const int stride = spec.cumulative_stride(spec.num_stages() - 1);
  if (shape[1] % stride != 0 || shape[2] % stride != 0)
    throw ContractError("seg_forward: input size not divisible by total stride " + std::to_string(stride));
}

}  // namespace

RfGeometry rf_geometry(const SegmentorSpec& spec) { return rf_geometry(spec, spec.tap_layer); }

RfGeometry rf_geometry(const SegmentorSpec& spec, int stage) {
  spec.validate();
  const auto layers = layer_chain(spec, stage);
  return rf_geometry(std::span<const RfLayer>(layers));
}

ParamSet init_params(const SegmentorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, {0x5E6}));
  ParamSet p;
  int cin = spec.in_channels;
  for (int s = 0; s < spec.num_stages(); ++s) {
    const int c = spec.stage_channels[s];
    for (int k = 0; k < 2; ++k) {
      const std::string base = "enc" + std::to_string(s) + ".conv" + std::to_string(k);
      p.add(base + ".w", he_normal({c, k == 0 ? cin : c, 3, 3}, rng));
      p.add(base + ".b", Tensor({c}, 0.0));
    }
    cin = c;
  }
  for (int s = 0; s < spec.num_stages(); ++s) {
    const std::string base = "dec" + std::to_string(s);
    p.add(base + ".w", he_normal({spec.num_classes, spec.stage_channels[s], 1, 1}, rng, 0.1));
    p.add(base + ".b", Tensor({spec.num_classes}, 0.0));
  }
  return p;
}

void zero_head(ParamSet& params) {
  for (std::size_t i = 0; i < params.count(); ++i)
    if (params.names[i].rfind("dec", 0) == 0) params.tensors[i].fill(0.0);
}

SegOutput seg_forward(const SegmentorSpec& spec, std::span<const ag::Var> params, const ag::Var& image) {
  check_params(spec, params, image);
  const int H = image.shape()[1], W = image.shape()[2];
  SegOutput out;
  ag::Var x = image;
  ag::Var logits;
  for (int s = 0; s < spec.num_stages(); ++s) {
    x = run_stage(spec, params, s, x);
    if (s == spec.tap_layer) out.tap = x;
    const auto d = dec_index(spec, s);
    ag::Var proj = ag::upsample_bilinear(ag::conv2d(x, params[d], params[d + 1], 1, 0), H, W);
    logits = logits.defined() ? ag::add(logits, proj) : proj;
  }
  out.logits = logits;
  out.last = x;
  return out;
}

ag::Var tap_forward(const SegmentorSpec& spec, std::span<const ag::Var> params, const ag::Var& image) {
  check_params(spec, params, image);
  ag::Var x = image;
  for (int s = 0; s <= spec.tap_layer; ++s) x = run_stage(spec, params, s, x);
  return x;
}

}  // namespace mpmclab::seg
