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
#ifndef MPMCLAB_PARAMS_HPP
#define MPMCLAB_PARAMS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpmclab/autograd.hpp"
#include "mpmclab/rng.hpp"

namespace mpmclab {

/// Ordered collection of named parameter tensors.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  void add(std::string name, Tensor t) {
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
  }
  std::size_t count() const { return tensors.size(); }
  std::size_t total_size() const;
  /// Same names in the same order with identical shapes.
  bool same_structure(const ParamSet& other) const;
  ParamSet zeros_like() const;

  std::vector<Real> flatten() const;
  void unflatten(std::span<const Real> flat);

  bool operator==(const ParamSet&) const;
};

/// Wraps each tensor as an autograd leaf.
std::vector<ag::Var> bind(const ParamSet& params, bool requires_grad);
/// Gradients of bound leaves, in ParamSet order.
ParamSet gradients(const ParamSet& like, const std::vector<ag::Var>& bound);

/// He-normal initialization for a {cout, cin, k, k} convolution weight.
Tensor he_normal(std::vector<int> shape, Rng& rng, Real gain = 1.0);

/// theta_t <- m * theta_t + (1 - m) * theta_s. Requires 0 <= m < 1.
void ema_update(ParamSet& teacher, const ParamSet& student, double momentum);

/// Self-describing binary container: magic, JSON header with metadata and
/// tensor shapes, then raw little-endian doubles. Round trip is exact.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, ParamSet> groups;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpmclab

#endif  // MPMCLAB_PARAMS_HPP
