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
#ifndef MPMCLAB_CONFIG_HPP
#define MPMCLAB_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpmclab/augment.hpp"
#include "mpmclab/mpmc.hpp"
#include "mpmclab/segmodel.hpp"
#include "mpmclab/synthdata.hpp"

namespace mpmclab::train {

struct DatasetConfig {
  /// Existing dataset directory; when empty the corpus is generated from spec.
  std::string path;
  synth::DatasetSpec spec;
  int num_train = 160;
  int num_val = 48;
  synth::Rational label_fraction{1, 16};
  std::uint64_t split_seed = 0;
};

struct MpmcConfig {
  /// Builds the head at all. When false both multi-label terms and the
  /// adaptive weights are off.
  bool enabled = true;
  /// Multi-label supervision on labeled images (L^M_l).
  bool labeled = true;
  /// Adaptive weights and multi-label consistency on unlabeled images.
  bool unlabeled = true;
  std::vector<int> scales{7, 19};
  bool use_original = true;
  int hidden = 32;
  int blocks = 3;
  double gamma_pos = 0.0;
  double gamma_neg = 1.0;
  /// Confidence softmax over sigmoid probabilities instead of raw logits.
  bool gamma_from_probs = false;
  /// "sum" adds per-patch terms as written; "mean" divides both multi-label
  /// terms by the patch count R.
  std::string patch_reduction = "sum";
};

struct PseudoConfig {
  double threshold = 0.95;
  double alpha = 0.1;
  double beta = 0.25;
  double ema_momentum = 0.999;
  bool use_lambda_s = true;
  bool use_lambda_m = true;
  int warmup_steps = 0;
};

struct OptimizerConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  int steps = 1000;
  int batch_labeled = 4;
  int batch_unlabeled = 4;
};

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  std::string out_dir;
  DatasetConfig dataset;
  seg::SegmentorSpec model;
  MpmcConfig mpmc;
  PseudoConfig pseudo;
  OptimizerConfig optimizer;
  /// Output size is always the dataset resolution.
  augment::AugmentPolicy augment;
  int eval_every = 200;
  int checkpoint_every = 0;  // 0: only at the end
  /// "student" or "teacher".
  std::string eval_model = "student";

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
  mpmc::MpmcSpec mpmc_spec() const;
  bool unsupervised_active() const {
    return optimizer.batch_unlabeled > 0 && (pseudo.alpha != 0.0 || (mpmc_unlabeled() && pseudo.beta != 0.0));
  }
  bool mpmc_labeled() const { return mpmc.enabled && mpmc.labeled; }
  bool mpmc_unlabeled() const { return mpmc.enabled && mpmc.unlabeled; }
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
ExperimentConfig from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides. Values parse as JSON, falling back to a
/// plain string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a over the canonical JSON serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Named configuration presets (e.g. "default", "desk", "supplementary").
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace mpmclab::train

#endif  // MPMCLAB_CONFIG_HPP
