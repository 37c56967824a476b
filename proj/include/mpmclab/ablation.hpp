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
#ifndef MPMCLAB_ABLATION_HPP
#define MPMCLAB_ABLATION_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mpmclab/train.hpp"

namespace mpmclab::train {

/// One cell of an ablation table: a row key, a column (label fraction), and
/// the config that produces it.
struct AblationVariant {
  std::vector<std::string> row;
  std::string column;
  ExperimentConfig config;
};

struct AblationPlan {
  std::string preset;
  std::vector<std::string> row_headers;
  std::vector<std::string> columns;  // label fractions, in table order
  std::vector<AblationVariant> variants;
};

std::vector<std::string> ablation_presets();

/// Config matrix for a preset. An empty fractions list uses the preset's
/// own columns. Throws ConfigError for an unknown preset, listing the known
/// ones.
AblationPlan ablation_plan(const std::string& preset, const ExperimentConfig& base,
                           const std::vector<synth::Rational>& fractions = {});

/// Configs shared by presets and the acceptance runs. All keep base's
/// dataset, schedule and seed.
ExperimentConfig supervised_only(ExperimentConfig base, bool with_mpmc);
ExperimentConfig with_components(ExperimentConfig base, bool mpmcl, bool mpmcul);

/// Largest odd kernel not above the tap feature map, for each scale.
std::vector<int> clamp_scales(const std::vector<int>& scales, int feature_size);

struct AblationResult {
  AblationPlan plan;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> miou;  // [variant][seed], final val mIoU

  double mean(std::size_t variant) const;
  /// Rows shaped like the paper table: row key cells then one mean-mIoU
  /// column per label fraction.
  std::string table_csv() const;
  /// Long form: one line per (variant, seed).
  std::string runs_csv() const;
};

/// Called after each run with the variant index, the seed and the finished
/// trainer.
using RunObserver = std::function<void(std::size_t, std::uint64_t, const Trainer&)>;

/// Trains every variant for every seed. When out_dir is non-empty each run
/// writes under out_dir/<variant>/seed<k> and the tables land in out_dir.
AblationResult run_ablation(const AblationPlan& plan, const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir, const RunObserver& observer = {});

}  // namespace mpmclab::train

#endif  // MPMCLAB_ABLATION_HPP
