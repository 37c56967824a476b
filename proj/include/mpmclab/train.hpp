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
#ifndef MPMCLAB_TRAIN_HPP
#define MPMCLAB_TRAIN_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mpmclab/config.hpp"
#include "mpmclab/metrics.hpp"
#include "mpmclab/params.hpp"
#include "mpmclab/synthdata.hpp"

namespace mpmclab::train {

struct StepLosses {
  int step = 0;
  double lr = 0.0;
  double sup = 0.0;
  double sup_ml = 0.0;
  double unsup = 0.0;
  double unsup_ml = 0.0;
  double total = 0.0;
  std::size_t mask_pixels = 0;
  bool operator==(const StepLosses&) const = default;
};

/// Validation metrics at one evaluation point. MPMC fields are NaN when the
/// head is disabled.
struct EvalMetrics {
  int step = 0;
  double miou = 0.0;
  double mdice = 0.0;
  double pixel_accuracy = 0.0;
  std::vector<double> class_iou;
  double hamming = 0.0;
  double energy_tp = 0.0;  // mean over comparable classes
  double energy_fn = 0.0;
  double energy_separated = 0.0;
  std::vector<double> instance_accuracy;  // per InstanceSizeAccuracy bin, NaN if empty
};

/// Append-only history of one run.
struct RunRecord {
  std::string config_hash;
  std::vector<StepLosses> steps;
  std::vector<EvalMetrics> evals;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string abort_component;
};

struct TrainState {
  int step = 0;
  ParamSet student_seg, student_mpmc;
  ParamSet teacher_seg, teacher_mpmc;
  ParamSet velocity_seg, velocity_mpmc;
};

/// Full per-image evaluation output, kept for A/B analyses.
struct EvalDetail {
  EvalMetrics metrics;
  metrics::EnergyReport energy;
  std::vector<int> ids;
  std::vector<LabelGrid> predictions;
  std::vector<mpmc::MpmcOutput> mpmc;  // empty when the head is disabled
};

/// Dataset from config.dataset.path, or generated from config.dataset.spec.
/// A loaded dataset is re-split when the configured label fraction differs
/// from its manifest.
synth::Dataset prepare_dataset(const ExperimentConfig& cfg);

class Trainer {
 public:
  Trainer(ExperimentConfig cfg, synth::Dataset data);

  const ExperimentConfig& config() const { return cfg_; }
  const synth::Dataset& data() const { return data_; }
  const TrainState& state() const { return state_; }
  const RunRecord& record() const { return record_; }
  const patches::PatchGrid& grid() const { return grid_; }

  /// One optimizer step. Throws TrainingAbort before touching the state when
  /// a loss component is non-finite.
  StepLosses step();
  /// Runs to config.optimizer.steps with periodic evaluation, checkpoints
  /// and output files. An abort is recorded, not rethrown; the last written
  /// checkpoint stays as it was.
  void run();

  EvalDetail evaluate(bool keep_details) const;
  /// Penultimate-stage features of every val image, written as one raw
  /// double stream plus a CSV index.
  void export_features(const std::filesystem::path& dir) const;

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

  /// Rewrites config.json, losses.csv, metrics.csv and manifest.json.
  void write_outputs() const;

 private:
  void event(const nlohmann::json& e) const;

  ExperimentConfig cfg_;
  synth::Dataset data_;
  seg::SegmentorSpec seg_spec_;
  mpmc::MpmcSpec mpmc_spec_;
  patches::PatchGrid grid_;
  augment::AugmentPolicy policy_;
  TrainState state_;
  RunRecord record_;
};

/// Builds the dataset, trains, and writes outputs under cfg.out_dir (when
/// non-empty). Resumes from resume_from when given.
RunRecord train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& resume_from = {});

/// Bin table comparing run a (whose MPMC head supplies hamming accuracy)
/// against reference run b: per-patch delta = tile mIoU(a) - tile mIoU(b).
std::vector<metrics::BinRow> ab_bin_table(const EvalDetail& a, const EvalDetail& b,
                                          const std::vector<LabelGrid>& gt, const patches::PatchGrid& grid,
                                          int num_classes);
std::string bin_table_csv(const std::vector<metrics::BinRow>& rows);

std::string losses_csv(const RunRecord& r);
std::string metrics_csv(const RunRecord& r);

}  // namespace mpmclab::train

#endif  // MPMCLAB_TRAIN_HPP
