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
// Command-line front end: dataset generation, training, ablations,
// evaluation of checkpoints and plot emission.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpmclab/ablation.hpp"
#include "mpmclab/logging.hpp"
#include "mpmclab/plots.hpp"
#include "mpmclab/train.hpp"

namespace {

using namespace mpmclab;
using nlohmann::json;

struct ConfigArgs {
  std::string preset = "default";
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a, bool with_out, const char* preset_flag = "--preset") {
  cmd->add_option(preset_flag, a.preset, "Config preset to start from")->capture_default_str();
  cmd->add_option("--config", a.config, "JSON config file merged over the preset")->check(CLI::ExistingFile);
  cmd->add_option("--override", a.overrides, "Dotted key=value override, repeatable");
  if (with_out) cmd->add_option("--out", a.out, "Output directory");
}

train::ExperimentConfig resolve(const ConfigArgs& a) {
  json j = train::to_json(train::preset(a.preset));
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("malformed config " + a.config + ": " + e.what());
    }
    j.merge_patch(file);
  }
  for (const auto& o : a.overrides) train::apply_override(j, o);
  auto cfg = train::from_json(j);
  if (!a.out.empty()) cfg.out_dir = a.out;
  cfg.validate();
  return cfg;
}

std::vector<synth::Rational> parse_fractions(const std::string& list) {
  std::vector<synth::Rational> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(synth::Rational::parse(item));
  return out;
}

int cmd_dataset(const ConfigArgs& a) {
  if (a.out.empty()) throw ConfigError("dataset generate needs --out");
  auto cfg = resolve(a);
  cfg.dataset.path.clear();
  const auto data = train::prepare_dataset(cfg);
  synth::save_dataset(data, a.out);
  std::printf("wrote %zu scenes (%zu labeled, %zu unlabeled, %zu val) to %s\n", data.size(),
              data.split.labeled_ids.size(), data.split.unlabeled_ids.size(), data.split.val_ids.size(),
              a.out.c_str());
  return 0;
}

int cmd_train(const ConfigArgs& a, const std::string& resume) {
  const auto cfg = resolve(a);
  const auto rec = train::train(cfg, resume.empty() ? std::nullopt : std::optional<std::filesystem::path>(resume));
  if (!rec.evals.empty()) {
    const auto& m = rec.evals.back();
    std::printf("step %d  mIoU %.4f  mDice %.4f  pixel acc %.4f  (%.1fs, config %s)\n", m.step, m.miou, m.mdice,
                m.pixel_accuracy, rec.wall_seconds, rec.config_hash.c_str());
  }
  if (rec.aborted) {
    std::fprintf(stderr, "training aborted: non-finite %s\n", rec.abort_component.c_str());
    return 3;
  }
  return 0;
}

int cmd_ablate(const ConfigArgs& a, const std::string& name, int num_seeds, const std::string& fractions) {
  const auto base = resolve(a);
  const auto plan = train::ablation_plan(name, base, parse_fractions(fractions));
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < num_seeds; ++s) seeds.push_back(base.seed + static_cast<std::uint64_t>(s));
  const auto res = train::run_ablation(plan, seeds, a.out);
  std::cout << res.table_csv();
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& split, const std::string& out,
             const std::string& features) {
  if (split != "val") throw ConfigError("only --split val is supported, got '" + split + "'");
  const auto ckpt = load_checkpoint(checkpoint);
  if (!ckpt.meta.contains("config")) throw LoadError("checkpoint has no embedded config: " + checkpoint);
  auto cfg = train::from_json(ckpt.meta.at("config"));
  cfg.out_dir.clear();
  train::Trainer trainer(cfg, train::prepare_dataset(cfg));
  trainer.restore(ckpt);
  const auto d = trainer.evaluate(false);
  const auto& m = d.metrics;
  json report = {{"checkpoint", checkpoint}, {"split", split},          {"step", m.step},
                 {"miou", m.miou},           {"mdice", m.mdice},        {"pixel_accuracy", m.pixel_accuracy},
                 {"class_iou", m.class_iou}, {"config_hash", trainer.record().config_hash}};
  if (cfg.mpmc.enabled) {
    report["hamming"] = m.hamming;
    json classes = json::array();
    for (const auto& c : d.energy.classes)
      classes.push_back({{"tp_count", c.tp_count}, {"fn_count", c.fn_count}, {"tp_mean", c.tp_mean},
                         {"fn_mean", c.fn_mean}});
    report["energy"] = {{"classes", classes}, {"separated_fraction", d.energy.separated_fraction()}};
  }
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "eval.json") << report.dump(2) << '\n';
  }
  if (!features.empty()) trainer.export_features(features);
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_plots(const std::string& runs, const std::string& out) {
  const auto series = plots::load_runs(runs);
  const auto rep = plots::emit_plots(series, out.empty() ? std::filesystem::path(runs) / "plots" : std::filesystem::path(out));
  for (const auto& f : rep.files) std::printf("wrote %s\n", f.string().c_str());
  std::printf("%zu run(s), %ld warning(s)\n", series.size(), rep.warnings);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPMC lab: semi-supervised segmentation with a patch multi-label head"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

  ConfigArgs dataset_args, train_args, ablate_args;
  auto* dataset = app.add_subcommand("dataset", "Synthetic corpus tools");
  auto* generate = dataset->add_subcommand("generate", "Generate and save a corpus from a config");
  dataset->require_subcommand(1);
  add_config_args(generate, dataset_args, true);

  auto* train_cmd = app.add_subcommand("train", "Train one configuration");
  add_config_args(train_cmd, train_args, true);
  std::string resume;
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* ablate = app.add_subcommand("ablate", "Run an ablation preset");
  std::string ablation;
  int seeds = 3;
  std::string fractions;
  ablate->add_option("--preset", ablation, "Ablation preset")
      ->required()
      ->check(CLI::IsMember(train::ablation_presets()));
  ablate->add_option("--seeds", seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
  ablate->add_option("--fractions", fractions, "Comma-separated label fractions, e.g. 1/16,1/8");
  ablate_args.preset = "desk";
  add_config_args(ablate, ablate_args, true, "--base");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint, split = "val", eval_out, features;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "Split to evaluate")->capture_default_str();
  eval->add_option("--out", eval_out, "Directory for eval.json");
  eval->add_option("--export-features", features, "Directory for penultimate feature dump");

  auto* plots_cmd = app.add_subcommand("plots", "Emit charts from run directories");
  std::string runs, plots_out;
  plots_cmd->add_option("--runs", runs, "Directory containing runs")->required();
  plots_cmd->add_option("--out", plots_out, "Output directory (default <runs>/plots)");

  CLI11_PARSE(app, argc, argv);
  if (quiet) log::set_level(log::Level::kWarn);

  try {
    if (generate->parsed()) return cmd_dataset(dataset_args);
    if (train_cmd->parsed()) return cmd_train(train_args, resume);
    if (ablate->parsed()) return cmd_ablate(ablate_args, ablation, seeds, fractions);
    if (eval->parsed()) return cmd_eval(checkpoint, split, eval_out, features);
    if (plots_cmd->parsed()) return cmd_plots(runs, plots_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const LoadError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
