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
#include "mpmclab/ablation.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mpmclab/logging.hpp"

namespace mpmclab::train {
namespace {

const char* check(bool on) { return on ? "x" : ""; }

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::string slug(const AblationVariant& v, std::size_t index) {
  std::string s = std::to_string(index);
  for (const auto& cell : v.row) s += "_" + (cell.empty() ? std::string("-") : cell);
  s += "_" + v.column;
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-' && ch != '.') ch = '_';
  return s;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

std::vector<std::string> ablation_presets() {
  return {"components", "scales", "tap_position", "alpha_sweep", "beta_sweep", "label_fraction"};
}

ExperimentConfig supervised_only(ExperimentConfig c, bool with_mpmc) {
  c.optimizer.batch_unlabeled = 0;
  c.pseudo.alpha = 0.0;
  c.pseudo.beta = 0.0;
  c.mpmc.enabled = with_mpmc;
  c.mpmc.labeled = with_mpmc;
  c.mpmc.unlabeled = false;
  return c;
}

ExperimentConfig with_components(ExperimentConfig c, bool mpmcl, bool mpmcul) {
  c.mpmc.enabled = mpmcl || mpmcul;
  c.mpmc.labeled = mpmcl;
  c.mpmc.unlabeled = mpmcul;
  return c;
}

std::vector<int> clamp_scales(const std::vector<int>& scales, int feature_size) {
  const int largest = feature_size % 2 ? feature_size : feature_size - 1;
  std::vector<int> out;
  for (int k : scales) out.push_back(std::max(1, std::min(k, largest)));
  return out;
}

AblationPlan ablation_plan(const std::string& preset, const ExperimentConfig& base,
                           const std::vector<synth::Rational>& fractions) {
  AblationPlan plan;
  plan.preset = preset;
  std::vector<synth::Rational> cols = fractions;
  auto default_cols = [&](std::vector<synth::Rational> d) {
    if (cols.empty()) cols = std::move(d);
  };
  std::vector<std::pair<std::vector<std::string>, ExperimentConfig>> rows;
  if (preset == "components") {
    plan.row_headers = {"MPMCL", "MPMCUL"};
    default_cols({{1, 16}, {1, 8}, {1, 4}});
    for (auto [l, u] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}})
      rows.push_back({{check(l), check(u)}, with_components(base, l, u)});
  } else if (preset == "scales") {
    plan.row_headers = {"original", "7x7 avgpool", "19x19 avgpool"};
    default_cols({base.dataset.label_fraction});
    // Paper row order: none, singles, pairs, all.
    const int masks[8] = {0b000, 0b100, 0b010, 0b001, 0b110, 0b101, 0b011, 0b111};
    for (int m : masks) {
      ExperimentConfig c = base;
      const bool orig = m & 0b100, s7 = m & 0b010, s19 = m & 0b001;
      c.mpmc.use_original = orig;
      c.mpmc.scales.clear();
      if (s7) c.mpmc.scales.push_back(7);
      if (s19) c.mpmc.scales.push_back(19);
      if (m == 0) c = with_components(c, false, false);  // nothing to classify from
      rows.push_back({{check(orig), check(s7), check(s19)}, c});
    }
  } else if (preset == "tap_position") {
    plan.row_headers = {"tap"};
    default_cols({base.dataset.label_fraction});
    for (int tap = 0; tap < static_cast<int>(base.model.stage_channels.size()); ++tap) {
      ExperimentConfig c = base;
      c.model.tap_layer = tap;
      const int stride = c.model.cumulative_stride(tap);
      const int fs = std::min(c.dataset.spec.height, c.dataset.spec.width) / stride;
      c.mpmc.scales = clamp_scales(c.mpmc.scales, fs);
      rows.push_back({{"enc.stage" + std::to_string(tap + 1)}, c});
    }
  } else if (preset == "alpha_sweep") {
    plan.row_headers = {"alpha"};
    default_cols({{1, 16}, {1, 8}});
    for (double a : {0.0, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45}) {
      ExperimentConfig c = base;
      c.pseudo.alpha = a;
      rows.push_back({{fmt(a).substr(0, 4)}, c});
    }
  } else if (preset == "beta_sweep") {
    plan.row_headers = {"beta"};
    default_cols({{1, 16}, {1, 8}});
    for (double b : {0.0, 0.05, 0.10, 0.15, 0.20, 0.25}) {
      ExperimentConfig c = base;
      c.pseudo.beta = b;
      rows.push_back({{fmt(b).substr(0, 4)}, c});
    }
  } else if (preset == "label_fraction") {
    plan.row_headers = {"method"};
    default_cols({{1, 16}, {1, 8}, {1, 4}});
    rows.push_back({{"w/o MPMC"}, supervised_only(base, false)});
    rows.push_back({{"w/ MPMC"}, supervised_only(base, true)});
  } else {
    std::string known;
    for (const auto& n : ablation_presets()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown ablation preset '" + preset + "' (known: " + known + ")");
  }
  for (const auto& f : cols) plan.columns.push_back(f.str());
  for (const auto& [key, cfg] : rows)
    for (const auto& f : cols) {
      AblationVariant v{key, f.str(), cfg};
      v.config.dataset.label_fraction = f;
      v.config.name = preset;
      v.config.validate();
      plan.variants.push_back(std::move(v));
    }
  return plan;
}

double AblationResult::mean(std::size_t v) const {
  const auto& m = miou.at(v);
  return m.empty() ? 0.0 : std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
}

std::string AblationResult::table_csv() const {
  std::ostringstream os;
  for (const auto& h : plan.row_headers) os << csv_cell(h) << ',';
  for (std::size_t c = 0; c < plan.columns.size(); ++c) os << (c ? "," : "") << csv_cell(plan.columns[c]);
  os << '\n';
  const std::size_t ncol = plan.columns.size();
  for (std::size_t r = 0; r * ncol < plan.variants.size(); ++r) {
    for (const auto& cell : plan.variants[r * ncol].row) os << csv_cell(cell) << ',';
    for (std::size_t c = 0; c < ncol; ++c) os << (c ? "," : "") << fmt(100.0 * mean(r * ncol + c));
    os << '\n';
  }
  return os.str();
}

std::string AblationResult::runs_csv() const {
  std::ostringstream os;
  for (const auto& h : plan.row_headers) os << csv_cell(h) << ',';
  os << "fraction,seed,miou\n";
  for (std::size_t v = 0; v < plan.variants.size(); ++v)
    for (std::size_t s = 0; s < seeds.size() && s < miou[v].size(); ++s) {
      for (const auto& cell : plan.variants[v].row) os << csv_cell(cell) << ',';
      os << plan.variants[v].column << ',' << seeds[s] << ',' << fmt(miou[v][s]) << '\n';
    }
  return os.str();
}

AblationResult run_ablation(const AblationPlan& plan, const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir, const RunObserver& observer) {
  if (seeds.empty()) throw ConfigError("run_ablation: no seeds given");
  AblationResult res;
  res.plan = plan;
  res.seeds = seeds;
  std::map<std::string, synth::Dataset> datasets;  // keyed by dataset config
  for (std::size_t v = 0; v < plan.variants.size(); ++v) {
    const auto& variant = plan.variants[v];
    const std::string key = to_json(variant.config)["dataset"].dump();
    if (!datasets.count(key)) datasets.emplace(key, prepare_dataset(variant.config));
    res.miou.emplace_back();
    for (auto seed : seeds) {
      ExperimentConfig c = variant.config;
      c.seed = seed;
      c.out_dir = out_dir.empty() ? std::string()
                                  : (out_dir / slug(variant, v) / ("seed" + std::to_string(seed))).string();
      Trainer trainer(c, datasets.at(key));
      trainer.run();
      const auto& rec = trainer.record();
      const double m = rec.evals.empty() ? std::nan("") : rec.evals.back().miou;
      res.miou.back().push_back(m);
      log::info(plan.preset + " [" + std::to_string(v + 1) + "/" + std::to_string(plan.variants.size()) +
                "] seed " + std::to_string(seed) + ": mIoU " + fmt(m));
      if (observer) observer(v, seed, trainer);
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / (plan.preset + ".csv")) << res.table_csv();
    std::ofstream(out_dir / (plan.preset + "_runs.csv")) << res.runs_csv();
  }
  return res;
}

}  // namespace mpmclab::train
