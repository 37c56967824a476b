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
#ifndef MPMCLAB_PLOTS_HPP
#define MPMCLAB_PLOTS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mpmclab::plots {

/// Evaluation history of one run, as read back from its metrics.csv.
struct RunSeries {
  std::string name;
  /// metric -> (step, value) in file order.
  std::map<std::string, std::vector<std::pair<int, double>>> metrics;

  bool has(const std::string& metric) const { return metrics.count(metric) > 0; }
  /// Value at the last step of the metric; NaN when absent.
  double last(const std::string& metric) const;
};

RunSeries load_run(const std::filesystem::path& run_dir);
/// Every directory below root (root included) holding a metrics.csv, sorted
/// by path. Run names are paths relative to root.
std::vector<RunSeries> load_runs(const std::filesystem::path& root);

struct PlotReport {
  std::vector<std::filesystem::path> files;
  long warnings = 0;
};

/// Instance-size pixel accuracy bars (final eval, one bar per run per bin)
/// and TP/FN energy curves per step. Each chart ships with a CSV of exactly
/// the plotted values; its SVG carries the axis range as data-xmin/xmax and
/// data-ymin/ymax attributes. Charts need at least two runs; a single run
/// yields CSVs only; no runs yields no files.
PlotReport emit_plots(const std::vector<RunSeries>& runs, const std::filesystem::path& out_dir);

}  // namespace mpmclab::plots

#endif  // MPMCLAB_PLOTS_HPP
