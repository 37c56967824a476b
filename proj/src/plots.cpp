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
#include "mpmclab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mpmclab/common.hpp"
#include "mpmclab/logging.hpp"

namespace mpmclab::plots {
namespace {

namespace fs = std::filesystem;

constexpr const char* kInstancePrefix = "instance_accuracy_";
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
constexpr int kWidth = 640, kHeight = 400, kLeft = 60, kRight = 160, kTop = 30, kBottom = 50;

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string short_num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

class Svg {
 public:
  Svg(const std::string& title, double xmin, double xmax, double ymin, double ymax)
      : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" data-xmin=\"" << num(xmin) << "\" data-xmax=\"" << num(xmax) << "\" data-ymin=\"" << num(ymin)
        << "\" data-ymax=\"" << num(ymax) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
    const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    os_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = ymin + (ymax - ymin) * t / 4.0;
      os_ << "<text x=\"" << x0 - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
          << short_num(v) << "</text>\n";
    }
  }
  double px(double x) const {
    const double span = xmax_ - xmin_;
    return kLeft + (span > 0 ? (x - xmin_) / span : 0.5) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = ymax_ - ymin_;
    return (kHeight - kBottom) - (span > 0 ? (y - ymin_) / span : 0.5) * (kHeight - kTop - kBottom);
  }
  std::ostringstream& body() { return os_; }
  void legend(int i, const std::string& label, const std::string& color, bool dashed = false) {
    const int y = kTop + 14 * i;
    const int x = kWidth - kRight + 10;
    os_ << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + 16 << "\" y2=\"" << y << "\" stroke=\""
        << color << "\" stroke-width=\"3\"" << (dashed ? " stroke-dasharray=\"4 2\"" : "") << "/>\n"
        << "<text x=\"" << x + 20 << "\" y=\"" << y + 4 << "\" font-size=\"10\">" << escape(label) << "</text>\n";
  }
  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  double xmin_, xmax_, ymin_, ymax_;
  std::ostringstream os_;
};

void write_file(const fs::path& p, const std::string& text, PlotReport& rep) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw LoadError("cannot write " + p.string());
  out << text;
  rep.files.push_back(p);
}

void warn(PlotReport& rep, const std::string& msg) {
  ++rep.warnings;
  log::warn(msg);
}

std::vector<std::string> instance_bins(const RunSeries& r) {
  std::vector<std::pair<int, std::string>> bins;
  for (const auto& [name, series] : r.metrics)
    if (name.rfind(kInstancePrefix, 0) == 0) {
      const std::string label = name.substr(std::string(kInstancePrefix).size());
      bins.push_back({std::atoi(label.c_str()), label});
    }
  std::sort(bins.begin(), bins.end());
  std::vector<std::string> out;
  for (auto& b : bins) out.push_back(b.second);
  return out;
}

void instance_chart(const std::vector<RunSeries>& runs, const fs::path& dir, PlotReport& rep) {
  std::vector<const RunSeries*> usable;
  std::vector<std::string> bins;
  for (const auto& r : runs) {
    const auto b = instance_bins(r);
    if (b.empty()) {
      warn(rep, "plots: run " + r.name + " has no instance accuracy metrics; skipped in instance chart");
      continue;
    }
    if (bins.empty()) bins = b;
    usable.push_back(&r);
  }
  if (usable.empty()) {
    warn(rep, "plots: instance accuracy chart skipped (no run carries the metric)");
    return;
  }
  std::ostringstream csv;
  csv << "run,bin,pixel_accuracy\n";
  double lo = 0.0, hi = -std::numeric_limits<double>::infinity();
  for (const auto* r : usable)
    for (const auto& b : bins) {
      const double v = r->last(kInstancePrefix + b);
      if (!std::isfinite(v)) continue;
      csv << r->name << ',' << b << ',' << num(v) << '\n';
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  write_file(dir / "instance_accuracy.csv", csv.str(), rep);
  if (usable.size() < 2) return;
  if (!std::isfinite(hi)) hi = 1.0;
  Svg svg("Pixel accuracy by instance size", 0, static_cast<double>(bins.size()), lo, hi);
  const double slot = 1.0 / (usable.size() + 1);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const std::string color = kPalette[i % std::size(kPalette)];
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const double v = usable[i]->last(kInstancePrefix + bins[b]);
      if (!std::isfinite(v)) continue;
      const double x0 = svg.px(b + slot * (i + 0.5)), x1 = svg.px(b + slot * (i + 1.5));
      const double ytop = svg.py(std::max(v, lo)), ybase = svg.py(std::max(0.0, lo));
      svg.body() << "<rect x=\"" << x0 << "\" y=\"" << std::min(ytop, ybase) << "\" width=\"" << x1 - x0
                 << "\" height=\"" << std::abs(ybase - ytop) << "\" fill=\"" << color << "\" data-value=\"" << num(v)
                 << "\"/>\n";
    }
    svg.legend(static_cast<int>(i), usable[i]->name, color);
  }
  for (std::size_t b = 0; b < bins.size(); ++b)
    svg.body() << "<text x=\"" << svg.px(b + 0.5) << "\" y=\"" << kHeight - kBottom + 16
               << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(bins[b]) << "</text>\n";
  write_file(dir / "instance_accuracy.svg", svg.finish(), rep);
}

void energy_chart(const std::vector<RunSeries>& runs, const fs::path& dir, PlotReport& rep) {
  std::vector<const RunSeries*> usable;
  for (const auto& r : runs) {
    if (!r.has("energy_tp") || !r.has("energy_fn")) {
      warn(rep, "plots: run " + r.name + " has no energy metrics; skipped in energy chart");
      continue;
    }
    usable.push_back(&r);
  }
  if (usable.empty()) {
    warn(rep, "plots: energy chart skipped (no run carries the metric)");
    return;
  }
  std::ostringstream csv;
  csv << "run,group,step,energy\n";
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto* r : usable)
    for (const char* g : {"energy_tp", "energy_fn"})
      for (const auto& [step, v] : r->metrics.at(g)) {
        csv << r->name << ',' << (g[7] == 't' ? "TP" : "FN") << ',' << step << ',' << num(v) << '\n';
        xlo = std::min(xlo, static_cast<double>(step));
        xhi = std::max(xhi, static_cast<double>(step));
        ylo = std::min(ylo, v);
        yhi = std::max(yhi, v);
      }
  write_file(dir / "energy.csv", csv.str(), rep);
  if (usable.size() < 2) return;
  Svg svg("Label-wise energy of TP and FN patches", xlo, xhi, ylo, yhi);
  int legend = 0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const std::string color = kPalette[i % std::size(kPalette)];
    for (const char* g : {"energy_tp", "energy_fn"}) {
      const bool fn = g[7] == 'f';
      svg.body() << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
                 << (fn ? " stroke-dasharray=\"4 2\"" : "") << " points=\"";
      for (const auto& [step, v] : usable[i]->metrics.at(g)) svg.body() << svg.px(step) << ',' << svg.py(v) << ' ';
      svg.body() << "\"/>\n";
      svg.legend(legend++, usable[i]->name + (fn ? " FN" : " TP"), color, fn);
    }
  }
  svg.body() << "<text x=\"" << svg.px(xlo) << "\" y=\"" << kHeight - kBottom + 16 << "\" font-size=\"10\">"
             << num(xlo) << "</text>\n<text x=\"" << svg.px(xhi) << "\" y=\"" << kHeight - kBottom + 16
             << "\" text-anchor=\"end\" font-size=\"10\">" << num(xhi) << "</text>\n";
  write_file(dir / "energy.svg", svg.finish(), rep);
}

}  // namespace

double RunSeries::last(const std::string& metric) const {
  const auto it = metrics.find(metric);
  if (it == metrics.end() || it->second.empty()) return std::numeric_limits<double>::quiet_NaN();
  return it->second.back().second;
}

RunSeries load_run(const fs::path& run_dir) {
  const fs::path p = run_dir / "metrics.csv";
  std::ifstream in(p);
  if (!in) throw LoadError("missing file: " + p.string());
  RunSeries r;
  r.name = run_dir.filename().string();
  std::string line;
  std::getline(in, line);
  if (line != "step,metric,value") throw LoadError(p.string() + ": unexpected header '" + line + "'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw LoadError(p.string() + ":" + std::to_string(lineno) + ": bad row");
    try {
      r.metrics[line.substr(a + 1, b - a - 1)].push_back({std::stoi(line.substr(0, a)), std::stod(line.substr(b + 1))});
    } catch (const std::exception&) {
      throw LoadError(p.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return r;
}

std::vector<RunSeries> load_runs(const fs::path& root) {
  if (!fs::is_directory(root)) throw LoadError("runs directory does not exist: " + root.string());
  std::vector<fs::path> dirs;
  if (fs::exists(root / "metrics.csv")) dirs.push_back(root);
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunSeries> runs;
  for (const auto& d : dirs) {
    runs.push_back(load_run(d));
    const auto rel = fs::relative(d, root).generic_string();
    runs.back().name = rel == "." ? d.filename().string() : rel;
  }
  return runs;
}

PlotReport emit_plots(const std::vector<RunSeries>& runs, const fs::path& out_dir) {
  PlotReport rep;
  if (runs.empty()) {
    warn(rep, "plots: no runs found; nothing emitted");
    return rep;
  }
  fs::create_directories(out_dir);
  if (runs.size() < 2) warn(rep, "plots: single run; comparison charts skipped, CSVs only");
  instance_chart(runs, out_dir, rep);
  energy_chart(runs, out_dir, rep);
  return rep;
}

}  // namespace mpmclab::plots
