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
#include "mpmclab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <nlohmann/json.hpp>

#include "mpmclab/rng.hpp"
#include "png_io.hpp"

namespace mpmclab {

Tensor ImageGrid::to_tensor() const {
  Tensor t({3, height_, width_});
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = at(y, x, c);
  return t;
}

void validate_labels(const LabelGrid& labels, int num_classes, const std::string& context) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int v = labels.labels()[i];
    if (v != kIgnoreLabel && v >= num_classes) {
      throw LoadError(context + ": label value " + std::to_string(v) + " at pixel " +
                      std::to_string(i) + " is outside 0.." + std::to_string(num_classes - 1) +
                      " and not the ignore value");
    }
  }
}

namespace synth {
namespace {

using Rgb = std::array<Real, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Classes 1,2 / 3,4 / ... form pairs; color_overlap pulls the second member
// of each pair onto the first member's hue.
Rgb class_color(const DatasetSpec& spec, int c) {
  if (c == 0) return {0.42, 0.44, 0.40};
  const int fg = spec.num_classes - 1;
  const Rgb own = hsv_to_rgb(static_cast<double>(c - 1) / fg, 0.75, 0.85);
  const int leader = ((c - 1) / 2) * 2 + 1;
  const Rgb lead = hsv_to_rgb(static_cast<double>(leader - 1) / fg, 0.75, 0.85);
  Rgb out;
  for (int k = 0; k < 3; ++k) out[k] = (1 - spec.color_overlap) * own[k] + spec.color_overlap * lead[k];
  return out;
}

struct Shape {
  int cls;
  bool ellipse;
  double cy, cx, ry, rx, angle;
  std::vector<std::pair<double, double>> polygon;
  Rgb color;
  double stripe_freq, stripe_angle;
};

bool inside(const Shape& s, double y, double x) {
  if (s.ellipse) {
    const double dy = y - s.cy, dx = x - s.cx;
    const double ca = std::cos(s.angle), sa = std::sin(s.angle);
    const double u = (dx * ca + dy * sa) / s.rx;
    const double v = (-dx * sa + dy * ca) / s.ry;
    return u * u + v * v <= 1.0;
  }
  bool in = false;
  const auto& p = s.polygon;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) {
    const auto [yi, xi] = p[i];
    const auto [yj, xj] = p[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

Real quantize(Real v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

void DatasetSpec::validate() const {
  if (num_classes < 3 || num_classes > kMaxClasses)
    throw ConfigError("num_classes must be in [3, " + std::to_string(kMaxClasses) + "], got " +
                      std::to_string(num_classes));
  if (height < 32 || width < 32) throw ConfigError("image size must be at least 32x32");
  if (shapes_min < 1) throw ConfigError("shapes_per_scene minimum must be >= 1");
  if (shapes_max < shapes_min) throw ConfigError("shapes_per_scene maximum below minimum");
  if (!(class_frequency_skew >= 1.0)) throw ConfigError("class_frequency_skew must be >= 1");
  if (!(radius_min > 0.0 && radius_max >= radius_min && radius_max <= 1.0))
    throw ConfigError("radius range must satisfy 0 < min <= max <= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(color_overlap >= 0.0 && color_overlap <= 1.0)) throw ConfigError("color_overlap must be in [0, 1]");
}

Rational Rational::parse(const std::string& text) {
  Rational r;
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      r.num = std::stoi(text.substr(0, slash));
      r.den = std::stoi(text.substr(slash + 1));
    } else {
      const double v = std::stod(text);
      r.den = 1 << 20;
      r.num = static_cast<int>(std::lround(v * r.den));
      const int g = std::gcd(r.num, r.den);
      if (g > 0) {
        r.num /= g;
        r.den /= g;
      }
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse fraction '" + text + "'");
  }
  if (r.den <= 0) throw ConfigError("fraction denominator must be positive: '" + text + "'");
  return r;
}

Scene generate_scene(const DatasetSpec& spec, std::uint64_t scene_seed) {
  spec.validate();
  Rng rng(derive_seed(scene_seed, {0x5CE4E}));
  const int H = spec.height, W = spec.width;
  const double side = std::min(H, W);

  std::vector<double> weights;
  for (int c = 1; c < spec.num_classes; ++c) weights.push_back(std::pow(spec.class_frequency_skew, -(c - 1)));
  double wsum = 0;
  for (double w : weights) wsum += w;

  const int count = rng.range(spec.shapes_min, spec.shapes_max);
  std::vector<Shape> shapes;
  for (int k = 0; k < count; ++k) {
    Shape s;
    double u = rng.uniform() * wsum;
    s.cls = 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) {
        s.cls = static_cast<int>(i) + 1;
        break;
      }
      u -= weights[i];
      s.cls = static_cast<int>(i) + 1;
    }
    s.ellipse = (s.cls % 2) == 1;
    const double r = std::max(1.5, side * rng.uniform(spec.radius_min, spec.radius_max));
    s.cy = rng.uniform(0, H - 1);
    s.cx = rng.uniform(0, W - 1);
    s.angle = rng.uniform(0, std::numbers::pi);
    s.ry = r * rng.uniform(0.6, 1.0);
    s.rx = r * rng.uniform(0.6, 1.0);
    if (!s.ellipse) {
      const int n = rng.range(3, 6);
      std::vector<double> angles(n);
      for (auto& a : angles) a = rng.uniform(0, 2 * std::numbers::pi);
      std::sort(angles.begin(), angles.end());
      for (double a : angles) {
        const double rr = r * rng.uniform(0.75, 1.15);
        s.polygon.emplace_back(s.cy + rr * std::sin(a), s.cx + rr * std::cos(a));
      }
    }
    const Rgb base = class_color(spec, s.cls);
    for (int ch = 0; ch < 3; ++ch) s.color[ch] = base[ch] + rng.uniform(-0.05, 0.05);
    s.stripe_freq = 0.6 + 0.35 * (s.cls % 3);
    s.stripe_angle = 0.7 * s.cls;
    shapes.push_back(std::move(s));
  }

  Scene scene{ImageGrid(H, W), LabelGrid(H, W, 0)};
  const double gy = rng.uniform(-0.1, 0.1), gx = rng.uniform(-0.1, 0.1);
  const Rgb bg = class_color(spec, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double shade = gy * (y - H / 2.0) / H + gx * (x - W / 2.0) / W;
      for (int ch = 0; ch < 3; ++ch) scene.image.at(y, x, ch) = bg[ch] + shade;
    }
  for (const auto& s : shapes) {
    bool painted = false;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!inside(s, y, x)) continue;
        painted = true;
        scene.label.at(y, x) = static_cast<std::uint8_t>(s.cls);
        const double t = 0.07 * std::sin(s.stripe_freq * (x * std::cos(s.stripe_angle) + y * std::sin(s.stripe_angle)));
        for (int ch = 0; ch < 3; ++ch) scene.image.at(y, x, ch) = s.color[ch] + t;
      }
    if (!painted) {
      const int y = std::clamp(static_cast<int>(std::lround(s.cy)), 0, H - 1);
      const int x = std::clamp(static_cast<int>(std::lround(s.cx)), 0, W - 1);
      scene.label.at(y, x) = static_cast<std::uint8_t>(s.cls);
      for (int ch = 0; ch < 3; ++ch) scene.image.at(y, x, ch) = s.color[ch];
    }
  }
  for (auto& v : scene.image.pixels()) v = quantize(v + spec.noise_sigma * rng.normal());
  return scene;
}

SplitManifest make_splits(int num_train, Rational fraction, std::uint64_t seed, int num_val) {
  if (fraction.den <= 0 || fraction.num <= 0) throw ConfigError("label fraction must be > 0");
  if (fraction.num > fraction.den) throw ConfigError("label fraction must be <= 1");
  if (num_train < 1) throw ConfigError("num_train must be >= 1");
  const long long twice = 2LL * fraction.num * num_train + fraction.den;
  const int rounded = static_cast<int>(twice / (2LL * fraction.den));
  const int labeled = std::max(1, rounded);

  std::vector<int> ids(num_train);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, {0x5B117}));
  for (int i = num_train - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);

  SplitManifest m;
  m.label_fraction = fraction;
  m.labeled_ids.assign(ids.begin(), ids.begin() + labeled);
  m.unlabeled_ids.assign(ids.begin() + labeled, ids.end());
  std::sort(m.labeled_ids.begin(), m.labeled_ids.end());
  std::sort(m.unlabeled_ids.begin(), m.unlabeled_ids.end());
  for (int i = 0; i < num_val; ++i) m.val_ids.push_back(num_train + i);
  return m;
}

Dataset generate_dataset(const DatasetSpec& spec, int num_train, int num_val, Rational fraction,
                         std::uint64_t split_seed) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.split = make_splits(num_train, fraction, split_seed, num_val);
  const int total = num_train + num_val;
  ds.images.reserve(total);
  ds.labels.reserve(total);
  for (int i = 0; i < total; ++i) {
    Scene s = generate_scene(spec, derive_seed(spec.seed, {static_cast<std::uint64_t>(i)}));
    ds.images.push_back(std::move(s.image));
    ds.labels.push_back(std::move(s.label));
  }
  return ds;
}

std::string scene_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return buf;
}

namespace {

nlohmann::json spec_to_json(const DatasetSpec& s) {
  return {{"num_classes", s.num_classes},
          {"height", s.height},
          {"width", s.width},
          {"shapes_min", s.shapes_min},
          {"shapes_max", s.shapes_max},
          {"class_frequency_skew", s.class_frequency_skew},
          {"radius_min", s.radius_min},
          {"radius_max", s.radius_max},
          {"noise_sigma", s.noise_sigma},
          {"color_overlap", s.color_overlap},
          {"seed", s.seed}};
}

DatasetSpec spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.num_classes = j.at("num_classes").get<int>();
  s.height = j.at("height").get<int>();
  s.width = j.at("width").get<int>();
  s.shapes_min = j.at("shapes_min").get<int>();
  s.shapes_max = j.at("shapes_max").get<int>();
  s.class_frequency_skew = j.at("class_frequency_skew").get<double>();
  s.radius_min = j.at("radius_min").get<double>();
  s.radius_max = j.at("radius_max").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.color_overlap = j.at("color_overlap").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  nlohmann::json ids = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string id = scene_id(static_cast<int>(i));
    ids.push_back(id);
    const ImageGrid& img = ds.images[i];
    png::Raster rgb{img.width(), img.height(), 3, {}};
    rgb.bytes.reserve(img.pixels().size());
    for (Real v : img.pixels()) rgb.bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    png::write(dir / "images" / (id + ".png"), rgb);
    const LabelGrid& lab = ds.labels[i];
    png::write(dir / "masks" / (id + ".png"), {lab.width(), lab.height(), 1, lab.labels()});
  }
  nlohmann::json manifest = {
      {"format", "mpmclab-dataset"},
      {"version", 1},
      {"num_classes", ds.spec.num_classes},
      {"ignore_label", kIgnoreLabel},
      {"spec", spec_to_json(ds.spec)},
      {"ids", ids},
      {"splits",
       {{"labeled", ds.split.labeled_ids},
        {"unlabeled", ds.split.unlabeled_ids},
        {"val", ds.split.val_ids},
        {"label_fraction", ds.split.label_fraction.str()}}}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw LoadError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("missing manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    throw LoadError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.spec = spec_from_json(manifest.at("spec"));
    const auto& splits = manifest.at("splits");
    ds.split.labeled_ids = splits.at("labeled").get<std::vector<int>>();
    ds.split.unlabeled_ids = splits.at("unlabeled").get<std::vector<int>>();
    ds.split.val_ids = splits.at("val").get<std::vector<int>>();
    ds.split.label_fraction = Rational::parse(splits.at("label_fraction").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("manifest " + manifest_path.string() + ": " + e.what());
  }
  const int C = manifest.value("num_classes", ds.spec.num_classes);
  if (C != ds.spec.num_classes) throw LoadError("manifest num_classes disagrees with spec");

  const auto ids = manifest.at("ids").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != scene_id(static_cast<int>(i)))
      throw LoadError("manifest id list out of order at entry " + ids[i]);
    const auto image_path = dir / "images" / (ids[i] + ".png");
    const auto mask_path = dir / "masks" / (ids[i] + ".png");
    png::Raster rgb = png::read(image_path, 3);
    png::Raster gray = png::read(mask_path, 1);
    if (rgb.width != gray.width || rgb.height != gray.height)
      throw LoadError("image/mask size mismatch for " + mask_path.string());
    ImageGrid img(rgb.height, rgb.width);
    for (std::size_t k = 0; k < rgb.bytes.size(); ++k) img.pixels()[k] = rgb.bytes[k] / 255.0;
    LabelGrid lab(gray.height, gray.width);
    lab.labels() = std::move(gray.bytes);
    validate_labels(lab, C, mask_path.string());
    ds.images.push_back(std::move(img));
    ds.labels.push_back(std::move(lab));
  }
  const int n = static_cast<int>(ids.size());
  for (const auto* list : {&ds.split.labeled_ids, &ds.split.unlabeled_ids, &ds.split.val_ids})
    for (int id : *list)
      if (id < 0 || id >= n) throw LoadError("split references unknown id " + std::to_string(id));
  return ds;
}

std::vector<std::uint64_t> class_histogram(const std::vector<LabelGrid>& labels, int num_classes) {
  std::vector<std::uint64_t> h(num_classes, 0);
  for (const auto& g : labels)
    for (auto v : g.labels())
      if (v < num_classes) ++h[v];
  return h;
}

std::array<Real, 3> mean_color(const std::vector<ImageGrid>& images) {
  std::array<Real, 3> sum{0, 0, 0};
  std::size_t n = 0;
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixels().size(); i += 3)
      for (int c = 0; c < 3; ++c) sum[c] += img.pixels()[i + c];
    n += img.pixels().size() / 3;
  }
  if (n > 0)
    for (auto& v : sum) v /= static_cast<Real>(n);
  return sum;
}

}  // namespace synth
}  // namespace mpmclab
