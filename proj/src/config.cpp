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
#include "mpmclab/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>

namespace mpmclab::train {
namespace {

using nlohmann::json;

// Reads keys of one JSON object into fields, rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path(k) + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + path(key) + "': " + e.what());
    }
  }
  void get(const char* key, synth::Rational& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    out = synth::Rational::parse(v.is_string() ? v.get<std::string>() : v.dump());
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json spec_json(const synth::DatasetSpec& s) {
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

void read_spec(const json& j, const std::string& where, synth::DatasetSpec& s) {
  Reader r(j, where);
  r.get("num_classes", s.num_classes);
  r.get("height", s.height);
  r.get("width", s.width);
  r.get("shapes_min", s.shapes_min);
  r.get("shapes_max", s.shapes_max);
  r.get("class_frequency_skew", s.class_frequency_skew);
  r.get("radius_min", s.radius_min);
  r.get("radius_max", s.radius_max);
  r.get("noise_sigma", s.noise_sigma);
  r.get("color_overlap", s.color_overlap);
  r.get("seed", s.seed);
}

json augment_json(const augment::AugmentPolicy& a) {
  return {{"flip_prob", a.flip_prob},       {"crop_scale_min", a.crop_scale_min},
          {"crop_scale_max", a.crop_scale_max}, {"jitter_prob", a.jitter_prob},
          {"jitter", a.jitter},             {"contrast", a.contrast},
          {"blur_prob", a.blur_prob},       {"blur_sigma_max", a.blur_sigma_max},
          {"cutout_count", a.cutout_count}, {"cutout_size", a.cutout_size},
          {"cutout_fill", a.cutout_fill}};
}

void read_augment(const json& j, augment::AugmentPolicy& a) {
  Reader r(j, "augment");
  r.get("flip_prob", a.flip_prob);
  r.get("crop_scale_min", a.crop_scale_min);
  r.get("crop_scale_max", a.crop_scale_max);
  r.get("jitter_prob", a.jitter_prob);
  r.get("jitter", a.jitter);
  r.get("contrast", a.contrast);
  r.get("blur_prob", a.blur_prob);
  r.get("blur_sigma_max", a.blur_sigma_max);
  r.get("cutout_count", a.cutout_count);
  r.get("cutout_size", a.cutout_size);
  r.get("cutout_fill", a.cutout_fill);
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  dataset.spec.validate();
  if (!dataset.path.empty() && !std::filesystem::exists(std::filesystem::path(dataset.path) / "manifest.json"))
    throw ConfigError("dataset.path has no manifest.json: " + dataset.path);
  if (dataset.path.empty() && (dataset.num_train < 1 || dataset.num_val < 0))
    throw ConfigError("dataset.num_train must be >= 1 and dataset.num_val >= 0");
  if (!(dataset.label_fraction.value() > 0.0 && dataset.label_fraction.value() <= 1.0))
    throw ConfigError("dataset.label_fraction must be in (0, 1]");
  seg::SegmentorSpec m = model;
  m.num_classes = dataset.spec.num_classes;
  m.validate();
  if (mpmc.enabled) mpmc_spec().validate();
  if (mpmc.patch_reduction != "sum" && mpmc.patch_reduction != "mean")
    throw ConfigError("mpmc.patch_reduction must be \"sum\" or \"mean\"");
  if (mpmc.gamma_pos < 0 || mpmc.gamma_neg < 0) throw ConfigError("focal exponents must be >= 0");
  if (!(pseudo.threshold >= 0.0 && pseudo.threshold <= 1.0)) throw ConfigError("pseudo.threshold must be in [0, 1]");
  if (pseudo.alpha < 0 || pseudo.beta < 0) throw ConfigError("pseudo.alpha and pseudo.beta must be >= 0");
  if (!(pseudo.ema_momentum >= 0.0 && pseudo.ema_momentum < 1.0))
    throw ConfigError("pseudo.ema_momentum must be in [0, 1)");
  if (pseudo.warmup_steps < 0) throw ConfigError("pseudo.warmup_steps must be >= 0");
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (optimizer.momentum < 0 || optimizer.momentum >= 1) throw ConfigError("optimizer.momentum must be in [0, 1)");
  if (optimizer.weight_decay < 0) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (optimizer.steps < 0) throw ConfigError("optimizer.steps must be >= 0");
  if (optimizer.batch_labeled < 1) throw ConfigError("optimizer.batch_labeled must be >= 1");
  if (optimizer.batch_unlabeled < 0) throw ConfigError("optimizer.batch_unlabeled must be >= 0");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("eval_every and checkpoint_every must be >= 0");
  if (eval_model != "student" && eval_model != "teacher")
    throw ConfigError("eval_model must be \"student\" or \"teacher\"");
  augment::AugmentPolicy a = augment;
  a.out_height = dataset.spec.height;
  a.out_width = dataset.spec.width;
  a.validate();
}

mpmc::MpmcSpec ExperimentConfig::mpmc_spec() const {
  mpmc::MpmcSpec s;
  s.in_channels = model.tap_channels();
  s.num_classes = dataset.spec.num_classes;
  s.scales = mpmc.scales;
  s.use_original = mpmc.use_original;
  s.hidden = mpmc.hidden;
  s.num_blocks = mpmc.blocks;
  return s;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["dataset"] = {{"path", c.dataset.path},
                  {"spec", spec_json(c.dataset.spec)},
                  {"num_train", c.dataset.num_train},
                  {"num_val", c.dataset.num_val},
                  {"label_fraction", c.dataset.label_fraction.str()},
                  {"split_seed", c.dataset.split_seed}};
  j["model"] = {{"stage_channels", c.model.stage_channels},
                {"stage_strides", c.model.stage_strides},
                {"tap_layer", c.model.tap_layer}};
  j["mpmc"] = {{"enabled", c.mpmc.enabled},         {"labeled", c.mpmc.labeled},
               {"unlabeled", c.mpmc.unlabeled},     {"scales", c.mpmc.scales},
               {"use_original", c.mpmc.use_original}, {"hidden", c.mpmc.hidden},
               {"blocks", c.mpmc.blocks},           {"gamma_pos", c.mpmc.gamma_pos},
               {"gamma_neg", c.mpmc.gamma_neg},     {"gamma_from_probs", c.mpmc.gamma_from_probs},
               {"patch_reduction", c.mpmc.patch_reduction}};
  j["pseudo"] = {{"threshold", c.pseudo.threshold},       {"alpha", c.pseudo.alpha},
                 {"beta", c.pseudo.beta},                 {"ema_momentum", c.pseudo.ema_momentum},
                 {"use_lambda_s", c.pseudo.use_lambda_s}, {"use_lambda_m", c.pseudo.use_lambda_m},
                 {"warmup_steps", c.pseudo.warmup_steps}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"momentum", c.optimizer.momentum},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"poly_power", c.optimizer.poly_power},
                    {"steps", c.optimizer.steps},
                    {"batch_labeled", c.optimizer.batch_labeled},
                    {"batch_unlabeled", c.optimizer.batch_unlabeled}};
  j["augment"] = augment_json(c.augment);
  j["eval_every"] = c.eval_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["eval_model"] = c.eval_model;
  return j;
}

ExperimentConfig from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("name", c.name);
  r.get("seed", c.seed);
  r.get("out_dir", c.out_dir);
  if (const json* d = r.child("dataset")) {
    Reader rd(*d, "dataset");
    rd.get("path", c.dataset.path);
    if (const json* s = rd.child("spec")) read_spec(*s, "dataset.spec", c.dataset.spec);
    rd.get("num_train", c.dataset.num_train);
    rd.get("num_val", c.dataset.num_val);
    rd.get("label_fraction", c.dataset.label_fraction);
    rd.get("split_seed", c.dataset.split_seed);
  }
  if (const json* m = r.child("model")) {
    Reader rm(*m, "model");
    rm.get("stage_channels", c.model.stage_channels);
    rm.get("stage_strides", c.model.stage_strides);
    rm.get("tap_layer", c.model.tap_layer);
  }
  if (const json* m = r.child("mpmc")) {
    Reader rm(*m, "mpmc");
    rm.get("enabled", c.mpmc.enabled);
    rm.get("labeled", c.mpmc.labeled);
    rm.get("unlabeled", c.mpmc.unlabeled);
    rm.get("scales", c.mpmc.scales);
    rm.get("use_original", c.mpmc.use_original);
    rm.get("hidden", c.mpmc.hidden);
    rm.get("blocks", c.mpmc.blocks);
    rm.get("gamma_pos", c.mpmc.gamma_pos);
    rm.get("gamma_neg", c.mpmc.gamma_neg);
    rm.get("gamma_from_probs", c.mpmc.gamma_from_probs);
    rm.get("patch_reduction", c.mpmc.patch_reduction);
  }
  if (const json* p = r.child("pseudo")) {
    Reader rp(*p, "pseudo");
    rp.get("threshold", c.pseudo.threshold);
    rp.get("alpha", c.pseudo.alpha);
    rp.get("beta", c.pseudo.beta);
    rp.get("ema_momentum", c.pseudo.ema_momentum);
    rp.get("use_lambda_s", c.pseudo.use_lambda_s);
    rp.get("use_lambda_m", c.pseudo.use_lambda_m);
    rp.get("warmup_steps", c.pseudo.warmup_steps);
  }
  if (const json* o = r.child("optimizer")) {
    Reader ro(*o, "optimizer");
    ro.get("lr", c.optimizer.lr);
    ro.get("momentum", c.optimizer.momentum);
    ro.get("weight_decay", c.optimizer.weight_decay);
    ro.get("poly_power", c.optimizer.poly_power);
    ro.get("steps", c.optimizer.steps);
    ro.get("batch_labeled", c.optimizer.batch_labeled);
    ro.get("batch_unlabeled", c.optimizer.batch_unlabeled);
  }
  if (const json* a = r.child("augment")) read_augment(*a, c.augment);
  r.get("eval_every", c.eval_every);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("eval_model", c.eval_model);
  c.model.num_classes = c.dataset.spec.num_classes;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override has an empty key segment: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = parse_value(assignment.substr(eq + 1));
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override descends into a non-object: " + key);
    start = dot + 1;
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out_dir");  // where results go does not change what is computed
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::vector<std::string> preset_names() { return {"default", "supplementary", "desk", "mpmc_on", "mpmc_off"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "default") return c;
  if (name == "supplementary") {
    c.name = name;
    c.pseudo.alpha = 0.25;
    c.pseudo.beta = 0.15;
    return c;
  }
  if (name == "desk" || name == "mpmc_on" || name == "mpmc_off") {
    // Short schedule sized for a single CPU core; see README for calibration.
    c.name = name;
    c.dataset.spec.height = 48;
    c.dataset.spec.width = 48;
    c.dataset.num_train = 160;
    c.dataset.num_val = 200;
    c.mpmc.hidden = 16;
    c.mpmc.patch_reduction = "mean";
    c.pseudo.ema_momentum = 0.99;
    c.optimizer.lr = 0.05;
    c.optimizer.steps = 1200;
    c.optimizer.batch_labeled = 4;
    c.optimizer.batch_unlabeled = 2;
    c.eval_every = 300;
    if (name == "mpmc_off") c.mpmc.enabled = false;
    return c;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown config preset '" + name + "' (known: " + known + ")");
}

}  // namespace mpmclab::train
