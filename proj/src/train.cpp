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
#include "mpmclab/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mpmclab/augment.hpp"
#include "mpmclab/logging.hpp"
#include "mpmclab/pseudo.hpp"

namespace mpmclab::train {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kLabeledTag = 0x1AB;
constexpr std::uint64_t kUnlabeledTag = 0x2AB;
constexpr int kCheckpointVersion = 1;

seg::SegmentorSpec make_seg_spec(const ExperimentConfig& cfg, const synth::Dataset& d) {
  seg::SegmentorSpec s = cfg.model;
  s.in_channels = 3;
  s.num_classes = d.num_classes();
  s.validate(d.spec.height, d.spec.width);
  return s;
}

ExperimentConfig adopt_dataset(ExperimentConfig cfg, const synth::Dataset& d) {
  cfg.dataset.spec = d.spec;
  cfg.model.num_classes = d.num_classes();
  return cfg;
}

LabelGrid argmax_labels(const Tensor& logits) {
  const int C = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  LabelGrid out(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (logits.at(c, y, x) > logits.at(best, y, x)) best = c;
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

void sgd(ParamSet& p, ParamSet& v, const ParamSet& g, double lr, double momentum, double wd) {
  for (std::size_t i = 0; i < p.count(); ++i) {
    auto& pv = p.tensors[i].storage();
    auto& vv = v.tensors[i].storage();
    const auto& gv = g.tensors[i].values();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      vv[k] = momentum * vv[k] + gv[k] + wd * pv[k];
      pv[k] -= lr * vv[k];
    }
  }
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double denum(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> denums(const json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(denum(x));
  return v;
}

json record_json(const RunRecord& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({s.step, s.lr, s.sup, s.sup_ml, s.unsup, s.unsup_ml, s.total, s.mask_pixels});
  json evals = json::array();
  for (const auto& e : r.evals)
    evals.push_back({{"step", e.step},
                     {"miou", num(e.miou)},
                     {"mdice", num(e.mdice)},
                     {"pixel_accuracy", num(e.pixel_accuracy)},
                     {"class_iou", nums(e.class_iou)},
                     {"hamming", num(e.hamming)},
                     {"energy_tp", num(e.energy_tp)},
                     {"energy_fn", num(e.energy_fn)},
                     {"energy_separated", num(e.energy_separated)},
                     {"instance_accuracy", nums(e.instance_accuracy)}});
  return {{"config_hash", r.config_hash}, {"steps", steps}, {"evals", evals}, {"wall_seconds", r.wall_seconds}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& s : j.at("steps")) {
    StepLosses l;
    l.step = s[0].get<int>();
    l.lr = s[1].get<double>();
    l.sup = s[2].get<double>();
    l.sup_ml = s[3].get<double>();
    l.unsup = s[4].get<double>();
    l.unsup_ml = s[5].get<double>();
    l.total = s[6].get<double>();
    l.mask_pixels = s[7].get<std::size_t>();
    r.steps.push_back(l);
  }
  for (const auto& e : j.at("evals")) {
    EvalMetrics m;
    m.step = e.at("step").get<int>();
    m.miou = denum(e.at("miou"));
    m.mdice = denum(e.at("mdice"));
    m.pixel_accuracy = denum(e.at("pixel_accuracy"));
    m.class_iou = denums(e.at("class_iou"));
    m.hamming = denum(e.at("hamming"));
    m.energy_tp = denum(e.at("energy_tp"));
    m.energy_fn = denum(e.at("energy_fn"));
    m.energy_separated = denum(e.at("energy_separated"));
    m.instance_accuracy = denums(e.at("instance_accuracy"));
    r.evals.push_back(std::move(m));
  }
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw LoadError("cannot write " + p.string());
  out << text;
}

}  // namespace

synth::Dataset prepare_dataset(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.path.empty()) return synth::generate_dataset(d.spec, d.num_train, d.num_val, d.label_fraction, d.split_seed);
  synth::Dataset data = synth::load_dataset(d.path);
  if (!(data.split.label_fraction == d.label_fraction)) {
    const int num_train = static_cast<int>(data.split.labeled_ids.size() + data.split.unlabeled_ids.size());
    const int num_val = static_cast<int>(data.split.val_ids.size());
    data.split = synth::make_splits(num_train, d.label_fraction, d.split_seed, num_val);
  }
  return data;
}

Trainer::Trainer(ExperimentConfig cfg, synth::Dataset data)
    : cfg_(adopt_dataset(std::move(cfg), data)),
      data_(std::move(data)),
      seg_spec_(make_seg_spec(cfg_, data_)),
      grid_(seg::rf_geometry(seg_spec_), data_.spec.height, data_.spec.width) {
  cfg_.validate();
  if (data_.split.labeled_ids.empty()) throw ConfigError("dataset has no labeled images");
  policy_ = cfg_.augment;
  policy_.out_height = data_.spec.height;
  policy_.out_width = data_.spec.width;
  {
    // Cutout fills with the training-set mean color.
    std::vector<ImageGrid> train_images;
    for (int id : data_.split.labeled_ids) train_images.push_back(data_.images[id]);
    for (int id : data_.split.unlabeled_ids) train_images.push_back(data_.images[id]);
    policy_.cutout_fill = synth::mean_color(train_images);
  }
  state_.student_seg = seg::init_params(seg_spec_, derive_seed(cfg_.seed, {0x5E6}));
  if (cfg_.mpmc.enabled) {
    mpmc_spec_ = cfg_.mpmc_spec();
    const int fh = data_.spec.height / grid_.geometry.stride, fw = data_.spec.width / grid_.geometry.stride;
    for (int k : mpmc_spec_.scales)
      if (k > fh || k > fw)
        throw ConfigError("mpmc scale " + std::to_string(k) + " exceeds the " + std::to_string(fh) + "x" +
                          std::to_string(fw) + " tap feature map");
    state_.student_mpmc = mpmc::init_params(mpmc_spec_, derive_seed(cfg_.seed, {0x3C}));
  }
  state_.teacher_seg = state_.student_seg;
  state_.teacher_mpmc = state_.student_mpmc;
  state_.velocity_seg = state_.student_seg.zeros_like();
  state_.velocity_mpmc = state_.student_mpmc.zeros_like();
  record_.config_hash = config_hash(cfg_);
}

StepLosses Trainer::step() {
  const auto& o = cfg_.optimizer;
  const auto& ps = cfg_.pseudo;
  const int t = state_.step;
  const int C = data_.num_classes();
  const int H = data_.spec.height, W = data_.spec.width;
  StepLosses sl;
  sl.step = t;
  sl.lr = o.steps > 0 ? o.lr * std::pow(std::max(0.0, 1.0 - static_cast<double>(t) / o.steps), o.poly_power) : o.lr;

  const auto bs = bind(state_.student_seg, true);
  const auto bm = bind(state_.student_mpmc, true);
  const bool ml_l = cfg_.mpmc_labeled(), ml_u = cfg_.mpmc_unlabeled();
  const double patch_scale = cfg_.mpmc.patch_reduction == "mean" ? 1.0 / grid_.count() : 1.0;
  const mpmc::FocalParams fp{cfg_.mpmc.gamma_pos, cfg_.mpmc.gamma_neg};

  // Labeled branch: weak view, pixel CE and patch multi-label supervision.
  std::vector<ag::Var> seg_l, ml_l_logits;
  std::vector<LabelGrid> labels;
  std::vector<patches::PatchLabelMatrix> targets;
  {
    const auto& ids = data_.split.labeled_ids;
    Rng rng(derive_seed(cfg_.seed, {static_cast<std::uint64_t>(t), kLabeledTag}));
    for (int b = 0; b < o.batch_labeled; ++b) {
      const int id = ids[rng.below(ids.size())];
      const auto w = augment::weak_augment(data_.images[id], data_.labels[id], policy_, rng.next_u64());
      const auto out = seg::seg_forward(seg_spec_, bs, ag::constant(w.image.to_tensor()));
      seg_l.push_back(out.logits);
      labels.push_back(*w.label);
      if (ml_l) {
        ml_l_logits.push_back(mpmc::mpmc_forward(mpmc_spec_, bm, out.tap));
        targets.push_back(patches::patch_targets(*w.label, grid_, C));
      }
    }
  }
  const ag::Var sup = pseudo::supervised_seg_loss(seg_l, labels);
  ag::Var sup_ml;
  if (ml_l) sup_ml = ag::scale(mpmc::labeled_multilabel_loss(ml_l_logits, targets, fp), patch_scale);

  // Unlabeled branch: teacher on the weak view, student on the strong view.
  ag::Var unsup, unsup_ml;
  const auto& uids = data_.split.unlabeled_ids;
  if (cfg_.unsupervised_active() && !uids.empty() && t >= ps.warmup_steps) {
    Rng rng(derive_seed(cfg_.seed, {static_cast<std::uint64_t>(t), kUnlabeledTag}));
    std::vector<ag::Var> seg_u, ml_u_logits;
    std::vector<pseudo::PseudoBatch> pbs;
    std::vector<std::vector<Real>> lambda_s, lambda_m;
    std::vector<mpmc::MpmcOutput> teacher_q;
    for (int b = 0; b < o.batch_unlabeled; ++b) {
      const int id = uids[rng.below(uids.size())];
      const std::uint64_t weak_seed = rng.next_u64(), strong_seed = rng.next_u64();
      const auto weak = augment::weak_augment(data_.images[id], std::nullopt, policy_, weak_seed);
      auto teacher = pseudo::teacher_infer(seg_spec_, state_.teacher_seg, ml_u ? &mpmc_spec_ : nullptr,
                                           ml_u ? &state_.teacher_mpmc : nullptr, weak.image.to_tensor(),
                                           ps.threshold);
      const auto strong = augment::strong_augment(weak.image, policy_, strong_seed);
      const auto out = seg::seg_forward(seg_spec_, bs, ag::constant(strong.image.to_tensor()));
      auto wm = ml_u ? pseudo::build_weight_maps(teacher.pseudo, *teacher.mpmc, grid_, cfg_.mpmc.gamma_from_probs)
                     : pseudo::unit_weight_maps(H, W, grid_.count(), C);
      if (!ps.use_lambda_s) std::fill(wm.lambda_s.begin(), wm.lambda_s.end(), 1.0);
      if (!ps.use_lambda_m) std::fill(wm.lambda_m.begin(), wm.lambda_m.end(), 1.0);
      sl.mask_pixels += teacher.pseudo.mask_count();
      seg_u.push_back(out.logits);
      lambda_s.push_back(std::move(wm.lambda_s));
      pbs.push_back(std::move(teacher.pseudo));
      if (ml_u) {
        ml_u_logits.push_back(mpmc::mpmc_forward(mpmc_spec_, bm, out.tap));
        teacher_q.push_back(std::move(*teacher.mpmc));
        lambda_m.push_back(std::move(wm.lambda_m));
      }
    }
    // An empty mask is common early on; skip the term rather than warn per step.
    if (sl.mask_pixels > 0) unsup = pseudo::unsup_seg_loss(seg_u, pbs, lambda_s);
    if (ml_u) unsup_ml = ag::scale(pseudo::unsup_multilabel_loss(teacher_q, ml_u_logits, lambda_m), patch_scale);
  }

  const ag::Var total = pseudo::total_loss(sup, sup_ml, unsup, unsup_ml, ps.alpha, ps.beta);
  sl.sup = sup.item();
  sl.sup_ml = sup_ml.defined() ? sup_ml.item() : 0.0;
  sl.unsup = unsup.defined() ? unsup.item() : 0.0;
  sl.unsup_ml = unsup_ml.defined() ? unsup_ml.item() : 0.0;
  sl.total = total.item();

  ag::backward(total);
  const ParamSet gs = gradients(state_.student_seg, bs);
  const ParamSet gm = gradients(state_.student_mpmc, bm);
  sgd(state_.student_seg, state_.velocity_seg, gs, sl.lr, o.momentum, o.weight_decay);
  sgd(state_.student_mpmc, state_.velocity_mpmc, gm, sl.lr, o.momentum, o.weight_decay);
  ema_update(state_.teacher_seg, state_.student_seg, ps.ema_momentum);
  if (state_.teacher_mpmc.count()) ema_update(state_.teacher_mpmc, state_.student_mpmc, ps.ema_momentum);
  ++state_.step;
  record_.steps.push_back(sl);
  return sl;
}

EvalDetail Trainer::evaluate(bool keep_details) const {
  const bool use_teacher = cfg_.eval_model == "teacher";
  const auto bs = bind(use_teacher ? state_.teacher_seg : state_.student_seg, false);
  const auto bm = bind(use_teacher ? state_.teacher_mpmc : state_.student_mpmc, false);
  const int C = data_.num_classes();
  metrics::ConfusionAccumulator conf(C);
  metrics::InstanceSizeAccuracy inst;
  metrics::EnergyAccumulator energy(C);
  double ham_sum = 0;
  std::size_t ham_n = 0;
  EvalDetail d;
  for (int id : data_.split.val_ids) {
    const auto out = seg::seg_forward(seg_spec_, bs, ag::constant(data_.images[id].to_tensor()));
    LabelGrid pred = argmax_labels(out.logits.value());
    const LabelGrid& gt = data_.labels[id];
    conf.add(pred, gt);
    inst.add(pred, gt);
    if (cfg_.mpmc.enabled) {
      auto q = mpmc::to_output(mpmc::mpmc_forward(mpmc_spec_, bm, out.tap).value());
      const auto tg = patches::patch_targets(gt, grid_, C);
      const auto ham = metrics::hamming_accuracy(metrics::threshold_probs(q), tg);
      for (int r = 0; r < tg.num_patches; ++r)
        if (!tg.excluded[r]) {
          ham_sum += ham[r];
          ++ham_n;
        }
      energy.add(pred, gt, q, grid_);
      if (keep_details) d.mpmc.push_back(std::move(q));
    }
    if (keep_details) {
      d.ids.push_back(id);
      d.predictions.push_back(std::move(pred));
    }
  }
  auto& m = d.metrics;
  m.step = state_.step;
  const auto sc = conf.scores();
  m.miou = sc.mean_iou;
  m.mdice = sc.mean_dice;
  m.class_iou = sc.iou;
  m.pixel_accuracy = conf.pixel_accuracy();
  for (std::size_t b = 0; b < metrics::InstanceSizeAccuracy::kEdges.size(); ++b)
    m.instance_accuracy.push_back(inst.accuracy(b));
  m.hamming = m.energy_tp = m.energy_fn = m.energy_separated = kNaN;
  if (cfg_.mpmc.enabled) {
    d.energy = energy.report();
    m.hamming = ham_n ? ham_sum / static_cast<double>(ham_n) : kNaN;
    double tp = 0, fn = 0;
    int n = 0;
    for (const auto& c : d.energy.classes)
      if (c.tp_count && c.fn_count) {
        tp += c.tp_mean;
        fn += c.fn_mean;
        ++n;
      }
    if (n) {
      m.energy_tp = tp / n;
      m.energy_fn = fn / n;
      m.energy_separated = d.energy.separated_fraction();
    }
  }
  return d;
}

void Trainer::export_features(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const bool use_teacher = cfg_.eval_model == "teacher";
  const auto bs = bind(use_teacher ? state_.teacher_seg : state_.student_seg, false);
  std::ofstream bin(dir / "features.bin", std::ios::binary);
  if (!bin) throw LoadError("cannot write " + (dir / "features.bin").string());
  std::ostringstream index;
  index << "id,offset,channels,height,width\n";
  std::size_t offset = 0;
  for (int id : data_.split.val_ids) {
    const auto out = seg::seg_forward(seg_spec_, bs, ag::constant(data_.images[id].to_tensor()));
    const Tensor& f = out.last.value();
    bin.write(reinterpret_cast<const char*>(f.values().data()),
              static_cast<std::streamsize>(f.size() * sizeof(Real)));
    index << id << ',' << offset << ',' << f.dim(0) << ',' << f.dim(1) << ',' << f.dim(2) << '\n';
    offset += f.size();
  }
  write_text(dir / "features.csv", index.str());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.meta = {{"format", "mpmclab.checkpoint"},
            {"version", kCheckpointVersion},
            {"step", state_.step},
            {"config", to_json(cfg_)},
            {"rng", {{"seed", cfg_.seed}, {"scheme", "per-step streams derived from (seed, step, tag)"}}},
            {"record", record_json(record_)}};
  c.groups["student_seg"] = state_.student_seg;
  c.groups["student_mpmc"] = state_.student_mpmc;
  c.groups["teacher_seg"] = state_.teacher_seg;
  c.groups["teacher_mpmc"] = state_.teacher_mpmc;
  c.groups["velocity_seg"] = state_.velocity_seg;
  c.groups["velocity_mpmc"] = state_.velocity_mpmc;
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (c.meta.value("format", "") != "mpmclab.checkpoint") throw LoadError("not a training checkpoint");
  RunRecord rec = record_from_json(c.meta.at("record"));
  if (rec.config_hash != record_.config_hash)
    throw ConfigError("checkpoint config hash " + rec.config_hash + " does not match " + record_.config_hash);
  TrainState s;
  s.step = c.meta.at("step").get<int>();
  auto group = [&](const char* name, const ParamSet& like) {
    const auto it = c.groups.find(name);
    if (it == c.groups.end()) throw LoadError(std::string("checkpoint lacks group ") + name);
    if (!it->second.same_structure(like)) throw LoadError(std::string("checkpoint group ") + name + " has wrong shape");
    return it->second;
  };
  s.student_seg = group("student_seg", state_.student_seg);
  s.student_mpmc = group("student_mpmc", state_.student_mpmc);
  s.teacher_seg = group("teacher_seg", state_.teacher_seg);
  s.teacher_mpmc = group("teacher_mpmc", state_.teacher_mpmc);
  s.velocity_seg = group("velocity_seg", state_.velocity_seg);
  s.velocity_mpmc = group("velocity_mpmc", state_.velocity_mpmc);
  state_ = std::move(s);
  record_ = std::move(rec);
}

void Trainer::event(const nlohmann::json& e) const {
  if (cfg_.out_dir.empty()) return;
  std::ofstream out(std::filesystem::path(cfg_.out_dir) / "events.jsonl", std::ios::app);
  out << e.dump() << '\n';
}

void Trainer::run() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path out_dir = cfg_.out_dir;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "config.json", to_json(cfg_).dump(2) + "\n");
  }
  event({{"event", "start"}, {"step", state_.step}, {"config_hash", record_.config_hash}});
  auto save = [&] {
    if (out_dir.empty()) return;
    save_checkpoint(checkpoint(), out_dir / "checkpoint.bin");
    event({{"event", "checkpoint"}, {"step", state_.step}});
  };
  auto do_eval = [&] {
    record_.evals.push_back(evaluate(false).metrics);
    const auto& m = record_.evals.back();
    event({{"event", "eval"}, {"step", m.step}, {"miou", num(m.miou)}, {"hamming", num(m.hamming)}});
  };
  const int steps = cfg_.optimizer.steps;
  while (state_.step < steps) {
    try {
      step();
    } catch (const TrainingAbort& e) {
      record_.aborted = true;
      record_.abort_component = e.component();
      log::error(std::string("training aborted at step ") + std::to_string(state_.step) + ": " + e.what());
      event({{"event", "abort"}, {"step", state_.step}, {"component", e.component()}});
      break;
    }
    if (cfg_.eval_every > 0 && state_.step % cfg_.eval_every == 0 && state_.step < steps) do_eval();
    if (cfg_.checkpoint_every > 0 && state_.step % cfg_.checkpoint_every == 0 && state_.step < steps) save();
  }
  if (!record_.aborted) {
    if (record_.evals.empty() || record_.evals.back().step != state_.step) do_eval();
    save();
  }
  record_.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs();
  event({{"event", "end"}, {"step", state_.step}, {"aborted", record_.aborted}});
}

void Trainer::write_outputs() const {
  if (cfg_.out_dir.empty()) return;
  const std::filesystem::path dir = cfg_.out_dir;
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", to_json(cfg_).dump(2) + "\n");
  write_text(dir / "losses.csv", losses_csv(record_));
  write_text(dir / "metrics.csv", metrics_csv(record_));
  json manifest = {{"format", "mpmclab.run"},
                   {"version", 1},
                   {"name", cfg_.name},
                   {"config_hash", record_.config_hash},
                   {"steps_completed", state_.step},
                   {"aborted", record_.aborted},
                   {"abort_component", record_.abort_component},
                   {"wall_seconds", record_.wall_seconds},
                   {"files", {"config.json", "losses.csv", "metrics.csv", "events.jsonl", "checkpoint.bin"}}};
  if (!record_.evals.empty()) {
    const auto& m = record_.evals.back();
    manifest["final"] = {{"miou", num(m.miou)}, {"mdice", num(m.mdice)}, {"hamming", num(m.hamming)}};
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

RunRecord train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& resume_from) {
  cfg.validate();
  Trainer trainer(cfg, prepare_dataset(cfg));
  if (resume_from) trainer.restore(load_checkpoint(*resume_from));
  trainer.run();
  return trainer.record();
}

std::vector<metrics::BinRow> ab_bin_table(const EvalDetail& a, const EvalDetail& b, const std::vector<LabelGrid>& gt,
                                          const patches::PatchGrid& grid, int num_classes) {
  if (a.predictions.size() != gt.size() || b.predictions.size() != gt.size() || a.mpmc.size() != gt.size())
    throw ContractError("ab_bin_table: runs must carry details for the same val images");
  if (a.ids != b.ids) throw ContractError("ab_bin_table: runs were evaluated on different images");
  std::vector<double> hamming, delta;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto tg = patches::patch_targets(gt[i], grid, num_classes);
    const auto ham = metrics::hamming_accuracy(metrics::threshold_probs(a.mpmc[i]), tg);
    const auto ta = metrics::tile_miou(a.predictions[i], gt[i], grid, num_classes);
    const auto tb = metrics::tile_miou(b.predictions[i], gt[i], grid, num_classes);
    for (int r = 0; r < tg.num_patches; ++r) {
      hamming.push_back(tg.excluded[r] ? kNaN : ham[r]);
      delta.push_back(ta[r] - tb[r]);
    }
  }
  return metrics::patch_bin_analysis(hamming, delta);
}

std::string bin_table_csv(const std::vector<metrics::BinRow>& rows) {
  std::ostringstream os;
  os << "1 - hamming loss";
  for (const auto& r : rows) os << ',' << r.label;
  os << "\n% patches";
  for (const auto& r : rows) os << ',' << fmt(100.0 * r.fraction);
  os << "\navg mIoU delta";
  for (const auto& r : rows) os << ',' << (r.empty() ? std::string("empty") : fmt(100.0 * r.mean_delta));
  os << "\npatch count";
  for (const auto& r : rows) os << ',' << r.count;
  os << '\n';
  return os.str();
}

std::string losses_csv(const RunRecord& r) {
  std::ostringstream os;
  os << "step,lr,L_l,L^M_l,L_u,L^M_u,total,mask_pixels\n";
  for (const auto& s : r.steps)
    os << s.step << ',' << fmt(s.lr) << ',' << fmt(s.sup) << ',' << fmt(s.sup_ml) << ',' << fmt(s.unsup) << ','
       << fmt(s.unsup_ml) << ',' << fmt(s.total) << ',' << s.mask_pixels << '\n';
  return os.str();
}

std::string metrics_csv(const RunRecord& r) {
  std::ostringstream os;
  os << "step,metric,value\n";
  auto row = [&os](int step, const std::string& name, double v) {
    if (std::isfinite(v)) os << step << ',' << name << ',' << fmt(v) << '\n';
  };
  for (const auto& e : r.evals) {
    row(e.step, "miou", e.miou);
    row(e.step, "mdice", e.mdice);
    row(e.step, "pixel_accuracy", e.pixel_accuracy);
    for (std::size_t c = 0; c < e.class_iou.size(); ++c) row(e.step, "iou_c" + std::to_string(c), e.class_iou[c]);
    row(e.step, "hamming", e.hamming);
    row(e.step, "energy_tp", e.energy_tp);
    row(e.step, "energy_fn", e.energy_fn);
    row(e.step, "energy_separated", e.energy_separated);
    for (std::size_t b = 0; b < e.instance_accuracy.size(); ++b)
      row(e.step, "instance_accuracy_" + metrics::InstanceSizeAccuracy::bin_label(b), e.instance_accuracy[b]);
  }
  return os.str();
}

}  // namespace mpmclab::train
