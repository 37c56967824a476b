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
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "mpmclab/gradcheck.hpp"
#include "mpmclab/params.hpp"
#include "mpmclab/segmodel.hpp"

using namespace mpmclab;

namespace {

ag::Var mean_of(const ag::Var& v) {
  const Real n = static_cast<Real>(v.value().size());
  Real s = 0;
  for (Real x : v.value().storage()) s += x;
  const std::vector<ag::Var> in{v};
  std::vector<Tensor> g{Tensor(v.shape(), 1.0 / n)};
  return ag::custom_scalar(in, s / n, std::move(g));
}

}  // namespace

TEST_CASE("zeroed decoder gives a uniform softmax") {
  seg::SegmentorSpec spec;
  auto p = seg::init_params(spec, 3);
  seg::zero_head(p);
  Rng rng(1);
  const auto out = seg::seg_forward(spec, bind(p, false), ag::constant(fixture::random_image(32, 32, rng).to_tensor()));
  for (Real v : out.logits.value().storage()) REQUIRE(v == 0.0);
}

TEST_CASE("tap feature map size follows the cumulative stride") {
  seg::SegmentorSpec spec;
  spec.tap_layer = 1;
  REQUIRE(spec.cumulative_stride(1) == 4);
  const auto p = seg::init_params(spec, 3);
  const auto out = seg::seg_forward(spec, bind(p, false), ag::constant(Tensor({3, 64, 64}, 0.5)));
  CHECK(out.tap.shape() == std::vector<int>{32, 16, 16});
  CHECK(out.logits.shape() == std::vector<int>{4, 64, 64});
  CHECK(seg::tap_forward(spec, bind(p, false), ag::constant(Tensor({3, 64, 64}, 0.5))).shape() == out.tap.shape());
}

TEST_CASE("spec validation and shape errors") {
  seg::SegmentorSpec spec;
  spec.tap_layer = 3;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.tap_layer = 0;
  CHECK_THROWS_AS(spec.validate(33, 32), ConfigError);
  const auto p = seg::init_params(spec, 1);
  CHECK_THROWS_AS(seg::seg_forward(spec, bind(p, false), ag::constant(Tensor({3, 30, 32}))), ContractError);
  CHECK_THROWS_AS(seg::seg_forward(spec, bind(p, false), ag::constant(Tensor({1, 32, 32}))), ContractError);
}

TEST_CASE("mean-logit gradient matches central differences") {
  const auto spec = fixture::tiny_seg();
  const auto base = seg::init_params(spec, 5);
  Rng rng(2);
  const auto img = fixture::random_image(16, 16, rng).to_tensor();
  Objective obj;
  obj.value = [&](std::span<const Real> x) {
    ParamSet p = base;
    p.unflatten(x);
    return mean_of(seg::seg_forward(spec, bind(p, false), ag::constant(img)).logits).item();
  };
  obj.gradient = [&](std::span<const Real> x) {
    ParamSet p = base;
    p.unflatten(x);
    const auto b = bind(p, true);
    ag::backward(mean_of(seg::seg_forward(spec, b, ag::constant(img)).logits));
    return gradients(p, b).flatten();
  };
  const auto x = base.flatten();
  const auto coords = sample_coords(x.size(), 3, 9);
  CHECK(finite_difference_check(obj, x, 1e-4, coords).max_rel_error < 1e-3);
}

TEST_CASE("receptive-field recurrence base cases") {
  const seg::RfLayer one[] = {{3, 1, 1}};
  CHECK(seg::rf_geometry(one) == seg::RfGeometry{1, 3, -1});
  const seg::RfLayer two[] = {{3, 1, 1}, {3, 1, 1}, {2, 2, 0}};
  const auto g = seg::rf_geometry(two);
  CHECK(g.rf_size == 6);
  CHECK(g.stride == 2);
  CHECK(g.offset == -2);
}

TEST_CASE("analytic geometry matches the gradient footprint of every shipped spec") {
  for (const auto& spec : fixture::shipped_specs()) {
    const auto g = seg::rf_geometry(spec);
    const int H = 64, W = 64, h = H / g.stride, w = W / g.stride;
    for (auto [i, j] : {std::pair{h / 2, w / 2}, std::pair{0, 0}, std::pair{h - 1, w - 1}, std::pair{1, w - 2}}) {
      const auto f = oracle::gradient_footprint(spec, H, W, i, j);
      CAPTURE(spec.tap_layer);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(f.dense);
      CHECK(f.y0 == std::max(0, i * g.stride + g.offset));
      CHECK(f.y1 == std::min(H - 1, i * g.stride + g.offset + g.rf_size - 1));
      CHECK(f.x0 == std::max(0, j * g.stride + g.offset));
      CHECK(f.x1 == std::min(W - 1, j * g.stride + g.offset + g.rf_size - 1));
    }
  }
}

TEST_CASE("ema update") {
  const auto student = seg::init_params(fixture::tiny_seg(), 1);
  auto teacher = seg::init_params(fixture::tiny_seg(), 2);
  const auto t0 = teacher;

  auto copy = teacher;
  ema_update(copy, student, 0.0);
  CHECK(copy == student);
  CHECK_THROWS_AS(ema_update(copy, student, 1.0), ConfigError);
  CHECK_THROWS_AS(ema_update(copy, student, -0.1), ConfigError);
  CHECK_THROWS_AS(ema_update(copy, seg::init_params(seg::SegmentorSpec{}, 1), 0.5), ContractError);

  // Constant student: (teacher - student) shrinks by m per step.
  const double m = 0.9;
  const int k = 12;
  for (int s = 0; s < k; ++s) ema_update(teacher, student, m);
  const auto a = teacher.flatten(), s0 = student.flatten(), b = t0.flatten();
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a[i] - s0[i] == doctest::Approx(std::pow(m, k) * (b[i] - s0[i])).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("student backward leaves teacher parameters untouched") {
  const auto spec = fixture::tiny_seg();
  const auto student = seg::init_params(spec, 1);
  const auto teacher = seg::init_params(spec, 1);
  const auto before = teacher;
  Rng rng(3);
  const auto img = ag::constant(fixture::random_image(16, 16, rng).to_tensor());
  const auto tb = bind(teacher, false);
  const auto sb = bind(student, true);
  const auto tout = seg::seg_forward(spec, tb, img);
  const auto sout = seg::seg_forward(spec, sb, img);
  CHECK_FALSE(tout.logits.requires_grad());
  ag::backward(mean_of(sout.logits));
  CHECK(teacher == before);
  for (const auto& v : tb) CHECK_FALSE(v.requires_grad());
  for (Real g : gradients(student, sb).flatten()) REQUIRE(std::isfinite(g));
}

TEST_CASE("checkpoint round trip is exact") {
  Checkpoint c;
  c.meta = {{"step", 7}, {"note", "x"}};
  c.groups["seg"] = seg::init_params(fixture::tiny_seg(), 4);
  c.groups["empty"] = ParamSet{};
  const auto path = fixture::scratch_dir("ckpt") / "c.bin";
  save_checkpoint(c, path);
  const auto back = load_checkpoint(path);
  CHECK(back.meta.at("step") == 7);
  CHECK(back.groups.at("seg") == c.groups.at("seg"));
  CHECK(back.groups.at("empty").count() == 0);
  std::ofstream(path, std::ios::trunc) << "garbage";
  CHECK_THROWS_AS(load_checkpoint(path), LoadError);
}
