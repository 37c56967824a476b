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
#include "mpmclab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mpmclab/rng.hpp"

namespace mpmclab {

GradCheckReport finite_difference_check(const Objective& objective, std::span<const Real> params, Real eps,
                                        std::span<const std::size_t> coords, Real abs_floor) {
  std::vector<Real> x(params.begin(), params.end());
  const std::vector<Real> grad = objective.gradient(x);
  if (grad.size() != x.size()) throw ContractError("finite_difference_check: gradient size mismatch");
  GradCheckReport report;
  for (std::size_t i : coords) {
    if (i >= x.size()) throw ContractError("finite_difference_check: coordinate out of range");
    const Real orig = x[i];
    x[i] = orig + eps;
    const Real fp = objective.value(x);
    x[i] = orig - eps;
    const Real fm = objective.value(x);
    x[i] = orig;
    const Real numeric = (fp - fm) / (2 * eps);
    const Real a = grad[i];
    const Real scale = std::max({std::abs(a), std::abs(numeric), abs_floor});
    const Real err = (std::abs(a) < abs_floor && std::abs(numeric) < abs_floor) ? 0.0 : std::abs(a - numeric) / scale;
    report.coords.push_back({i, a, numeric, err});
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  return report;
}

std::vector<std::size_t> sample_coords(std::size_t n, std::size_t k, std::uint64_t seed) {
  k = std::min(k, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, {0xFD}));
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace mpmclab
