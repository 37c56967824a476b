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
#ifndef MPMCLAB_GRADCHECK_HPP
#define MPMCLAB_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mpmclab/common.hpp"

namespace mpmclab {

/// A scalar objective over a flat parameter vector with its analytic gradient.
struct Objective {
  std::function<Real(std::span<const Real>)> value;
  std::function<std::vector<Real>(std::span<const Real>)> gradient;
};

struct CoordError {
  std::size_t index;
  Real analytic;
  Real numeric;
  Real rel_error;
};

struct GradCheckReport {
  Real max_rel_error = 0.0;
  std::vector<CoordError> coords;
};

/// Central differences (f(x+e) - f(x-e)) / 2e at each sampled coordinate,
/// compared with the analytic gradient at x. Relative error is
/// |a - n| / max(|a|, |n|, abs_floor); coordinates where both magnitudes are
/// below abs_floor count as exact.
GradCheckReport finite_difference_check(const Objective& objective, std::span<const Real> params, Real eps,
                                        std::span<const std::size_t> coords, Real abs_floor = 1e-8);

/// k distinct coordinates in [0, n), deterministic in seed.
std::vector<std::size_t> sample_coords(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace mpmclab

#endif  // MPMCLAB_GRADCHECK_HPP
