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
#ifndef MPMCLAB_TENSOR_HPP
#define MPMCLAB_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mpmclab/common.hpp"

namespace mpmclab {

/// Dense row-major tensor of Reals. Feature maps use {channels, height, width}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Real fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(std::vector<int> shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw ContractError("Tensor: data size does not match shape");
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  std::vector<Real>& storage() noexcept { return data_; }
  const std::vector<Real>& storage() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// Element access for rank-3 {c, h, w} tensors.
  Real& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  Real at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) {
                             return a * static_cast<std::size_t>(b);
                           });
  }

 private:
  std::vector<int> shape_;
  std::vector<Real> data_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace mpmclab

#endif  // MPMCLAB_TENSOR_HPP
