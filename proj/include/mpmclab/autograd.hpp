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
#ifndef MPMCLAB_AUTOGRAD_HPP
#define MPMCLAB_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mpmclab/tensor.hpp"

// Minimal reverse-mode differentiation over rank-3 {c, h, w} feature maps.
// Every op records a backward closure only when one of its inputs requires a
// gradient, so teacher inference builds no tape.
namespace mpmclab::ag {

struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  /// Gradient accumulated by backward(); zero tensor if none reached this node.
  const Tensor& grad() const { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  Real item() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var leaf(Tensor value, bool requires_grad);
inline Var constant(Tensor value) { return leaf(std::move(value), false); }

/// 2-D convolution. x {cin,h,w}, weight {cout,cin,k,k}, bias {cout}.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var relu(const Var& x);
/// Average pooling; the divisor is always k*k (zero padding counts).
Var avg_pool2d(const Var& x, int kernel, int stride, int pad);
Var concat_channels(std::span<const Var> parts);
/// Bilinear resize with half-pixel centers (align_corners = false).
Var upsample_bilinear(const Var& x, int out_h, int out_w);
Var add(const Var& a, const Var& b);
Var scale(const Var& a, Real factor);

/// Scalar node whose value and input gradients are supplied by the caller.
/// grads[i] must match inputs[i]'s shape; it is d(value)/d(inputs[i]).
Var custom_scalar(std::span<const Var> inputs, Real value, std::vector<Tensor> grads);

/// Runs reverse accumulation from a scalar root with seed gradient 1.
void backward(const Var& root);

}  // namespace mpmclab::ag

#endif  // MPMCLAB_AUTOGRAD_HPP
