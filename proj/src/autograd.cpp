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
#include "mpmclab/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mpmclab {

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << '}';
  return os.str();
}

namespace ag {
namespace {

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

void require_rank3(const Tensor& t, const char* op) {
  if (t.rank() != 3)
    throw ContractError(std::string(op) + ": expected {c,h,w} tensor, got " +
                        shape_string(t.shape()));
}

Var make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  node->requires_grad = any;
  if (any) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

// cols is {cin*k*k, ho*wo}, row-major.
void im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo, std::vector<Real>& cols) {
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  cols.assign(static_cast<std::size_t>(cin) * k * k * ho * wo, 0.0);
  std::size_t row = 0;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        Real* dst = cols.data() + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dst[oy * wo + ox] = x.at(c, iy, ix);
          }
        }
      }
}

void col2im(const Real* cols, int k, int stride, int pad, int ho, int wo, Tensor& dx) {
  const int cin = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  std::size_t row = 0;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        const Real* src = cols + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dx.at(c, iy, ix) += src[oy * wo + ox];
          }
        }
      }
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (!grad.same_shape(value)) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Real Var::item() const {
  if (value().size() != 1) throw ContractError("Var::item on non-scalar " + shape_string(shape()));
  return value()[0];
}

Var leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_rank3(xv, "conv2d");
  if (wv.rank() != 4 || wv.dim(1) != xv.dim(0) || wv.dim(2) != wv.dim(3))
    throw ContractError("conv2d: weight " + shape_string(wv.shape()) + " incompatible with input " +
                        shape_string(xv.shape()));
  if (bias.value().size() != static_cast<std::size_t>(wv.dim(0)))
    throw ContractError("conv2d: bias size mismatch");
  const int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int cout = wv.dim(0), k = wv.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ContractError("conv2d: empty output");
  const int kk = cin * k * k;
  const int n = ho * wo;

  const bool direct = (k == 1 && stride == 1 && pad == 0);
  auto cols = std::make_shared<std::vector<Real>>();
  if (!direct) im2col(xv, k, stride, pad, ho, wo, *cols);
  const Real* cols_ptr = direct ? xv.data() : cols->data();

  Tensor out({cout, ho, wo});
  MapRM o(out.data(), cout, n);
  o.noalias() = CMapRM(wv.data(), cout, kk) * CMapRM(cols_ptr, kk, n);
  for (int c = 0; c < cout; ++c) o.row(c).array() += bias.value()[c];

  auto xn = x.node(), wn = weight.node(), bn = bias.node();
  return make_node(std::move(out), {xn, wn, bn},
                   [xn, wn, bn, cols, direct, k, stride, pad, ho, wo, cout, kk, n](Node& self) {
                     CMapRM g(self.grad.data(), cout, n);
                     const Real* cp = direct ? xn->value.data() : cols->data();
                     if (wn->requires_grad) {
                       MapRM(wn->ensure_grad().data(), cout, kk).noalias() +=
                           g * CMapRM(cp, kk, n).transpose();
                     }
                     if (bn->requires_grad) {
                       Tensor& gb = bn->ensure_grad();
                       for (int c = 0; c < cout; ++c) gb[c] += g.row(c).sum();
                     }
                     if (xn->requires_grad) {
                       Tensor& gx = xn->ensure_grad();
                       CMapRM wm(wn->value.data(), cout, kk);
                       if (direct) {
                         MapRM(gx.data(), kk, n).noalias() += wm.transpose() * g;
                       } else {
                         MatRM dcols = wm.transpose() * g;
                         col2im(dcols.data(), k, stride, pad, ho, wo, gx);
                       }
                     }
                   });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn](Node& self) {
    Tensor& gx = xn->ensure_grad();
    const Tensor& xv = xn->value;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv[i] > 0.0) gx[i] += self.grad[i];
  });
}

Var avg_pool2d(const Var& x, int kernel, int stride, int pad) {
  const Tensor& xv = x.value();
  require_rank3(xv, "avg_pool2d");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ContractError("avg_pool2d: empty output");
  const Real inv = 1.0 / (static_cast<Real>(kernel) * kernel);

  // Separable box sum: rows first, then columns.
  Tensor out({c, ho, wo});
  std::vector<Real> rows(static_cast<std::size_t>(h) * wo);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y)
      for (int ox = 0; ox < wo; ++ox) {
        Real s = 0.0;
        const int x0 = ox * stride - pad;
        for (int kx = std::max(0, -x0); kx < kernel && x0 + kx < w; ++kx) s += xv.at(ch, y, x0 + kx);
        rows[static_cast<std::size_t>(y) * wo + ox] = s;
      }
    for (int oy = 0; oy < ho; ++oy) {
      const int y0 = oy * stride - pad;
      for (int ox = 0; ox < wo; ++ox) {
        Real s = 0.0;
        for (int ky = std::max(0, -y0); ky < kernel && y0 + ky < h; ++ky)
          s += rows[static_cast<std::size_t>(y0 + ky) * wo + ox];
        out.at(ch, oy, ox) = s * inv;
      }
    }
  }
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, kernel, stride, pad, ho, wo, inv](Node& self) {
    Tensor& gx = xn->ensure_grad();
    const int c = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
    std::vector<Real> rows(static_cast<std::size_t>(h) * wo);
    for (int ch = 0; ch < c; ++ch) {
      std::fill(rows.begin(), rows.end(), 0.0);
      for (int oy = 0; oy < ho; ++oy) {
        const int y0 = oy * stride - pad;
        for (int ox = 0; ox < wo; ++ox) {
          const Real g = self.grad.at(ch, oy, ox) * inv;
          for (int ky = std::max(0, -y0); ky < kernel && y0 + ky < h; ++ky)
            rows[static_cast<std::size_t>(y0 + ky) * wo + ox] += g;
        }
      }
      for (int y = 0; y < h; ++y)
        for (int ox = 0; ox < wo; ++ox) {
          const Real g = rows[static_cast<std::size_t>(y) * wo + ox];
          const int x0 = ox * stride - pad;
          for (int kx = std::max(0, -x0); kx < kernel && x0 + kx < w; ++kx) gx.at(ch, y, x0 + kx) += g;
        }
    }
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const int h = parts[0].value().dim(1), w = parts[0].value().dim(2);
  int total = 0;
  for (const auto& p : parts) {
    require_rank3(p.value(), "concat_channels");
    if (p.value().dim(1) != h || p.value().dim(2) != w)
      throw ContractError("concat_channels: spatial mismatch");
    total += p.value().dim(0);
  }
  Tensor out({total, h, w});
  std::vector<std::shared_ptr<Node>> parents;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(), out.storage().begin() + offset);
    offset += p.value().size();
    parents.push_back(p.node());
  }
  return make_node(std::move(out), parents, [parents](Node& self) {
    std::size_t off = 0;
    for (const auto& p : parents) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

namespace {

struct Tap {
  int i0, i1;
  Real w0, w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const Real ratio = static_cast<Real>(in) / out;
  for (int o = 0; o < out; ++o) {
    Real src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const Real f = src - i0;
    taps[o] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear(const Var& x, int out_h, int out_w) {
  const Tensor& xv = x.value();
  require_rank3(xv, "upsample_bilinear");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h == out_h && w == out_w) return x;
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx) {
        const Tap& a = ty[y];
        const Tap& b = tx[xx];
        out.at(ch, y, xx) = a.w0 * (b.w0 * xv.at(ch, a.i0, b.i0) + b.w1 * xv.at(ch, a.i0, b.i1)) +
                            a.w1 * (b.w0 * xv.at(ch, a.i1, b.i0) + b.w1 * xv.at(ch, a.i1, b.i1));
      }
  auto xn = x.node();
  return make_node(std::move(out), {xn}, [xn, ty, tx, out_h, out_w](Node& self) {
    Tensor& gx = xn->ensure_grad();
    const int c = gx.dim(0);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < out_h; ++y)
        for (int xx = 0; xx < out_w; ++xx) {
          const Real g = self.grad.at(ch, y, xx);
          const Tap& a = ty[y];
          const Tap& b = tx[xx];
          gx.at(ch, a.i0, b.i0) += g * a.w0 * b.w0;
          gx.at(ch, a.i0, b.i1) += g * a.w0 * b.w1;
          gx.at(ch, a.i1, b.i0) += g * a.w1 * b.w0;
          gx.at(ch, a.i1, b.i1) += g * a.w1 * b.w1;
        }
  });
}

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value()))
    throw ContractError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var scale(const Var& a, Real factor) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= factor;
  auto an = a.node();
  return make_node(std::move(out), {an}, [an, factor](Node& self) {
    Tensor& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var custom_scalar(std::span<const Var> inputs, Real value, std::vector<Tensor> grads) {
  if (grads.size() != inputs.size()) throw ContractError("custom_scalar: one gradient per input required");
  std::vector<std::shared_ptr<Node>> parents;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!grads[i].same_shape(inputs[i].value()))
      throw ContractError("custom_scalar: gradient shape mismatch");
    parents.push_back(inputs[i].node());
  }
  auto g = std::make_shared<std::vector<Tensor>>(std::move(grads));
  return make_node(Tensor({1}, value), parents, [parents, g](Node& self) {
    const Real up = self.grad[0];
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (!parents[i]->requires_grad) continue;
      Tensor& dst = parents[i]->ensure_grad();
      const Tensor& src = (*g)[i];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += up * src[j];
    }
  });
}

void backward(const Var& root) {
  if (root.value().size() != 1) throw ContractError("backward: root must be scalar");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological ordering.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && !p->parents.empty() && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->ensure_grad();
    if (n->backward) n->backward(*n);
  }
}

}  // namespace ag
}  // namespace mpmclab
