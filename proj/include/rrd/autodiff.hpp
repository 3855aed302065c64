// Copyright 2026 The rrd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RRD_AUTODIFF_HPP_
#define RRD_AUTODIFF_HPP_

// Tape-free reverse-mode differentiation over rrd::Tensor. Each operation
// produces a node holding its value, its parents and a closure that pushes
// the node's gradient to the parents. backward() visits the graph in reverse
// topological order. Nodes whose inputs are all constants are created
// without parents, so frozen subgraphs cost nothing on the way back.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd::ad {

template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<S>& grad_buffer() {
    if (grad.empty() && value.size() > 0) grad = Tensor<S>::Zero(value.shape());
    if (grad.shape() != value.shape()) grad = Tensor<S>::Zero(value.shape());
    return grad;
  }
  void accumulate(const Tensor<S>& g) {
    require_same_shape(g.shape(), value.shape(), "Node::accumulate");
    grad_buffer().array() += g.array();
  }
  template <typename Expr>
  void accumulate_array(const Expr& g) {
    grad_buffer().array() += g;
  }
  Node* parent(std::size_t i) const { return parents[i].get(); }
};

template <typename S>
class Var {
 public:
  using Scalar = S;
  using NodePtr = std::shared_ptr<Node<S>>;
  using Backward = std::function<void(Node<S>&)>;

  Var() = default;
  explicit Var(Tensor<S> value, bool requires_grad = false)
      : node_(std::make_shared<Node<S>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  /// Result of an operation. Parents and closure are kept only if some
  /// parent participates in differentiation.
  static Var make(Tensor<S> value, std::vector<Var> parents, Backward backward) {
    Var out(std::move(value));
    bool any = false;
    for (const Var& p : parents) any = any || p.requires_grad();
    if (any) {
      out.node_->requires_grad = true;
      for (Var& p : parents) out.node_->parents.push_back(std::move(p.node_));
      out.node_->backward = std::move(backward);
    }
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<S>& value() const { return node_->value; }
  Tensor<S>& mutable_value() { return node_->value; }
  const Tensor<S>& grad() const { return node_->grad_buffer(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad = Tensor<S>(); }
  Node<S>* node() const { return node_.get(); }
  S item() const { return node_->value[0]; }

 private:
  NodePtr node_;
};

/// Back-propagates from a single-element variable.
template <typename S>
void backward(const Var<S>& loss) {
  if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss.requires_grad()) return;
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer().array() += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <typename S>
Var<S> constant(Tensor<S> value) {
  return Var<S>(std::move(value), false);
}

template <typename S>
Var<S> detach(const Var<S>& x) {
  return Var<S>(x.value(), false);
}

// ---------------------------------------------------------------------------
// Linear algebra on whole tensors.

template <typename S>
Var<S> lincomb(double a, const Var<S>& x, double b, const Var<S>& y) {
  const S sa = static_cast<S>(a);
  const S sb = static_cast<S>(b);
  return Var<S>::make(lincomb(a, x.value(), b, y.value()), {x, y}, [sa, sb](Node<S>& self) {
    if (self.parent(0)->requires_grad) self.parent(0)->accumulate_array(sa * self.grad.array());
    if (self.parent(1)->requires_grad) self.parent(1)->accumulate_array(sb * self.grad.array());
  });
}

template <typename S>
Var<S> scale(double a, const Var<S>& x) {
  const S sa = static_cast<S>(a);
  return Var<S>::make(scale(a, x.value()), {x}, [sa](Node<S>& self) {
    self.parent(0)->accumulate_array(sa * self.grad.array());
  });
}

template <typename S>
Var<S> operator+(const Var<S>& x, const Var<S>& y) { return lincomb(1.0, x, 1.0, y); }
template <typename S>
Var<S> operator-(const Var<S>& x, const Var<S>& y) { return lincomb(1.0, x, -1.0, y); }
template <typename S>
Var<S> operator*(double a, const Var<S>& x) { return scale(a, x); }

template <typename S>
Var<S> mul(const Var<S>& x, const Var<S>& y) {
  require_same_shape(x.shape(), y.shape(), "mul");
  Tensor<S> out(x.shape(), x.value().array() * y.value().array());
  return Var<S>::make(std::move(out), {x, y}, [](Node<S>& self) {
    Node<S>* a = self.parent(0);
    Node<S>* b = self.parent(1);
    if (a->requires_grad) a->accumulate_array(self.grad.array() * b->value.array());
    if (b->requires_grad) b->accumulate_array(self.grad.array() * a->value.array());
  });
}

/// Elementwise product with a constant mask.
template <typename S>
Var<S> mask(const Var<S>& x, const Tensor<S>& m) {
  require_same_shape(x.shape(), m.shape(), "mask");
  Tensor<S> out(x.shape(), x.value().array() * m.array());
  return Var<S>::make(std::move(out), {x}, [m](Node<S>& self) {
    self.parent(0)->accumulate_array(self.grad.array() * m.array());
  });
}

/// Picks x where sel is nonzero and y elsewhere.
template <typename S>
Var<S> select(const Tensor<S>& sel, const Var<S>& x, const Var<S>& y) {
  require_same_shape(x.shape(), y.shape(), "select");
  require_same_shape(x.shape(), sel.shape(), "select");
  Tensor<S> out(x.shape(), (sel.array() != S(0)).select(x.value().array(), y.value().array()));
  return Var<S>::make(std::move(out), {x, y}, [sel](Node<S>& self) {
    const auto on = (sel.array() != S(0));
    if (self.parent(0)->requires_grad) {
      self.parent(0)->accumulate_array(on.select(self.grad.array(), S(0)));
    }
    if (self.parent(1)->requires_grad) {
      self.parent(1)->accumulate_array(on.select(S(0), self.grad.array()));
    }
  });
}

/// Forward value `target`, gradient passed unchanged to x.
template <typename S>
Var<S> straight_through(const Var<S>& x, Tensor<S> target) {
  require_same_shape(x.shape(), target.shape(), "straight_through");
  return Var<S>::make(std::move(target), {x}, [](Node<S>& self) {
    self.parent(0)->accumulate_array(self.grad.array());
  });
}

/// x (N,C,H,W) + v (N,C,1,1) broadcast over space.
template <typename S>
Var<S> add_channel(const Var<S>& x, const Var<S>& v) {
  const Shape xs = x.shape();
  const Shape vs = v.shape();
  if (vs.n != xs.n || vs.c != xs.c || vs.h != 1 || vs.w != 1) {
    throw std::invalid_argument("add_channel: expected (N,C,1,1) got " + vs.str());
  }
  Tensor<S> out = x.value();
  const Eigen::Index plane = xs.plane();
  for (int i = 0; i < xs.n * xs.c; ++i) {
    out.array().segment(i * plane, plane) += v.value()[i];
  }
  return Var<S>::make(std::move(out), {x, v}, [plane](Node<S>& self) {
    if (self.parent(0)->requires_grad) self.parent(0)->accumulate_array(self.grad.array());
    Node<S>* vn = self.parent(1);
    if (vn->requires_grad) {
      Tensor<S>& g = vn->grad_buffer();
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        g[i] += self.grad.array().segment(i * plane, plane).sum();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.

template <typename S>
Var<S> silu(const Var<S>& x) {
  const auto& a = x.value().array();
  typename Tensor<S>::Array sig = (S(1) + (-a).exp()).inverse();
  Tensor<S> out(x.shape(), a * sig);
  return Var<S>::make(std::move(out), {x}, [sig](Node<S>& self) {
    const auto& xa = self.parent(0)->value.array();
    self.parent(0)->accumulate_array(self.grad.array() * sig * (S(1) + xa * (S(1) - sig)));
  });
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  Tensor<S> out(x.shape(), (S(1) + (-x.value().array()).exp()).inverse());
  return Var<S>::make(out, {x}, [](Node<S>& self) {
    const auto& y = self.value.array();
    self.parent(0)->accumulate_array(self.grad.array() * y * (S(1) - y));
  });
}

/// log(1 + exp(x)) evaluated without overflow.
template <typename S>
Var<S> softplus(const Var<S>& x) {
  const auto& a = x.value().array();
  Tensor<S> out(x.shape(), a.max(S(0)) + (S(1) + (-a.abs()).exp()).log());
  return Var<S>::make(std::move(out), {x}, [](Node<S>& self) {
    const auto& xa = self.parent(0)->value.array();
    self.parent(0)->accumulate_array(self.grad.array() * (S(1) + (-xa).exp()).inverse());
  });
}

template <typename S>
Var<S> add_scalar(const Var<S>& x, double c) {
  Tensor<S> out(x.shape(), x.value().array() + static_cast<S>(c));
  return Var<S>::make(std::move(out), {x}, [](Node<S>& self) {
    self.parent(0)->accumulate_array(self.grad.array());
  });
}

// ---------------------------------------------------------------------------
// Reductions. Accumulation runs in double.

template <typename S>
Var<S> sum(const Var<S>& x) {
  Tensor<S> out({1, 1, 1, 1});
  out[0] = static_cast<S>(x.value().array().template cast<double>().sum());
  return Var<S>::make(std::move(out), {x}, [](Node<S>& self) {
    self.parent(0)->accumulate_array(Tensor<S>::Array::Constant(
        self.parent(0)->value.size(), self.grad[0]));
  });
}

template <typename S>
Var<S> sum_squares(const Var<S>& x) {
  Tensor<S> out({1, 1, 1, 1});
  out[0] = static_cast<S>(x.value().array().template cast<double>().square().sum());
  return Var<S>::make(std::move(out), {x}, [](Node<S>& self) {
    self.parent(0)->accumulate_array(S(2) * self.grad[0] * self.parent(0)->value.array());
  });
}

template <typename S>
Var<S> mean_squares(const Var<S>& x) {
  return scale(1.0 / static_cast<double>(x.value().size()), sum_squares(x));
}

// ---------------------------------------------------------------------------
// Spatial operations.

/// 2-D convolution, weight (Cout, Cin, k, k), bias (1, Cout, 1, 1) or
/// undefined, zero padding. Lowered to im2col + GEMM per batch element.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias, int stride,
              int pad) {
  using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw std::invalid_argument("conv2d: weight " + ws.str() + " incompatible with input " +
                                xs.str());
  }
  const int k = ws.h;
  const int cout = ws.n;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: input too small");
  const Eigen::Index K = static_cast<Eigen::Index>(xs.c) * k * k;
  const Eigen::Index P = static_cast<Eigen::Index>(ho) * wo;
  const bool pointwise = k == 1 && stride == 1 && pad == 0;

  auto im2col = [=](const S* in, MatRM& cols) {
    cols.setZero(K, P);
    for (int ci = 0; ci < xs.c; ++ci) {
      const S* plane = in + static_cast<Eigen::Index>(ci) * xs.h * xs.w;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          S* row = cols.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * P;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= xs.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= xs.w) continue;
              row[oy * wo + ox] = plane[iy * xs.w + ix];
            }
          }
        }
      }
    }
  };

  Tensor<S> out({xs.n, cout, ho, wo});
  Eigen::Map<const MatRM> W(weight.value().data(), cout, K);
  std::vector<MatRM> saved;
  if (!pointwise) saved.resize(xs.n);
  for (int b = 0; b < xs.n; ++b) {
    const S* in = x.value().data() + static_cast<Eigen::Index>(b) * xs.c * xs.h * xs.w;
    Eigen::Map<MatRM> ob(out.data() + static_cast<Eigen::Index>(b) * cout * P, cout, P);
    if (pointwise) {
      ob.noalias() = W * Eigen::Map<const MatRM>(in, K, P);
    } else {
      im2col(in, saved[b]);
      ob.noalias() = W * saved[b];
    }
    if (bias.defined()) {
      for (int co = 0; co < cout; ++co) ob.row(co).array() += bias.value()[co];
    }
  }

  std::vector<Var<S>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return Var<S>::make(
      std::move(out), std::move(parents),
      [=, saved = std::move(saved)](Node<S>& self) {
        Node<S>* xn = self.parent(0);
        Node<S>* wn = self.parent(1);
        Eigen::Map<const MatRM> Wm(wn->value.data(), cout, K);
        for (int b = 0; b < xs.n; ++b) {
          Eigen::Map<const MatRM> g(self.grad.data() + static_cast<Eigen::Index>(b) * cout * P,
                                    cout, P);
          const S* in = xn->value.data() + static_cast<Eigen::Index>(b) * xs.c * xs.h * xs.w;
          if (wn->requires_grad) {
            Eigen::Map<MatRM> gw(wn->grad_buffer().data(), cout, K);
            if (pointwise) {
              gw.noalias() += g * Eigen::Map<const MatRM>(in, K, P).transpose();
            } else {
              gw.noalias() += g * saved[b].transpose();
            }
          }
          if (has_bias && self.parent(2)->requires_grad) {
            Tensor<S>& gb = self.parent(2)->grad_buffer();
            for (int co = 0; co < cout; ++co) gb[co] += g.row(co).sum();
          }
          if (xn->requires_grad) {
            S* gx = xn->grad_buffer().data() + static_cast<Eigen::Index>(b) * xs.c * xs.h * xs.w;
            if (pointwise) {
              Eigen::Map<MatRM>(gx, K, P).noalias() += Wm.transpose() * g;
              continue;
            }
            MatRM dcols = Wm.transpose() * g;
            for (int ci = 0; ci < xs.c; ++ci) {
              S* plane = gx + static_cast<Eigen::Index>(ci) * xs.h * xs.w;
              for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                  const S* row =
                      dcols.data() + ((static_cast<Eigen::Index>(ci) * k + ky) * k + kx) * P;
                  for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= xs.h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                      const int ix = ox * stride - pad + kx;
                      if (ix < 0 || ix >= xs.w) continue;
                      plane[iy * xs.w + ix] += row[oy * wo + ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

/// Nearest-neighbour 2x upsampling.
template <typename S>
Var<S> upsample2x(const Var<S>& x) {
  const Shape s = x.shape();
  Tensor<S> out({s.n, s.c, 2 * s.h, 2 * s.w});
  for (int p = 0; p < s.n * s.c; ++p) {
    const S* in = x.value().data() + p * s.plane();
    S* o = out.data() + p * 4 * s.plane();
    for (int y = 0; y < 2 * s.h; ++y) {
      for (int xx = 0; xx < 2 * s.w; ++xx) o[y * 2 * s.w + xx] = in[(y / 2) * s.w + xx / 2];
    }
  }
  return Var<S>::make(std::move(out), {x}, [s](Node<S>& self) {
    Tensor<S>& g = self.parent(0)->grad_buffer();
    for (int p = 0; p < s.n * s.c; ++p) {
      S* gi = g.data() + p * s.plane();
      const S* go = self.grad.data() + p * 4 * s.plane();
      for (int y = 0; y < 2 * s.h; ++y) {
        for (int xx = 0; xx < 2 * s.w; ++xx) gi[(y / 2) * s.w + xx / 2] += go[y * 2 * s.w + xx];
      }
    }
  });
}

/// Keeps the top-left h x w window.
template <typename S>
Var<S> crop(const Var<S>& x, int h, int w) {
  const Shape s = x.shape();
  if (h == s.h && w == s.w) return x;
  if (h > s.h || w > s.w || h < 1 || w < 1) throw std::invalid_argument("crop: bad window");
  Tensor<S> out({s.n, s.c, h, w});
  for (int p = 0; p < s.n * s.c; ++p) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        out[(p * h + y) * w + xx] = x.value()[(p * s.h + y) * s.w + xx];
      }
    }
  }
  return Var<S>::make(std::move(out), {x}, [s, h, w](Node<S>& self) {
    Tensor<S>& g = self.parent(0)->grad_buffer();
    for (int p = 0; p < s.n * s.c; ++p) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          g[(p * s.h + y) * s.w + xx] += self.grad[(p * h + y) * w + xx];
        }
      }
    }
  });
}

template <typename S>
Var<S> concat_channels(const Var<S>& a, const Var<S>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw std::invalid_argument("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  const Eigen::Index pa = sa.c * sa.plane();
  const Eigen::Index pb = sb.c * sb.plane();
  Tensor<S> out({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    out.array().segment(n * (pa + pb), pa) = a.value().array().segment(n * pa, pa);
    out.array().segment(n * (pa + pb) + pa, pb) = b.value().array().segment(n * pb, pb);
  }
  return Var<S>::make(std::move(out), {a, b}, [=](Node<S>& self) {
    for (int n = 0; n < sa.n; ++n) {
      if (self.parent(0)->requires_grad) {
        self.parent(0)->grad_buffer().array().segment(n * pa, pa) +=
            self.grad.array().segment(n * (pa + pb), pa);
      }
      if (self.parent(1)->requires_grad) {
        self.parent(1)->grad_buffer().array().segment(n * pb, pb) +=
            self.grad.array().segment(n * (pa + pb) + pa, pb);
      }
    }
  });
}

template <typename S>
Var<S> slice_channels(const Var<S>& x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    throw std::invalid_argument("slice_channels: range outside " + s.str());
  }
  const Eigen::Index plane = s.plane();
  Tensor<S> out({s.n, count, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    out.array().segment(n * count * plane, count * plane) =
        x.value().array().segment((n * s.c + begin) * plane, count * plane);
  }
  return Var<S>::make(std::move(out), {x}, [=](Node<S>& self) {
    Tensor<S>& g = self.parent(0)->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      g.array().segment((n * s.c + begin) * plane, count * plane) +=
          self.grad.array().segment(n * count * plane, count * plane);
    }
  });
}

/// Gathers rows of table (V, d, 1, 1) into an (N, d, H, W) tensor; index i
/// of `indices` addresses spatial site (n, h, w) in row-major order.
template <typename S>
Var<S> gather_rows(const Var<S>& table, const std::vector<int>& indices, const Shape& out_shape) {
  const Shape ts = table.shape();
  if (ts.c != out_shape.c || ts.h != 1 || ts.w != 1) {
    throw std::invalid_argument("gather_rows: table " + ts.str() + " vs " + out_shape.str());
  }
  const Eigen::Index sites = static_cast<Eigen::Index>(out_shape.n) * out_shape.plane();
  if (static_cast<Eigen::Index>(indices.size()) != sites) {
    throw std::invalid_argument("gather_rows: index count mismatch");
  }
  const int d = ts.c;
  const Eigen::Index plane = out_shape.plane();
  Tensor<S> out(out_shape);
  for (Eigen::Index i = 0; i < sites; ++i) {
    const int row = indices[i];
    if (row < 0 || row >= ts.n) throw std::out_of_range("gather_rows: index out of range");
    const Eigen::Index n = i / plane;
    const Eigen::Index p = i % plane;
    for (int j = 0; j < d; ++j) out[(n * d + j) * plane + p] = table.value()[row * d + j];
  }
  return Var<S>::make(std::move(out), {table}, [=](Node<S>& self) {
    Tensor<S>& g = self.parent(0)->grad_buffer();
    for (Eigen::Index i = 0; i < sites; ++i) {
      const Eigen::Index n = i / plane;
      const Eigen::Index p = i % plane;
      for (int j = 0; j < d; ++j) g[indices[i] * d + j] += self.grad[(n * d + j) * plane + p];
    }
  });
}

// ---------------------------------------------------------------------------
// Discretized Gaussian rate.

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Probability of the unit-width bin centred at integer offset v under
/// N(0, sigma^2), computed on the lower tail for accuracy.
inline double gaussian_bin_mass(double v, double sigma) {
  const double a = std::abs(v);
  return std_normal_cdf((0.5 - a) / sigma) - std_normal_cdf((-0.5 - a) / sigma);
}

/// Total bits -sum log2 max(p, p_min) of values y under N(mu, sigma^2)
/// integrated over unit bins.
template <typename S>
Var<S> discretized_gaussian_bits(const Var<S>& y, const Var<S>& mu, const Var<S>& sigma,
                                 double p_min) {
  require_same_shape(y.shape(), mu.shape(), "discretized_gaussian_bits");
  require_same_shape(y.shape(), sigma.shape(), "discretized_gaussian_bits");
  const Eigen::Index count = y.value().size();
  Eigen::ArrayXd dv(count), ds(count);
  double total = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double v = static_cast<double>(y.value()[i]) - static_cast<double>(mu.value()[i]);
    const double s = sigma.value()[i];
    const double p = gaussian_bin_mass(v, s);
    if (p > p_min) {
      total -= std::log2(p);
      const double up = (v + 0.5) / s;
      const double lo = (v - 0.5) / s;
      const double dp_dv = (std_normal_pdf(up) - std_normal_pdf(lo)) / s;
      const double dp_ds = (-std_normal_pdf(up) * up + std_normal_pdf(lo) * lo) / s;
      const double dbits_dp = -1.0 / (p * std::numbers::ln2);
      dv[i] = dbits_dp * dp_dv;
      ds[i] = dbits_dp * dp_ds;
    } else {
      total -= std::log2(p_min);
      dv[i] = 0.0;
      ds[i] = 0.0;
    }
  }
  Tensor<S> out({1, 1, 1, 1});
  out[0] = static_cast<S>(total);
  return Var<S>::make(std::move(out), {y, mu, sigma}, [dv, ds](Node<S>& self) {
    const double g = self.grad[0];
    if (self.parent(0)->requires_grad) self.parent(0)->accumulate_array((g * dv).template cast<S>());
    if (self.parent(1)->requires_grad) self.parent(1)->accumulate_array((-g * dv).template cast<S>());
    if (self.parent(2)->requires_grad) self.parent(2)->accumulate_array((g * ds).template cast<S>());
  });
}

}  // namespace rrd::ad

#endif  // RRD_AUTODIFF_HPP_
