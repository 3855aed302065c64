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

#ifndef RRD_ENTROPY_MODEL_HPP_
#define RRD_ENTROPY_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrd/autodiff.hpp"
#include "rrd/freeze.hpp"
#include "rrd/nn.hpp"
#include "rrd/random.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

inline constexpr double kSigmaMin = 0.11;
inline constexpr double kProbMin = 1.0 / 65536.0;
inline constexpr double kCommitmentBeta = 0.25;

/// Ties go away from zero: 0.5 -> 1, -0.5 -> -1.
inline double round_half_away(double v) { return std::round(v); }

/// mu + round(y - mu), elementwise.
template <typename S>
Tensor<S> quantize_eval(const Tensor<S>& y, const Tensor<S>& mu) {
  require_same_shape(y.shape(), mu.shape(), "quantize");
  Tensor<S> out(y.shape());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out[i] = mu[i] + static_cast<S>(round_half_away(static_cast<double>(y[i]) - mu[i]));
  }
  return out;
}

/// Integer offsets round(y - mu) that the coder transmits.
template <typename S>
std::vector<std::int32_t> quantized_offsets(const Tensor<S>& y, const Tensor<S>& mu) {
  require_same_shape(y.shape(), mu.shape(), "quantized_offsets");
  std::vector<std::int32_t> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = round_half_away(static_cast<double>(y[i]) - mu[i]);
    if (!(std::abs(r) < 2147483647.0)) throw std::range_error("quantized_offsets: overflow");
    out[i] = static_cast<std::int32_t>(r);
  }
  return out;
}

/// Training-mode quantization: the decoder branch is mean-centred rounding
/// with straight-through gradient to y; the rate branch is y + u, u uniform
/// on [-0.5, 0.5).
template <typename S>
struct TrainQuantized {
  ad::Var<S> decoder;
  ad::Var<S> rate;
};

/// y + sg(target - y): forward value target, identity gradient to y.
template <typename S>
ad::Var<S> straight_through(const ad::Var<S>& y, const Tensor<S>& target, ad::Freezer<S>& fz) {
  Tensor<S> delta = fz.tensor(target - y.value());
  return y + ad::constant(std::move(delta));
}

template <typename S>
ad::Var<S> quantize_ste(const ad::Var<S>& y, const ad::Var<S>& mu, ad::Freezer<S>& fz) {
  return straight_through(y, quantize_eval(y.value(), mu.value()), fz);
}

template <typename S>
TrainQuantized<S> quantize_train(const ad::Var<S>& y, const ad::Var<S>& mu, Rng& rng,
                                 ad::Freezer<S>& fz) {
  TrainQuantized<S> q;
  q.decoder = quantize_ste(y, mu, fz);
  q.rate = y + ad::constant(fz.tensor(rng.uniform_tensor<S>(y.shape(), -0.5, 0.5)));
  return q;
}

// ---------------------------------------------------------------------------
// Vector quantization of side information.

/// Learned table of V entries of dimension d, stored as a (V, d, 1, 1)
/// parameter so gradients reach it through gather_rows.
template <typename S>
struct Codebook {
  ad::Var<S> entries;
  std::vector<std::uint64_t> usage;

  Codebook() = default;
  Codebook(nn::ParamStore<S>& store, const std::string& name, int size, int dim, Rng& rng) {
    if (size < 2) throw std::invalid_argument("Codebook: need at least 2 entries");
    entries = store.add(name, rng.normal_tensor<S>({size, dim, 1, 1}));
    usage.assign(size, 0);
  }

  int size() const { return entries.shape().n; }
  int dim() const { return entries.shape().c; }
  const S* row(int i) const { return entries.value().data() + static_cast<Eigen::Index>(i) * dim(); }

  void record_usage(const std::vector<int>& idx) {
    if (usage.size() != static_cast<std::size_t>(size())) usage.assign(size(), 0);
    for (int i : idx) ++usage[i];
  }
  void reset_usage() { usage.assign(size(), 0); }
};

template <typename S>
struct VqResult {
  std::vector<int> indices;
  Tensor<S> gathered;
};

/// Nearest entry (squared Euclidean, accumulated in double) for every
/// spatial site of an (N, d, H, W) tensor. Ties resolve to the lowest index.
template <typename S>
VqResult<S> vq_nearest(const Tensor<S>& l_p, const Tensor<S>& table) {
  const Shape ls = l_p.shape();
  const Shape ts = table.shape();
  if (ts.n < 1) throw std::invalid_argument("vq_nearest: empty codebook");
  if (ts.c != ls.c) throw std::invalid_argument("vq_nearest: vector dim mismatch");
  const int d = ls.c;
  const Eigen::Index plane = ls.plane();
  VqResult<S> r;
  r.gathered = Tensor<S>(ls);
  r.indices.resize(static_cast<std::size_t>(ls.n) * plane);
  std::vector<double> v(d);
  for (int n = 0; n < ls.n; ++n) {
    for (Eigen::Index p = 0; p < plane; ++p) {
      for (int j = 0; j < d; ++j) v[j] = l_p[(static_cast<Eigen::Index>(n) * d + j) * plane + p];
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int e = 0; e < ts.n; ++e) {
        double dist = 0.0;
        for (int j = 0; j < d; ++j) {
          const double diff = v[j] - static_cast<double>(table[static_cast<Eigen::Index>(e) * d + j]);
          dist += diff * diff;
        }
        if (dist < best_d) {
          best_d = dist;
          best = e;
        }
      }
      r.indices[n * plane + p] = best;
      for (int j = 0; j < d; ++j) {
        r.gathered[(static_cast<Eigen::Index>(n) * d + j) * plane + p] =
            table[static_cast<Eigen::Index>(best) * d + j];
      }
    }
  }
  return r;
}

/// Gathers table rows for decoded indices.
template <typename S>
Tensor<S> vq_lookup(const std::vector<int>& indices, const Tensor<S>& table, const Shape& shape) {
  return ad::gather_rows(ad::constant(table), indices, shape).value();
}

template <typename S>
struct CodebookLossTerms {
  ad::Var<S> codebook;    // ||sg(l_p) - l_hat||^2
  ad::Var<S> commitment;  // ||sg(l_hat) - l_p||^2
  ad::Var<S> total;       // codebook + beta * commitment
};

/// Both terms are summed over elements and divided by `count` (the batch
/// size for per-image sums, the element count for means).
template <typename S>
CodebookLossTerms<S> codebook_loss(const ad::Var<S>& l_p, const ad::Var<S>& l_hat, double beta,
                                   ad::Freezer<S>& fz, int count = 1) {
  require_same_shape(l_p.shape(), l_hat.shape(), "codebook_loss");
  const ad::Var<S> sg_lp = ad::constant(fz.tensor(l_p.value()));
  const ad::Var<S> sg_lhat = ad::constant(fz.tensor(l_hat.value()));
  CodebookLossTerms<S> t;
  t.codebook = ad::scale(1.0 / count, ad::sum_squares(sg_lp - l_hat));
  t.commitment = ad::scale(1.0 / count, ad::sum_squares(sg_lhat - l_p));
  t.total = ad::lincomb(1.0, t.codebook, beta, t.commitment);
  return t;
}

// ---------------------------------------------------------------------------
// Entropy parameters and rate.

template <typename S>
struct EntropyParams {
  Tensor<S> mu;
  Tensor<S> sigma;
};

/// Bits of y_hat under the discretized Gaussian with per-element (mu, sigma);
/// each bin mass is floored at p_min before the log.
template <typename S>
double rate_estimate(const Tensor<S>& y_hat, const EntropyParams<S>& p, double p_min = kProbMin) {
  require_same_shape(y_hat.shape(), p.mu.shape(), "rate_estimate");
  require_same_shape(y_hat.shape(), p.sigma.shape(), "rate_estimate");
  double bits = 0.0;
  for (Eigen::Index i = 0; i < y_hat.size(); ++i) {
    const double s = p.sigma[i];
    const double m = p.mu[i];
    if (!std::isfinite(s) || !std::isfinite(m)) throw std::invalid_argument("rate_estimate: non-finite params");
    const double mass = ad::gaussian_bin_mass(static_cast<double>(y_hat[i]) - m, s);
    bits -= std::log2(std::max(mass, p_min));
  }
  return bits;
}

/// Per-element bits, same model as rate_estimate.
template <typename S>
Tensor<double> rate_map(const Tensor<S>& y_hat, const EntropyParams<S>& p, double p_min = kProbMin) {
  Tensor<double> out(y_hat.shape());
  for (Eigen::Index i = 0; i < y_hat.size(); ++i) {
    const double mass = ad::gaussian_bin_mass(static_cast<double>(y_hat[i]) - p.mu[i], p.sigma[i]);
    out[i] = -std::log2(std::max(mass, p_min));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-pass checkerboard context.

/// 1 on anchor sites ((h + w) even), 0 elsewhere; anchors are decoded first.
template <typename S>
Tensor<S> anchor_mask(const Shape& shape) {
  Tensor<S> m(shape);
  for (int n = 0; n < shape.n; ++n)
    for (int c = 0; c < shape.c; ++c)
      for (int h = 0; h < shape.h; ++h)
        for (int w = 0; w < shape.w; ++w) m(n, c, h, w) = ((h + w) % 2 == 0) ? S(1) : S(0);
  return m;
}

inline bool is_anchor(int h, int w) { return (h + w) % 2 == 0; }

/// Zeroes every non-anchor element.
template <typename S>
Tensor<S> keep_anchors(const Tensor<S>& y) {
  Tensor<S> out = y;
  const Shape s = y.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
          if (!is_anchor(h, w)) out(n, c, h, w) = S(0);
  return out;
}

template <typename S>
struct EntropyParamsVar {
  ad::Var<S> mu;
  ad::Var<S> sigma;
  EntropyParams<S> values() const { return {mu.value(), sigma.value()}; }
};

/// Predicts (mu, sigma) for y_hat from hyper features and a checkerboard
/// context. A 3x3 convolution sees only anchor values of y_hat and its
/// output is kept only on non-anchor sites; the parameter head is
/// pointwise. Anchor parameters therefore depend on the hyper features
/// alone and non-anchor parameters on hyper features plus decoded anchors.
template <typename S>
struct CheckerboardContext {
  nn::Conv2d<S> context;
  nn::Conv2d<S> head1;
  nn::Conv2d<S> head2;
  int channels = 0;
  double sigma_min = kSigmaMin;

  CheckerboardContext() = default;
  CheckerboardContext(nn::ParamStore<S>& store, int y_channels, int hyper_channels, int width,
                      Rng& rng)
      : context(store, "context", y_channels, width, 3, 1, rng),
        head1(store, "entropy_head1", hyper_channels + width, width * 2, 1, 1, rng),
        head2(store, "entropy_head2", width * 2, 2 * y_channels, 1, 1, rng, 0.5),
        channels(y_channels) {}

  EntropyParamsVar<S> predict(const ad::Var<S>& y_hat, const ad::Var<S>& hyper) const {
    const Shape ys = y_hat.shape();
    const Tensor<S> anchors = anchor_mask<S>(ys);
    ad::Var<S> ctx = context(ad::mask(y_hat, anchors));
    Tensor<S> non_anchor(ctx.shape());
    {
      const Tensor<S> a = anchor_mask<S>(ctx.shape());
      non_anchor.array() = S(1) - a.array();
    }
    ctx = ad::mask(ctx, non_anchor);
    ad::Var<S> h = head2(ad::silu(head1(ad::concat_channels(hyper, ctx))));
    EntropyParamsVar<S> p;
    p.mu = ad::slice_channels(h, 0, channels);
    p.sigma = ad::add_scalar(ad::softplus(ad::slice_channels(h, channels, channels)), sigma_min);
    return p;
  }

  EntropyParams<S> predict(const Tensor<S>& y_hat, const Tensor<S>& hyper) const {
    return predict(ad::constant(y_hat), ad::constant(hyper)).values();
  }
};

/// Anchor sites take their parameters from the anchor-only pass, the rest
/// from the full pass. Encoder and decoder both use this combination, so the
/// coded symbols never depend on how a network rounds values it should
/// ignore.
template <typename S>
EntropyParams<S> merge_anchor_params(const EntropyParams<S>& anchor_pass,
                                     const EntropyParams<S>& full_pass) {
  EntropyParams<S> out = full_pass;
  const Shape s = out.mu.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
          if (is_anchor(h, w)) {
            out.mu(n, c, h, w) = anchor_pass.mu(n, c, h, w);
            out.sigma(n, c, h, w) = anchor_pass.sigma(n, c, h, w);
          }
  return out;
}

/// Checks the decode-order contract by perturbing every element of a random
/// y_hat and confirming that no element decoded in the same or an earlier
/// pass sees the change. Returns the number of violations.
template <typename S>
int count_causality_violations(const CheckerboardContext<S>& model, const Tensor<S>& hyper,
                               const Shape& y_shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<S> y = rng.normal_tensor<S>(y_shape);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = static_cast<S>(std::round(3.0 * y[i]));
  const EntropyParams<S> base = model.predict(y, hyper);
  auto pass = [&](Eigen::Index i) {
    const int w = static_cast<int>(i % y_shape.w);
    const int h = static_cast<int>((i / y_shape.w) % y_shape.h);
    return is_anchor(h, w) ? 0 : 1;
  };
  int violations = 0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Tensor<S> yp = y;
    yp[j] += S(7);
    const EntropyParams<S> p = model.predict(yp, hyper);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (pass(j) < pass(i)) continue;
      if (p.mu[i] != base.mu[i] || p.sigma[i] != base.sigma[i]) ++violations;
    }
  }
  return violations;
}

}  // namespace rrd

#endif  // RRD_ENTROPY_MODEL_HPP_
