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

#ifndef RRD_NETWORKS_HPP_
#define RRD_NETWORKS_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrd/autodiff.hpp"
#include "rrd/nn.hpp"
#include "rrd/random.hpp"

namespace rrd {

using ad::Var;

/// Channel widths and depths of every network. Serialized into checkpoints.
struct Topology {
  int image_channels = 3;
  int ae_width = 16;
  int ae_width2 = 32;
  int latent_channels = 4;
  int codec_width = 32;
  int y_channels = 16;
  int side_channels = 8;
  int hyper_width = 32;
  int entropy_width = 32;
  int cond_channels = 32;
  int codebook_size = 512;
  int denoiser_width = 40;
  int denoiser_blocks = 3;
  int time_embed = 32;
  /// Control pathway width as a fraction of the denoiser trunk.
  double control_ratio = 0.2;

  /// Image-to-latent spatial factor: three stride-2 stages.
  static constexpr int kDownFactor = 8;

  int control_width() const {
    return std::max(1, static_cast<int>(std::lround(denoiser_width * control_ratio)));
  }
  bool operator==(const Topology&) const = default;
};

/// Toy pixel autoencoder standing in for the frozen latent-diffusion VAE.
/// Latents are multiplied by a stored scale so that they have roughly unit
/// variance over the training corpus.
template <typename S>
struct Autoencoder {
  nn::Conv2d<S> e1, e2, e3, e4;
  nn::Conv2d<S> d1, d2, d3, d4, d5;
  Var<S> latent_scale;

  Autoencoder() = default;
  Autoencoder(nn::ParamStore<S>& store, const Topology& t, Rng& rng)
      : e1(store, "enc1", t.image_channels, t.ae_width, 3, 2, rng),
        e2(store, "enc2", t.ae_width, t.ae_width2, 3, 2, rng),
        e3(store, "enc3", t.ae_width2, t.ae_width2, 3, 2, rng),
        e4(store, "enc4", t.ae_width2, t.latent_channels, 3, 1, rng, 0.5),
        d1(store, "dec1", t.latent_channels, t.ae_width2, 3, 1, rng),
        d2(store, "dec2", t.ae_width2, t.ae_width2, 3, 1, rng),
        d3(store, "dec3", t.ae_width2, t.ae_width, 3, 1, rng),
        d4(store, "dec4", t.ae_width, t.ae_width, 3, 1, rng),
        d5(store, "dec5", t.ae_width, t.image_channels, 3, 1, rng, 0.5) {
    latent_scale = store.add("latent_scale", Tensor<S>::Constant({1, 1, 1, 1}, S(1)));
  }

  /// x in [0, 1], spatial dims divisible by 8.
  Var<S> encode(const Var<S>& x) const {
    const Shape s = x.shape();
    if (s.h % Topology::kDownFactor != 0 || s.w % Topology::kDownFactor != 0) {
      throw std::invalid_argument("encode_image: dims must be divisible by 8, got " + s.str());
    }
    if (!x.value().all_finite()) throw std::invalid_argument("encode_image: non-finite input");
    Var<S> h = ad::add_scalar(ad::scale(2.0, x), -1.0);
    h = ad::silu(e1(h));
    h = ad::silu(e2(h));
    h = ad::silu(e3(h));
    return mul_scale(e4(h), false);
  }

  /// Output passes through a sigmoid so it stays inside [0, 1].
  Var<S> decode(const Var<S>& z) const {
    Var<S> h = ad::silu(d1(mul_scale(z, true)));
    h = ad::silu(d2(ad::upsample2x(h)));
    h = ad::silu(d3(ad::upsample2x(h)));
    h = ad::silu(d4(ad::upsample2x(h)));
    return ad::sigmoid(d5(h));
  }

 private:
  Var<S> mul_scale(const Var<S>& z, bool inverse) const {
    const double k = static_cast<double>(latent_scale.value()[0]);
    return ad::scale(inverse ? 1.0 / k : k, z);
  }
};

/// Analysis/synthesis transforms between the latent z_0 and the coded y, and
/// the hyper transforms producing side information l_p and the features that
/// condition the entropy parameters.
template <typename S>
struct CodecTransforms {
  nn::Conv2d<S> a1, a2, a3;
  nn::Conv2d<S> s1, s2, s_c, s_z;
  nn::Conv2d<S> ha1, ha2;
  nn::Conv2d<S> hs1, hs2;

  CodecTransforms() = default;
  CodecTransforms(nn::ParamStore<S>& store, const Topology& t, Rng& rng)
      : a1(store, "g_a1", t.latent_channels, t.codec_width, 3, 2, rng),
        a2(store, "g_a2", t.codec_width, t.codec_width, 3, 1, rng),
        a3(store, "g_a3", t.codec_width, t.y_channels, 3, 1, rng),
        s1(store, "g_s1", t.y_channels, t.codec_width, 3, 1, rng),
        s2(store, "g_s2", t.codec_width, t.codec_width, 3, 1, rng),
        s_c(store, "g_s_c", t.codec_width, t.cond_channels, 3, 1, rng),
        s_z(store, "g_s_z", t.codec_width, t.latent_channels, 3, 1, rng, 0.5),
        ha1(store, "h_a1", t.y_channels, t.hyper_width, 3, 2, rng),
        ha2(store, "h_a2", t.hyper_width, t.side_channels, 1, 1, rng),
        hs1(store, "h_s1", t.side_channels, t.hyper_width, 3, 1, rng),
        hs2(store, "h_s2", t.hyper_width, t.hyper_width, 3, 1, rng) {}

  Var<S> analysis(const Var<S>& z0) const {
    Var<S> h = ad::silu(a1(z0));
    h = ad::silu(a2(h));
    return a3(h);
  }

  /// Returns (c, z_c) at the given latent resolution.
  std::pair<Var<S>, Var<S>> synthesis(const Var<S>& y_hat, int latent_h, int latent_w) const {
    Var<S> h = ad::silu(s1(y_hat));
    h = ad::crop(ad::upsample2x(h), latent_h, latent_w);
    h = ad::silu(s2(h));
    return {s_c(h), s_z(h)};
  }

  Var<S> hyper_analysis(const Var<S>& y) const { return ha2(ad::silu(ha1(y))); }

  Var<S> hyper_synthesis(const Var<S>& l_hat, int y_h, int y_w) const {
    Var<S> h = ad::silu(hs1(l_hat));
    h = ad::crop(ad::upsample2x(h), y_h, y_w);
    return hs2(h);
  }
};

/// Noise estimator: a residual convolutional trunk with a sinusoidal time
/// embedding. denoise_base runs the trunk alone. denoise_cond adds a
/// reduced-width control branch that reads (z_n, c) and injects features into
/// every trunk block through zero-initialized pointwise convolutions.
/// The trunk lives in its own store so it can stay frozen while the control
/// branch trains.
template <typename S>
struct Denoiser {
  struct Block {
    nn::Conv2d<S> conv;
    nn::Linear<S> temb;
  };

  int embed_dim = 0;
  // Trunk.
  nn::Linear<S> t1, t2;
  nn::Conv2d<S> in, out;
  std::vector<Block> blocks;
  // Control branch.
  nn::Linear<S> ct1;
  nn::Conv2d<S> c_in_z, c_in_c;
  std::vector<Block> c_blocks;
  std::vector<nn::Conv2d<S>> inject;

  Denoiser() = default;
  Denoiser(nn::ParamStore<S>& trunk, nn::ParamStore<S>& control, const Topology& t, Rng& rng,
           bool zero_injection = true)
      : embed_dim(t.time_embed) {
    const int C = t.denoiser_width;
    const int Cc = t.control_width();
    t1 = nn::Linear<S>(trunk, "time1", t.time_embed, C, rng);
    t2 = nn::Linear<S>(trunk, "time2", C, C, rng);
    in = nn::Conv2d<S>(trunk, "in", t.latent_channels, C, 3, 1, rng);
    for (int b = 0; b < t.denoiser_blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      blocks.push_back({nn::Conv2d<S>(trunk, p + ".conv", C, C, 3, 1, rng, 0.5),
                        nn::Linear<S>(trunk, p + ".temb", C, C, rng)});
    }
    out = nn::Conv2d<S>(trunk, "out", C, t.latent_channels, 3, 1, rng, 0.5);

    ct1 = nn::Linear<S>(control, "ctrl_time", t.time_embed, Cc, rng);
    c_in_z = nn::Conv2d<S>(control, "ctrl_in_z", t.latent_channels, Cc, 3, 1, rng);
    c_in_c = nn::Conv2d<S>(control, "ctrl_in_c", t.cond_channels, Cc, 3, 1, rng);
    for (int b = 0; b < t.denoiser_blocks; ++b) {
      const std::string p = "ctrl_block" + std::to_string(b);
      c_blocks.push_back({nn::Conv2d<S>(control, p + ".conv", Cc, Cc, 3, 1, rng, 0.5),
                          nn::Linear<S>(control, p + ".temb", Cc, Cc, rng)});
      inject.push_back(nn::Conv2d<S>(control, "ctrl_inject" + std::to_string(b), Cc, C, 1, 1, rng,
                                     zero_injection ? 0.0 : 0.5));
    }
  }

  /// One step index per batch item.
  Var<S> embedding(const Shape& z_shape, const std::vector<int>& steps) const {
    if (static_cast<int>(steps.size()) != z_shape.n) {
      throw std::invalid_argument("denoiser: need one step per batch item");
    }
    for (int n : steps) {
      if (n < 0) throw std::invalid_argument("denoiser: cannot embed negative step");
    }
    return ad::constant(nn::timestep_embedding<S>(steps, embed_dim));
  }

  Var<S> base(const Var<S>& z_n, int n) const {
    return base(z_n, std::vector<int>(z_n.shape().n, n));
  }
  Var<S> base(const Var<S>& z_n, const std::vector<int>& steps) const {
    return trunk(z_n, steps, nullptr);
  }

  Var<S> cond(const Var<S>& z_n, const Var<S>& c, int n) const {
    return cond(z_n, c, std::vector<int>(z_n.shape().n, n));
  }

  Var<S> cond(const Var<S>& z_n, const Var<S>& c, const std::vector<int>& n) const {
    const Shape zs = z_n.shape();
    const Shape cs = c.shape();
    if (cs.n != zs.n || cs.h != zs.h || cs.w != zs.w) {
      throw std::invalid_argument("denoise_cond: condition " + cs.str() + " vs latent " + zs.str());
    }
    const Var<S> emb = embedding(zs, n);
    const Var<S> ct = ad::silu(ct1(emb));
    Var<S> h = c_in_z(z_n) + c_in_c(c);
    std::vector<Var<S>> injections;
    for (std::size_t b = 0; b < c_blocks.size(); ++b) {
      h = h + c_blocks[b].conv(ad::silu(ad::add_channel(h, c_blocks[b].temb(ct))));
      injections.push_back(inject[b](h));
    }
    return trunk(z_n, n, &injections);
  }

 private:
  Var<S> trunk(const Var<S>& z_n, const std::vector<int>& n,
              const std::vector<Var<S>>* injections) const {
    const Var<S> emb = embedding(z_n.shape(), n);
    const Var<S> t = ad::silu(t2(ad::silu(t1(emb))));
    Var<S> h = in(z_n);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      h = h + blocks[b].conv(ad::silu(ad::add_channel(h, blocks[b].temb(t))));
      if (injections) h = h + (*injections)[b];
    }
    return out(ad::silu(h));
  }
};

/// Fixed random convolution features standing in for a learned perceptual
/// metric. Weights are drawn from a fixed seed and never trained.
template <typename S>
struct PerceptualProxy {
  nn::Conv2d<S> f1, f2;

  PerceptualProxy() = default;
  PerceptualProxy(nn::ParamStore<S>& store, int image_channels, std::uint64_t seed = 0x9e3779b9) {
    Rng rng(seed);
    f1 = nn::Conv2d<S>(store, "feat1", image_channels, 8, 3, 2, rng);
    f2 = nn::Conv2d<S>(store, "feat2", 8, 16, 3, 2, rng);
  }

  /// Sum of squared feature differences over both layers.
  Var<S> distance(const Var<S>& x, const Var<S>& x_hat) const {
    const Var<S> a1 = ad::silu(f1(x));
    const Var<S> b1 = ad::silu(f1(x_hat));
    const Var<S> a2 = ad::silu(f2(a1));
    const Var<S> b2 = ad::silu(f2(b1));
    return ad::sum_squares(a1 - b1) + ad::sum_squares(a2 - b2);
  }
};

}  // namespace rrd

#endif  // RRD_NETWORKS_HPP_
