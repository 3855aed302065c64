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

#ifndef RRD_MODEL_HPP_
#define RRD_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rrd/entropy_model.hpp"
#include "rrd/networks.hpp"
#include "rrd/sampler.hpp"
#include "rrd/schedule.hpp"

namespace rrd {

/// Diffusion settings shared by training and decoding.
struct DiffusionConfig {
  int T = 1000;
  BetaKind kind = BetaKind::kScaledLinear;
  double beta_start = 0.00085;
  double beta_end = 0.012;
  int N = 300;
  StartMode start = StartMode::kRelay;
  bool operator==(const DiffusionConfig&) const = default;
};

std::string to_string(StartMode mode);
StartMode parse_start_mode(const std::string& name);

/// Every network of the codec plus its schedule. Parameters are grouped in
/// four stores: the pixel autoencoder, the base denoiser trunk, the codec
/// (transforms, codebook, context model, control branch) and the fixed
/// perceptual proxy. Non-copyable and non-movable; hold it by pointer.
template <typename S>
struct Model {
  Topology topo;
  DiffusionConfig diffusion;
  NoiseSchedule schedule;
  RelayWeights weights;

  nn::ParamStore<S> ae_store{"ae"};
  nn::ParamStore<S> base_store{"base"};
  nn::ParamStore<S> codec_store{"codec"};
  nn::ParamStore<S> perc_store{"perc"};

  Autoencoder<S> ae;
  CodecTransforms<S> codec;
  Codebook<S> codebook;
  CheckerboardContext<S> context;
  Denoiser<S> denoiser;
  PerceptualProxy<S> perceptual;

  /// 0: untrained codec, 1: after independent training, 2: after fine-tuning.
  int stage = 0;
  double lambda_r = 1.0;
  std::uint64_t config_hash = 0;

  Model(const Topology& t, const DiffusionConfig& d, std::uint64_t seed,
        bool zero_injection = true)
      : topo(t), diffusion(d) {
    schedule = build_schedule(d.T, d.kind, d.beta_start, d.beta_end);
    weights = relay_weights(schedule, d.N);
    Rng rng(seed);
    ae = Autoencoder<S>(ae_store, t, rng);
    denoiser = Denoiser<S>(base_store, codec_store, t, rng, zero_injection);
    codec = CodecTransforms<S>(codec_store, t, rng);
    codebook = Codebook<S>(codec_store, "codebook", t.codebook_size, t.side_channels, rng);
    context = CheckerboardContext<S>(codec_store, t.y_channels, t.hyper_width, t.entropy_width, rng);
    perceptual = PerceptualProxy<S>(perc_store, t.image_channels);
    perc_store.set_trainable(false);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  std::vector<nn::ParamStore<S>*> stores() {
    return {&ae_store, &base_store, &codec_store, &perc_store};
  }
  std::vector<const nn::ParamStore<S>*> stores() const {
    return {&ae_store, &base_store, &codec_store, &perc_store};
  }

  /// Steps at which the reverse chain starts for this model's start mode.
  int horizon() const { return diffusion.start == StartMode::kRelay ? diffusion.N : diffusion.T; }

  template <typename T>
  void copy_parameters_from(const Model<T>& other) {
    ae_store.copy_values_from(other.ae_store);
    base_store.copy_values_from(other.base_store);
    codec_store.copy_values_from(other.codec_store);
    perc_store.copy_values_from(other.perc_store);
    stage = other.stage;
    lambda_r = other.lambda_r;
  }

  /// Freezes everything except the codec store.
  void freeze_for_codec_training() {
    ae_store.set_trainable(false);
    base_store.set_trainable(false);
    codec_store.set_trainable(true);
    perc_store.set_trainable(false);
  }

  // -------------------------------------------------------------------------
  // Evaluation-mode helpers on plain tensors.

  Tensor<S> encode_image(const Tensor<S>& x) const { return ae.encode(ad::constant(x)).value(); }
  Tensor<S> decode_latent(const Tensor<S>& z) const { return ae.decode(ad::constant(z)).value(); }
  Tensor<S> analysis(const Tensor<S>& z0) const { return codec.analysis(ad::constant(z0)).value(); }
  std::pair<Tensor<S>, Tensor<S>> synthesis(const Tensor<S>& y_hat, int latent_h,
                                            int latent_w) const {
    auto [c, z] = codec.synthesis(ad::constant(y_hat), latent_h, latent_w);
    return {c.value(), z.value()};
  }
  Tensor<S> denoise_cond(const Tensor<S>& z_n, const Tensor<S>& c, int n) const {
    return denoiser.cond(ad::constant(z_n), ad::constant(c), n).value();
  }
  Tensor<S> denoise_base(const Tensor<S>& z_n, int n) const {
    return denoiser.base(ad::constant(z_n), n).value();
  }

  Denoisers<Tensor<S>> denoisers() const {
    Denoisers<Tensor<S>> d;
    d.cond = [this](const Tensor<S>& z, const Tensor<S>& c, int n) { return denoise_cond(z, c, n); };
    d.base = [this](const Tensor<S>& z, int n) { return denoise_base(z, n); };
    return d;
  }
};

/// Latent description of one image as produced on the encoder side and
/// reproduced on the decoder side.
template <typename S>
struct LatentCode {
  Tensor<S> z0;                   // encoder side only
  Tensor<S> y;                    // encoder side only
  std::vector<int> vq_indices;
  Tensor<S> l_hat;
  Tensor<S> hyper;
  EntropyParams<S> params;
  std::vector<std::int32_t> offsets;  // round(y - mu), NCHW order
  Tensor<S> y_hat;
};

/// Spatial sizes of every stage for a padded image.
struct LatentGeometry {
  int latent_h = 0, latent_w = 0;
  int y_h = 0, y_w = 0;
  int side_h = 0, side_w = 0;

  static LatentGeometry for_image(int padded_h, int padded_w) {
    LatentGeometry g;
    g.latent_h = padded_h / Topology::kDownFactor;
    g.latent_w = padded_w / Topology::kDownFactor;
    g.y_h = (g.latent_h + 1) / 2;
    g.y_w = (g.latent_w + 1) / 2;
    g.side_h = (g.y_h + 1) / 2;
    g.side_w = (g.y_w + 1) / 2;
    return g;
  }
};

/// Encoder-side analysis in evaluation mode: z_0 -> y -> l_p -> VQ -> hyper
/// features -> two-pass checkerboard parameters with mean-centred rounding.
template <typename S>
LatentCode<S> analyze_latent(const Model<S>& m, const Tensor<S>& z0) {
  LatentCode<S> code;
  code.z0 = z0;
  code.y = m.analysis(z0);
  const Tensor<S> l_p = m.codec.hyper_analysis(ad::constant(code.y)).value();
  VqResult<S> vq = vq_nearest(l_p, m.codebook.entries.value());
  code.vq_indices = std::move(vq.indices);
  code.l_hat = std::move(vq.gathered);
  code.hyper =
      m.codec.hyper_synthesis(ad::constant(code.l_hat), code.y.shape().h, code.y.shape().w).value();
  const EntropyParams<S> anchors = m.context.predict(Tensor<S>(code.y.shape()), code.hyper);
  const Tensor<S> y_anchor = keep_anchors(quantize_eval(code.y, anchors.mu));
  code.params = merge_anchor_params(anchors, m.context.predict(y_anchor, code.hyper));
  code.offsets = quantized_offsets(code.y, code.params.mu);
  code.y_hat = Tensor<S>(code.y.shape());
  for (Eigen::Index i = 0; i < code.y.size(); ++i) {
    code.y_hat[i] = code.params.mu[i] + static_cast<S>(code.offsets[i]);
  }
  return code;
}

// ---------------------------------------------------------------------------
// Checkpoints (single precision models).

using FloatModel = Model<float>;

/// Binary checkpoint; see docs/FORMATS.md for the exact layout.
void save_checkpoint(const std::string& path, const FloatModel& model);
std::unique_ptr<FloatModel> load_checkpoint(const std::string& path);

/// FNV-1a 64 over the topology descriptor and every parameter's bytes.
std::uint64_t model_hash(const FloatModel& model);

std::string topology_json(const Topology& t, const DiffusionConfig& d);

}  // namespace rrd

#endif  // RRD_MODEL_HPP_
