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


#ifndef RRD_TRAINING_HPP_
#define RRD_TRAINING_HPP_

// Training objectives and loops.
//
// The loss builders are templates so the same graph runs in single precision
// for training and in double precision for gradient checks. Every random
// draw and discrete decision passes through an ad::Freezer, which lets a
// checker replay one forward pass with perturbed parameters.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrd/autodiff.hpp"
#include "rrd/entropy_model.hpp"
#include "rrd/freeze.hpp"
#include "rrd/model.hpp"
#include "rrd/random.hpp"
#include "rrd/sampler.hpp"

namespace rrd {

/// Per-term loss values of one iteration. The rate is in bits per pixel and
/// every squared-error term is a mean over elements, so lambda_r trades the
/// same units at any image size. `total` is the value that was
/// differentiated.
struct LossReport {
  int stage = 1;
  double lambda_r = 1.0;
  double lambda_perc = 0.5;
  double beta = kCommitmentBeta;

  double rate = 0.0;               // R(y_hat), bits per pixel
  double latent_distortion = 0.0;  // ||z_0 - z_c||^2
  double noise_estimation = 0.0;   // omega-weighted epsilon error
  double codebook = 0.0;           // ||sg(l_p) - l_hat||^2
  double commitment = 0.0;         // ||sg(l_hat) - l_p||^2
  double pixel = 0.0;              // ||x - x_hat||^2
  double perceptual = 0.0;
  double final_latent = 0.0;       // ||z_0 - z0_hat||^2
  double total = 0.0;

  /// The documented weighted sum for this report's stage.
  double weighted_sum() const;
  bool terms_valid() const;
  std::string to_json() const;
};

// ---------------------------------------------------------------------------
// Per-item helpers.

/// Multiplies batch item b of x by a[b].
template <typename S>
ad::Var<S> scale_items(const ad::Var<S>& x, const std::vector<double>& a) {
  const Shape s = x.shape();
  if (static_cast<int>(a.size()) != s.n) throw std::invalid_argument("scale_items: size");
  Tensor<S> w(s);
  const Eigen::Index per = s.size() / s.n;
  for (int b = 0; b < s.n; ++b) w.array().segment(b * per, per).setConstant(static_cast<S>(a[b]));
  return ad::mul(ad::constant(std::move(w)), x);
}

/// Steps drawn uniformly from [1, limit], one per batch item.
template <typename S>
std::vector<int> sample_steps(int batch, int limit, Rng& rng, ad::Freezer<S>& fz) {
  std::vector<int> steps(batch);
  for (int& n : steps) n = rng.uniform_int(1, limit);
  return fz.indices(std::move(steps));
}

/// Step range used by the noise-estimation term for a start mode.
inline int training_horizon(const DiffusionConfig& d) {
  return d.start == StartMode::kRelay ? d.N : d.T;
}

/// (1 / B) sum_b omega_{n_b} ||target_b - eps_hat_b||^2.
template <typename S>
ad::Var<S> omega_weighted_error(const ad::Var<S>& target, const ad::Var<S>& eps_hat,
                                const std::vector<int>& steps, const NoiseSchedule& schedule) {
  std::vector<double> w(steps.size());
  for (std::size_t b = 0; b < steps.size(); ++b) w[b] = std::sqrt(omega(schedule, steps[b]));
  const ad::Var<S> d = scale_items(target - eps_hat, w);
  return ad::scale(1.0 / static_cast<double>(steps.size()), ad::sum_squares(d));
}

/// (1 / B) sum_b ||z_0 - predict_z0(z_n, eps_hat, n_b)||^2.
template <typename S>
ad::Var<S> z0_space_error(const ad::Var<S>& z0, const ad::Var<S>& z_n, const ad::Var<S>& eps_hat,
                          const std::vector<int>& steps, const NoiseSchedule& schedule) {
  std::vector<double> inv(steps.size()), k(steps.size());
  for (std::size_t b = 0; b < steps.size(); ++b) {
    const double ab = schedule.alpha_bar(steps[b]);
    inv[b] = 1.0 / std::sqrt(ab);
    k[b] = -std::sqrt(1.0 - ab) / std::sqrt(ab);
  }
  const ad::Var<S> z0_hat = scale_items(z_n, inv) + scale_items(eps_hat, k);
  return ad::scale(1.0 / static_cast<double>(steps.size()), ad::sum_squares(z0 - z0_hat));
}

/// Conditional noise estimator with one step per batch item.
template <typename S>
using CondEstimator =
    std::function<ad::Var<S>(const ad::Var<S>&, const ad::Var<S>&, const std::vector<int>&)>;

/// Forward-noised latent and regression target of the noise-estimation term.
template <typename S>
struct NoisedLatent {
  ad::Var<S> z_n;
  ad::Var<S> target;
};

/// Relay mode: target = lambda (z_c - z_0) + noise. Pure-noise mode: target =
/// noise, i.e. the standard process that ignores z_c.
template <typename S>
NoisedLatent<S> noise_latent(const ad::Var<S>& z0, const ad::Var<S>& z_c,
                             const std::vector<int>& steps, const Tensor<S>& noise,
                             const NoiseSchedule& schedule, const RelayWeights& weights,
                             StartMode mode) {
  const ad::Var<S> eps = ad::constant(noise);
  NoisedLatent<S> r;
  r.target = mode == StartMode::kRelay ? effective_noise(z_c - z0, eps, weights) : eps;
  std::vector<double> a(steps.size()), s(steps.size());
  for (std::size_t b = 0; b < steps.size(); ++b) {
    const int limit = mode == StartMode::kRelay ? weights.N : schedule.T;
    if (steps[b] < 1 || steps[b] > limit) throw std::out_of_range("noise_latent: step out of range");
    a[b] = std::sqrt(schedule.alpha_bar(steps[b]));
    s[b] = std::sqrt(1.0 - schedule.alpha_bar(steps[b]));
  }
  r.z_n = scale_items(z0, a) + scale_items(r.target, s);
  return r;
}

/// Noise-estimation term: omega-weighted epsilon-space error of the
/// conditional estimator at the given steps.
template <typename S>
ad::Var<S> noise_estimation_loss(const ad::Var<S>& z0, const ad::Var<S>& z_c, const ad::Var<S>& c,
                                 const std::vector<int>& steps, const Tensor<S>& noise,
                                 const CondEstimator<S>& estimator, const NoiseSchedule& schedule,
                                 const RelayWeights& weights, StartMode mode = StartMode::kRelay) {
  const NoisedLatent<S> nl = noise_latent(z0, z_c, steps, noise, schedule, weights, mode);
  return omega_weighted_error(nl.target, estimator(nl.z_n, c, steps), steps, schedule);
}

// ---------------------------------------------------------------------------
// Codec forward pass in training mode.

template <typename S>
struct CodecPass {
  ad::Var<S> y;
  ad::Var<S> l_p;
  ad::Var<S> l_hat;
  std::vector<int> indices;
  ad::Var<S> hyper;
  EntropyParamsVar<S> params;
  ad::Var<S> y_hat;   // mean-centred rounding, straight-through
  ad::Var<S> rate;    // bits per pixel on the y + u branch
  CodebookLossTerms<S> cb;
  ad::Var<S> c;
  ad::Var<S> z_c;
};

template <typename S>
CodecPass<S> codec_pass(const Model<S>& m, const ad::Var<S>& z0, Rng& rng, ad::Freezer<S>& fz) {
  const Shape zs = z0.shape();
  const double pixels = static_cast<double>(zs.n) * zs.h * zs.w * Topology::kDownFactor * Topology::kDownFactor;
  CodecPass<S> p;
  p.y = m.codec.analysis(z0);
  const Shape ys = p.y.shape();
  p.l_p = m.codec.hyper_analysis(p.y);
  p.indices = fz.indices(vq_nearest(p.l_p.value(), m.codebook.entries.value()).indices);
  p.l_hat = ad::gather_rows(m.codebook.entries, p.indices, p.l_p.shape());
  p.cb = codebook_loss(p.l_p, p.l_hat, kCommitmentBeta, fz, static_cast<int>(p.l_p.value().size()));
  const ad::Var<S> l_st = straight_through(p.l_p, p.l_hat.value(), fz);
  p.hyper = m.codec.hyper_synthesis(l_st, ys.h, ys.w);

  // Anchor parameters depend on the hyper features only; quantize the
  // anchors against them, then predict the full set from the anchors.
  const EntropyParamsVar<S> anchor = m.context.predict(ad::constant(Tensor<S>(ys)), p.hyper);
  const ad::Var<S> y_anchor =
      ad::mask(straight_through(p.y, quantize_eval(p.y.value(), anchor.mu.value()), fz),
               anchor_mask<S>(ys));
  p.params = m.context.predict(y_anchor, p.hyper);
  p.y_hat = quantize_ste(p.y, p.params.mu, fz);
  const TrainQuantized<S> q{p.y_hat, p.y + ad::constant(fz.tensor(rng.uniform_tensor<S>(ys, -0.5, 0.5)))};
  p.rate = ad::scale(1.0 / pixels, ad::discretized_gaussian_bits(q.rate, p.params.mu, p.params.sigma, kProbMin));
  auto [c, z_c] = m.codec.synthesis(p.y_hat, zs.h, zs.w);
  p.c = c;
  p.z_c = z_c;
  return p;
}

template <typename S>
CondEstimator<S> cond_estimator(const Model<S>& m) {
  return [&m](const ad::Var<S>& z, const ad::Var<S>& c, const std::vector<int>& n) {
    return m.denoiser.cond(z, c, n);
  };
}

template <typename S>
struct LossResult {
  ad::Var<S> total;
  LossReport report;
};

/// Independent-step objective:
///   L_cb + R(y_hat) + lambda_r ||z_0 - z_c||^2 + lambda_r L_ne.
template <typename S>
LossResult<S> stage1_loss(const Model<S>& m, const Tensor<S>& z0_batch, double lambda_r, Rng& rng,
                          ad::Freezer<S>& fz) {
  if (!(lambda_r > 0.0)) throw std::invalid_argument("stage1_loss: lambda_r must be positive");
  const ad::Var<S> z0 = ad::constant(z0_batch);
  const int B = z0_batch.shape().n;
  const double per_item = static_cast<double>(z0_batch.size()) / B;
  CodecPass<S> p = codec_pass(m, z0, rng, fz);
  const ad::Var<S> dist = ad::mean_squares(z0 - p.z_c);
  const std::vector<int> steps = sample_steps(B, training_horizon(m.diffusion), rng, fz);
  const Tensor<S> noise = fz.tensor(rng.normal_tensor<S>(z0_batch.shape()));
  const ad::Var<S> ne =
      ad::scale(1.0 / per_item, noise_estimation_loss(z0, p.z_c, p.c, steps, noise, cond_estimator(m),
                                                      m.schedule, m.weights, m.diffusion.start));
  LossResult<S> r;
  r.total = p.cb.total + p.rate + ad::lincomb(lambda_r, dist, lambda_r, ne);
  LossReport& rep = r.report;
  rep.stage = 1;
  rep.lambda_r = lambda_r;
  rep.rate = p.rate.item();
  rep.latent_distortion = dist.item();
  rep.noise_estimation = ne.item();
  rep.codebook = p.cb.codebook.item();
  rep.commitment = p.cb.commitment.item();
  rep.total = r.total.item();
  return r;
}

/// Fixed-step objective through the unrolled L-step reconstruction:
///   lambda_r (||x - x_hat||^2 + lambda_perc P(x, x_hat)) + L_rd + L_cb
///   + lambda_r ||z_0 - z0_hat||^2,  with L_rd = R + lambda_r ||z_0 - z_c||^2.
template <typename S>
LossResult<S> stage2_loss(const Model<S>& m, const Tensor<S>& x_batch, const Tensor<S>& z0_batch,
                          double lambda_r, double lambda_perc, int L, Rng& rng,
                          ad::Freezer<S>& fz) {
  if (!(lambda_r > 0.0)) throw std::invalid_argument("stage2_loss: lambda_r must be positive");
  const ad::Var<S> z0 = ad::constant(z0_batch);
  const ad::Var<S> x = ad::constant(x_batch);
  CodecPass<S> p = codec_pass(m, z0, rng, fz);
  const ad::Var<S> dist = ad::mean_squares(z0 - p.z_c);

  const int horizon = m.horizon();
  const StepPlan plan = spaced_steps(horizon, L);
  const ad::Var<S> noise = ad::constant(fz.tensor(rng.normal_tensor<S>(z0_batch.shape())));
  const ad::Var<S> start = m.diffusion.start == StartMode::kRelay
                               ? make_start(p.z_c, m.schedule, horizon, noise)
                               : noise;
  Denoisers<ad::Var<S>> den;
  den.cond = [&m](const ad::Var<S>& z, const ad::Var<S>& c, int n) { return m.denoiser.cond(z, c, n); };
  const ad::Var<S> z0_hat = reconstruct_from(start, p.c, plan, m.schedule, den);
  const ad::Var<S> x_hat = m.ae.decode(z0_hat);

  const ad::Var<S> pixel = ad::mean_squares(x - x_hat);
  const ad::Var<S> perc = ad::scale(1.0 / static_cast<double>(x_batch.size()), m.perceptual.distance(x, x_hat));
  const ad::Var<S> fin = ad::mean_squares(z0 - z0_hat);

  LossResult<S> r;
  const ad::Var<S> l_rd = ad::lincomb(1.0, p.rate, lambda_r, dist);
  const ad::Var<S> recon = ad::lincomb(lambda_r, pixel, lambda_r * lambda_perc, perc);
  r.total = recon + l_rd + p.cb.total + ad::scale(lambda_r, fin);
  LossReport& rep = r.report;
  rep.stage = 2;
  rep.lambda_r = lambda_r;
  rep.lambda_perc = lambda_perc;
  rep.rate = p.rate.item();
  rep.latent_distortion = dist.item();
  rep.codebook = p.cb.codebook.item();
  rep.commitment = p.cb.commitment.item();
  rep.pixel = pixel.item();
  rep.perceptual = perc.item();
  rep.final_latent = fin.item();
  rep.total = r.total.item();
  return r;
}

// ---------------------------------------------------------------------------
// Loops (single precision).

/// Every constant of a training run. Serialized as versioned JSON; see
/// config.hpp.
struct TrainConfig {
  std::uint64_t seed = 1;
  Topology topology;
  DiffusionConfig diffusion;

  // Corpus.
  std::uint64_t corpus_seed = 2024;
  int train_images = 256;
  int heldout_images = 16;
  int image_size = 64;

  // Pixel autoencoder pretraining.
  int ae_iters = 3000;
  int ae_batch = 8;
  double ae_lr = 2e-3;
  double ae_target_mse = 0.01;

  // Base denoiser pretraining.
  int base_iters = 3000;
  int base_batch = 32;
  double base_lr = 1e-3;

  // Codec training.
  double lambda_r = 1.0;
  double lambda_perc = 0.5;
  int L = 2;
  int batch = 8;
  int warmup_iters = 500;  // at lambda_r = 2
  int stage1_iters = 3000;
  double stage1_lr = 1e-3;
  int stage2_iters = 600;
  double stage2_lr = 2e-4;
  double grad_clip = 1.0;
  int reseed_interval = 200;

  // Paths used by the command line driver.
  std::string output = "model.rrdc";
  std::string metrics_log;
  std::string pretrained;        // autoencoder + base checkpoint to start from
  std::string stage1_checkpoint; // required for stage 2
};

/// Receives one record per iteration.
using MetricsSink = std::function<void(const std::string& phase, long long iter,
                                       const LossReport& report, double grad_norm)>;

/// Line-delimited JSON writer for MetricsSink.
MetricsSink jsonl_sink(std::ostream& out, int every = 1);

/// Stacks single images (1, C, H, W) selected by `idx` into one batch.
Tensor<float> stack_batch(const std::vector<Tensor<float>>& items, const std::vector<int>& idx);

struct PretrainResult {
  double final_loss = 0.0;
  double heldout_mse = 0.0;
};

/// Trains the pixel autoencoder on `images`, then rescales its latents to unit
/// standard deviation over the same images.
PretrainResult pretrain_autoencoder(FloatModel& m, const std::vector<Tensor<float>>& images,
                                    const std::vector<Tensor<float>>& heldout,
                                    const TrainConfig& cfg, const MetricsSink& sink = {});

/// Standard epsilon-prediction training of the base trunk on frozen latents
/// with steps uniform on [1, T].
double pretrain_base_denoiser(FloatModel& m, const std::vector<Tensor<float>>& latents,
                              const TrainConfig& cfg, const MetricsSink& sink = {});

/// Latents of every image under the frozen autoencoder.
std::vector<Tensor<float>> encode_all(const FloatModel& m, const std::vector<Tensor<float>>& images);

/// Stage 1: `warmup_iters` at lambda_r = 2 then `stage1_iters` at the target
/// lambda_r. Stage 2: `stage2_iters` of fixed-step fine-tuning with L steps;
/// requires a model that finished stage 1. Only the codec store is updated.
void train_codec(FloatModel& m, int stage, const TrainConfig& cfg,
                 const std::vector<Tensor<float>>& images, const std::vector<Tensor<float>>& latents,
                 const MetricsSink& sink = {});

/// Fresh model for `cfg` (codec initialized from cfg.seed) that takes the
/// autoencoder and base denoiser of `pretrained`. Throws when the topology
/// or the noise schedule differs.
std::unique_ptr<FloatModel> model_from_pretrained(const FloatModel& pretrained, const TrainConfig& cfg);

/// Trains the autoencoder and the base denoiser on `train` from scratch.
std::unique_ptr<FloatModel> build_pretrained(const TrainConfig& cfg, const std::vector<Tensor<float>>& train,
                                             const std::vector<Tensor<float>>& heldout,
                                             const MetricsSink& sink, std::ostream* log);

/// The command line training job. Stage 1 starts from cfg.pretrained when
/// that file exists and otherwise pretrains (saving to cfg.pretrained if it
/// is set). Stage 2 needs cfg.stage1_checkpoint. The result is written to
/// cfg.output and returned.
std::unique_ptr<FloatModel> run_training(const TrainConfig& cfg, int stage, std::ostream& log);

}  // namespace rrd

#endif  // RRD_TRAINING_HPP_
