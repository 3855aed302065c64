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


#include "rrd/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rrd/config.hpp"
#include "rrd/corpus.hpp"

namespace rrd {
namespace {

// Cosine decay from lr to 0.1 lr over `total` iterations.
double cosine_lr(double lr, long long it, long long total) {
  if (total <= 1) return lr;
  const double t = static_cast<double>(it) / static_cast<double>(total - 1);
  return lr * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

std::vector<int> draw_batch(Rng& rng, int count, int batch) {
  if (count <= 0) throw std::invalid_argument("training: empty corpus");
  std::vector<int> idx(batch);
  for (int& i : idx) i = rng.uniform_int(0, count - 1);
  return idx;
}

void only_trainable(FloatModel& m, nn::ParamStore<float>* store) {
  for (nn::ParamStore<float>* s : m.stores()) s->set_trainable(s == store);
}

void require_finite(const LossReport& r, const std::string& phase, long long it) {
  if (!std::isfinite(r.total) || !r.terms_valid()) {
    throw std::runtime_error("non-finite loss in " + phase + " at iteration " +
                             std::to_string(it) + ": " + r.to_json());
  }
}

}  // namespace

double LossReport::weighted_sum() const {
  switch (stage) {
    case 1:
      return codebook + beta * commitment + rate + lambda_r * (latent_distortion + noise_estimation);
    case 2:
      return lambda_r * (pixel + lambda_perc * perceptual) + rate + lambda_r * latent_distortion +
             codebook + beta * commitment + lambda_r * final_latent;
    default:
      return pixel + noise_estimation;
  }
}

bool LossReport::terms_valid() const {
  for (double v : {rate, latent_distortion, noise_estimation, codebook, commitment, pixel,
                   perceptual, final_latent}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

std::string LossReport::to_json() const {
  nlohmann::json j;
  j["stage"] = stage;
  j["lambda_r"] = lambda_r;
  j["rate"] = rate;
  j["latent_distortion"] = latent_distortion;
  j["noise_estimation"] = noise_estimation;
  j["codebook"] = codebook;
  j["commitment"] = commitment;
  j["pixel"] = pixel;
  j["perceptual"] = perceptual;
  j["final_latent"] = final_latent;
  j["total"] = total;
  return j.dump();
}

MetricsSink jsonl_sink(std::ostream& out, int every) {
  return [&out, every](const std::string& phase, long long iter, const LossReport& r,
                       double grad_norm) {
    if (every > 1 && iter % every != 0) return;
    nlohmann::json j = nlohmann::json::parse(r.to_json());
    j["phase"] = phase;
    j["iter"] = iter;
    j["grad_norm"] = grad_norm;
    out << j.dump() << '\n';
  };
}

Tensor<float> stack_batch(const std::vector<Tensor<float>>& items, const std::vector<int>& idx) {
  if (idx.empty()) throw std::invalid_argument("stack_batch: empty selection");
  const Shape one = items.at(idx[0]).shape();
  if (one.n != 1) throw std::invalid_argument("stack_batch: items must have batch 1");
  Tensor<float> out({static_cast<int>(idx.size()), one.c, one.h, one.w});
  const Eigen::Index per = one.size();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor<float>& t = items.at(idx[b]);
    require_same_shape(t.shape(), one, "stack_batch");
    out.array().segment(static_cast<Eigen::Index>(b) * per, per) = t.array();
  }
  return out;
}

std::vector<Tensor<float>> encode_all(const FloatModel& m, const std::vector<Tensor<float>>& images) {
  std::vector<Tensor<float>> out;
  out.reserve(images.size());
  for (const Tensor<float>& x : images) out.push_back(m.encode_image(x));
  return out;
}

PretrainResult pretrain_autoencoder(FloatModel& m, const std::vector<Tensor<float>>& images,
                                    const std::vector<Tensor<float>>& heldout,
                                    const TrainConfig& cfg, const MetricsSink& sink) {
  only_trainable(m, &m.ae_store);
  nn::Adam<float> opt({&m.ae_store}, {cfg.ae_lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 11);
  PretrainResult res;
  double smooth = 0.0;
  for (int it = 0; it < cfg.ae_iters; ++it) {
    opt.set_lr(cosine_lr(cfg.ae_lr, it, cfg.ae_iters));
    const Tensor<float> x = stack_batch(images, draw_batch(rng, static_cast<int>(images.size()), cfg.ae_batch));
    const ad::Var<float> xv = ad::constant(x);
    const ad::Var<float> loss =
        ad::scale(1.0 / cfg.ae_batch, ad::sum_squares(xv - m.ae.decode(m.ae.encode(xv))));
    LossReport r;
    r.stage = 0;
    r.pixel = loss.item();
    r.total = r.pixel;
    require_finite(r, "autoencoder", it);
    opt.zero_grad();
    ad::backward(loss);
    const double norm = opt.clip_grad_norm(1e6);
    opt.step();
    smooth = it == 0 ? r.total : 0.98 * smooth + 0.02 * r.total;
    if (sink) sink("ae", it, r, norm);
  }
  res.final_loss = smooth;

  // Unit-variance latents over the training images.
  double sum = 0.0, sq = 0.0;
  long long count = 0;
  for (const Tensor<float>& x : images) {
    const Tensor<float> z = m.encode_image(x);
    sum += z.array().cast<double>().sum();
    sq += z.array().cast<double>().square().sum();
    count += z.size();
  }
  const double mean = sum / count;
  const double stdev = std::sqrt(std::max(sq / count - mean * mean, 1e-12));
  m.ae.latent_scale.mutable_value()[0] =
      static_cast<float>(m.ae.latent_scale.value()[0] / stdev);

  double err = 0.0;
  for (const Tensor<float>& x : heldout) {
    const Tensor<float> r = m.decode_latent(m.encode_image(x));
    err += (x.array() - r.array()).cast<double>().square().mean();
  }
  res.heldout_mse = heldout.empty() ? 0.0 : err / heldout.size();
  m.ae_store.set_trainable(false);
  return res;
}

double pretrain_base_denoiser(FloatModel& m, const std::vector<Tensor<float>>& latents,
                              const TrainConfig& cfg, const MetricsSink& sink) {
  only_trainable(m, &m.base_store);
  nn::Adam<float> opt({&m.base_store}, {cfg.base_lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 23);
  ad::Freezer<float> live;
  double smooth = 0.0;
  for (int it = 0; it < cfg.base_iters; ++it) {
    opt.set_lr(cosine_lr(cfg.base_lr, it, cfg.base_iters));
    const Tensor<float> z0 =
        stack_batch(latents, draw_batch(rng, static_cast<int>(latents.size()), cfg.base_batch));
    const std::vector<int> steps = sample_steps(cfg.base_batch, m.schedule.T, rng, live);
    const Tensor<float> noise = rng.normal_tensor<float>(z0.shape());
    const ad::Var<float> zero = ad::constant(z0);
    const NoisedLatent<float> nl =
        noise_latent(zero, zero, steps, noise, m.schedule, m.weights, StartMode::kPureNoise);
    const ad::Var<float> loss =
        ad::scale(1.0 / cfg.base_batch, ad::sum_squares(nl.target - m.denoiser.base(nl.z_n, steps)));
    LossReport r;
    r.stage = 0;
    r.noise_estimation = loss.item();
    r.total = r.noise_estimation;
    require_finite(r, "base denoiser", it);
    opt.zero_grad();
    ad::backward(loss);
    const double norm = opt.clip_grad_norm(cfg.grad_clip * 10.0);
    opt.step();
    smooth = it == 0 ? r.total : 0.98 * smooth + 0.02 * r.total;
    if (sink) sink("base", it, r, norm);
  }
  m.base_store.set_trainable(false);
  return smooth;
}

namespace {

// Replaces entries unused since the last reset with l_p vectors of the
// current batch (plus a small jitter) and clears their optimizer moments.
void reseed_dead_entries(FloatModel& m, nn::Adam<float>& opt, const Tensor<float>& l_p, Rng& rng) {
  Codebook<float>& cb = m.codebook;
  const Shape s = l_p.shape();
  const int d = s.c;
  const Eigen::Index plane = s.plane();
  const int vectors = static_cast<int>(s.n * plane);
  for (int e = 0; e < cb.size(); ++e) {
    if (cb.usage[e] != 0) continue;
    const int v = rng.uniform_int(0, vectors - 1);
    const int n = v / static_cast<int>(plane);
    const Eigen::Index p = v % plane;
    float* row = cb.entries.mutable_value().data() + static_cast<Eigen::Index>(e) * d;
    for (int j = 0; j < d; ++j) {
      row[j] = l_p[(static_cast<Eigen::Index>(n) * d + j) * plane + p] +
               static_cast<float>(0.01 * rng.normal());
    }
    opt.reset_rows(cb.entries, static_cast<Eigen::Index>(e) * d, d);
  }
  cb.reset_usage();
}

}  // namespace

void train_codec(FloatModel& m, int stage, const TrainConfig& cfg,
                 const std::vector<Tensor<float>>& images, const std::vector<Tensor<float>>& latents,
                 const MetricsSink& sink) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("train_codec: stage must be 1 or 2");
  if (stage == 2 && m.stage < 1) {
    throw std::logic_error("stage 2 requires a checkpoint that completed stage 1");
  }
  if (!(cfg.lambda_r > 0.0)) throw std::invalid_argument("train_codec: lambda_r must be positive");
  if (cfg.L < 1) throw std::invalid_argument("train_codec: L must be >= 1");
  if (images.size() != latents.size()) throw std::invalid_argument("train_codec: corpus mismatch");

  m.freeze_for_codec_training();
  const double lr = stage == 1 ? cfg.stage1_lr : cfg.stage2_lr;
  nn::Adam<float> opt({&m.codec_store}, {lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 37 + stage);
  const long long total = stage == 1 ? cfg.warmup_iters + cfg.stage1_iters : cfg.stage2_iters;
  const std::string phase = stage == 1 ? "stage1" : "stage2";
  m.codebook.reset_usage();
  const int count = static_cast<int>(latents.size());

  for (long long it = 0; it < total; ++it) {
    opt.set_lr(cosine_lr(lr, it, total));
    const std::vector<int> idx = draw_batch(rng, count, cfg.batch);
    const Tensor<float> z0 = stack_batch(latents, idx);
    ad::Freezer<float> live;
    LossResult<float> r;
    if (stage == 1) {
      const double lambda = it < cfg.warmup_iters ? 2.0 : cfg.lambda_r;
      r = stage1_loss(m, z0, lambda, rng, live);
    } else {
      r = stage2_loss(m, stack_batch(images, idx), z0, cfg.lambda_r, cfg.lambda_perc, cfg.L, rng,
                      live);
    }
    require_finite(r.report, phase, it);
    opt.zero_grad();
    ad::backward(r.total);
    const double norm = opt.clip_grad_norm(cfg.grad_clip);
    opt.step();
    if (!m.codec_store.all_finite()) {
      throw std::runtime_error("non-finite parameters after " + phase + " iteration " +
                               std::to_string(it));
    }

    if (stage == 1 && cfg.reseed_interval > 0) {
      const Tensor<float> y = m.analysis(z0);
      const Tensor<float> l_p = m.codec.hyper_analysis(ad::constant(y)).value();
      m.codebook.record_usage(vq_nearest(l_p, m.codebook.entries.value()).indices);
      if ((it + 1) % cfg.reseed_interval == 0 && it + 1 < total) reseed_dead_entries(m, opt, l_p, rng);
    }
    if (sink) sink(phase, it, r.report, norm);
  }
  m.stage = stage;
  m.lambda_r = cfg.lambda_r;
  m.codec_store.set_trainable(false);
}

std::unique_ptr<FloatModel> model_from_pretrained(const FloatModel& pre, const TrainConfig& cfg) {
  if (!(pre.topo == cfg.topology)) throw std::invalid_argument("pretrained model has a different topology");
  const DiffusionConfig& a = pre.diffusion;
  const DiffusionConfig& b = cfg.diffusion;
  if (a.T != b.T || a.kind != b.kind || a.beta_start != b.beta_start || a.beta_end != b.beta_end) {
    throw std::invalid_argument("pretrained model uses a different noise schedule");
  }
  auto m = std::make_unique<FloatModel>(cfg.topology, cfg.diffusion, cfg.seed);
  m->ae_store.copy_values_from(pre.ae_store);
  m->base_store.copy_values_from(pre.base_store);
  m->config_hash = config_hash(cfg);
  return m;
}

std::unique_ptr<FloatModel> build_pretrained(const TrainConfig& cfg, const std::vector<Tensor<float>>& train,
                                             const std::vector<Tensor<float>>& heldout,
                                             const MetricsSink& sink, std::ostream* log) {
  auto m = std::make_unique<FloatModel>(cfg.topology, cfg.diffusion, cfg.seed);
  const PretrainResult ae = pretrain_autoencoder(*m, train, heldout, cfg, sink);
  if (log) *log << "autoencoder: train loss " << ae.final_loss << ", held-out mse " << ae.heldout_mse << "\n";
  if (ae.heldout_mse > cfg.ae_target_mse && log) {
    *log << "warning: autoencoder held-out mse above target " << cfg.ae_target_mse << "\n";
  }
  const double base = pretrain_base_denoiser(*m, encode_all(*m, train), cfg, sink);
  if (log) *log << "base denoiser: loss " << base << "\n";
  return m;
}

namespace {
void ensure_parent(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}
}  // namespace

std::unique_ptr<FloatModel> run_training(const TrainConfig& cfg, int stage, std::ostream& log) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  for (const std::string* p : {&cfg.output, &cfg.metrics_log, &cfg.pretrained}) {
    if (!p->empty()) ensure_parent(*p);
  }
  const ToyCorpus corpus = make_corpus(cfg.corpus_seed, cfg.train_images, cfg.heldout_images, cfg.image_size);
  std::ofstream metrics;
  MetricsSink sink;
  if (!cfg.metrics_log.empty()) {
    metrics.open(cfg.metrics_log, std::ios::app);
    if (!metrics) throw std::runtime_error("cannot open metrics log " + cfg.metrics_log);
    sink = jsonl_sink(metrics);
  }

  std::unique_ptr<FloatModel> m;
  if (stage == 1) {
    std::unique_ptr<FloatModel> pre;
    if (!cfg.pretrained.empty() && std::filesystem::exists(cfg.pretrained)) {
      pre = load_checkpoint(cfg.pretrained);
      log << "loaded pretrained networks from " << cfg.pretrained << "\n";
    } else {
      pre = build_pretrained(cfg, corpus.train, corpus.heldout, sink, &log);
      if (!cfg.pretrained.empty()) {
        save_checkpoint(cfg.pretrained, *pre);
        log << "saved pretrained networks to " << cfg.pretrained << "\n";
      }
    }
    m = model_from_pretrained(*pre, cfg);
  } else {
    if (cfg.stage1_checkpoint.empty()) {
      throw std::invalid_argument("stage 2 needs stage1_checkpoint in the config");
    }
    m = load_checkpoint(cfg.stage1_checkpoint);
    if (m->stage < 1) throw std::logic_error("stage 2 requires a checkpoint that completed stage 1");
  }
  train_codec(*m, stage, cfg, corpus.train, encode_all(*m, corpus.train), sink);
  save_checkpoint(cfg.output, *m);
  log << "stage " << stage << " checkpoint written to " << cfg.output << "\n";
  return m;
}

}  // namespace rrd
