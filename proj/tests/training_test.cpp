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


#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rrd/config.hpp"
#include "rrd/corpus.hpp"
#include "rrd/grad_check.hpp"
#include "rrd/training.hpp"
#include "test_models.hpp"

namespace rrd {
namespace {

using testing::tiny_topology;

// Omega-weighted and z0-space forms of the noise term agree for any
// denoiser output.
TEST(NoiseEstimation, WeightedFormEqualsLatentForm) {
  const NoiseSchedule s = default_schedule();
  const RelayWeights w = relay_weights(s, 300);
  Rng rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{3, 4, 5, 6};
    const ad::Var<float> z0 = ad::constant(rng.normal_tensor<float>(shape));
    const ad::Var<float> zc = ad::constant(rng.normal_tensor<float>(shape));
    const Tensor<float> noise = rng.normal_tensor<float>(shape);
    const ad::Var<float> eps_hat = ad::constant(rng.normal_tensor<float>(shape));
    const StartMode mode = trial % 2 ? StartMode::kRelay : StartMode::kPureNoise;
    const int limit = mode == StartMode::kRelay ? 300 : 1000;
    std::vector<int> steps(3);
    for (int& n : steps) n = rng.uniform_int(1, limit);
    const NoisedLatent<float> nl = noise_latent(z0, zc, steps, noise, s, w, mode);
    const double a = omega_weighted_error(nl.target, eps_hat, steps, s).item();
    const double b = z0_space_error(z0, nl.z_n, eps_hat, steps, s).item();
    worst = std::max(worst, std::abs(a - b) / std::abs(b));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(NoiseEstimation, OracleEstimatorGivesZero) {
  const NoiseSchedule s = default_schedule();
  const RelayWeights w = relay_weights(s, 300);
  Rng rng(2);
  const Shape shape{2, 3, 4, 4};
  const ad::Var<double> z0 = ad::constant(rng.normal_tensor<double>(shape));
  const ad::Var<double> zc = ad::constant(rng.normal_tensor<double>(shape));
  const Tensor<double> noise = rng.normal_tensor<double>(shape);
  const std::vector<int> steps{17, 300};
  CondEstimator<double> oracle = [&](const ad::Var<double>&, const ad::Var<double>&, const std::vector<int>&) {
    return effective_noise(zc - z0, ad::constant(noise), w);
  };
  EXPECT_NEAR(noise_estimation_loss(z0, zc, zc, steps, noise, oracle, s, w).item(), 0.0, 1e-20);
  EXPECT_GT(omega(s, 300), omega(s, 1));
  EXPECT_THROW(noise_latent(z0, zc, std::vector<int>{0, 1}, noise, s, w, StartMode::kRelay), std::out_of_range);
  EXPECT_THROW(noise_latent(z0, zc, std::vector<int>{301, 1}, noise, s, w, StartMode::kRelay), std::out_of_range);
}

TEST(CodebookLoss, VanishesWhenQuantizationIsExact) {
  Rng rng(3);
  const ad::Var<double> l = ad::constant(rng.normal_tensor<double>({1, 2, 3, 3}));
  ad::Freezer<double> fz;
  const CodebookLossTerms<double> t = codebook_loss(l, l, kCommitmentBeta, fz);
  EXPECT_EQ(t.total.item(), 0.0);
}

class TinyModel : public ::testing::Test {
 protected:
  TinyModel() : m(tiny_topology(), DiffusionConfig{}, 5, false) {
    m.freeze_for_codec_training();
    Rng rng(6);
    z0 = rng.normal_tensor<double>({2, tiny_topology().latent_channels, 8, 8});
    x = rng.uniform_tensor<double>({2, 3, 64, 64}, 0.0, 1.0);
  }
  Model<double> m;
  Tensor<double> z0;
  Tensor<double> x;
};

TEST_F(TinyModel, StageOneGradientMatchesCentralDifference) {
  ad::Freezer<double> fz(ad::Freezer<double>::Mode::kRecord);
  bool first = true;
  auto loss = [&] {
    if (!first) fz.start_replay();
    first = false;
    Rng rng(7);
    return stage1_loss(m, z0, 1.0, rng, fz).total;
  };
  const GradCheckResult r = grad_check<double>(loss, m.codec_store.entries(), 1e-6, 6);
  EXPECT_LE(r.max_rel_error, 1e-3) << r.worst_param << " analytic " << r.worst_analytic << " numeric "
                                   << r.worst_numeric;
  EXPECT_GT(r.checked, 50);
}

TEST_F(TinyModel, StopGradientOperandsGetNoGradient) {
  ad::Freezer<double> fz;
  Rng rng(8);
  const CodecPass<double> p = codec_pass(m, ad::constant(z0), rng, fz);
  // ||sg(l_p) - l_hat||^2 reaches only the codebook.
  m.codec_store.zero_grad();
  ad::backward(p.cb.codebook);
  for (const auto& [name, v] : m.codec_store.entries()) {
    if (name == "codec.codebook") continue;
    const Tensor<double> g = v.grad();
    if (!g.empty()) {
        EXPECT_EQ(g.array().abs().maxCoeff(), 0.0) << name;
      }
  }
  // ||sg(l_hat) - l_p||^2 never reaches the codebook.
  m.codec_store.zero_grad();
  const CodecPass<double> q = codec_pass(m, ad::constant(z0), rng, fz);
  ad::backward(q.cb.commitment);
  const Tensor<double> g = m.codebook.entries.grad();
  if (!g.empty()) {
    EXPECT_EQ(g.array().abs().maxCoeff(), 0.0);
  }
}

TEST_F(TinyModel, FrozenNetworksReceiveNoGradient) {
  ad::Freezer<double> fz;
  Rng rng(9);
  m.ae_store.zero_grad();
  m.base_store.zero_grad();
  ad::backward(stage2_loss(m, x, z0, 1.0, 0.5, 2, rng, fz).total);
  for (const auto* store : {&m.ae_store, &m.base_store, &m.perc_store}) {
    for (const auto& [name, v] : store->entries()) {
      const Tensor<double> g = v.grad();
      if (!g.empty()) {
        EXPECT_EQ(g.array().abs().maxCoeff(), 0.0) << name;
      }
    }
  }
}

TEST_F(TinyModel, ReportTotalsEqualDocumentedSums) {
  for (double lambda : {0.1, 0.25, 0.5, 1.0, 2.0}) {
    ad::Freezer<double> fz;
    Rng rng(10);
    const LossResult<double> a = stage1_loss(m, z0, lambda, rng, fz);
    EXPECT_TRUE(a.report.terms_valid());
    EXPECT_NEAR(a.report.weighted_sum(), a.report.total, 1e-6 * std::abs(a.report.total));
    const LossResult<double> b = stage2_loss(m, x, z0, lambda, 0.5, 2, rng, fz);
    EXPECT_TRUE(b.report.terms_valid());
    EXPECT_NEAR(b.report.weighted_sum(), b.report.total, 1e-6 * std::abs(b.report.total));
    EXPECT_EQ(b.report.lambda_perc, 0.5);
  }
  ad::Freezer<double> fz;
  Rng rng(11);
  EXPECT_THROW(stage1_loss(m, z0, 0.0, rng, fz), std::invalid_argument);
}

TEST_F(TinyModel, StageTwoGradientMatchesCentralDifference) {
  ad::Freezer<double> fz(ad::Freezer<double>::Mode::kRecord);
  bool first = true;
  auto loss = [&] {
    if (!first) fz.start_replay();
    first = false;
    Rng rng(12);
    return stage2_loss(m, x, z0, 1.0, 0.5, 2, rng, fz).total;
  };
  const GradCheckResult r = grad_check<double>(loss, m.codec_store.entries(), 1e-6, 3);
  EXPECT_LE(r.max_rel_error, 1e-3) << r.worst_param << " analytic " << r.worst_analytic << " numeric "
                                   << r.worst_numeric;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.topology = tiny_topology();
  c.train_images = 6;
  c.heldout_images = 2;
  c.image_size = 32;
  c.ae_iters = 5;
  c.base_iters = 5;
  c.base_batch = 4;
  c.batch = 2;
  c.warmup_iters = 3;
  c.stage1_iters = 6;
  c.stage2_iters = 3;
  c.reseed_interval = 4;
  return c;
}

struct Trained {
  std::unique_ptr<FloatModel> pre;
  std::unique_ptr<FloatModel> m;
  ToyCorpus corpus;
};

Trained train_tiny(const TrainConfig& c) {
  Trained t;
  t.corpus = make_corpus(c.corpus_seed, c.train_images, c.heldout_images, c.image_size);
  t.pre = build_pretrained(c, t.corpus.train, t.corpus.heldout, {}, nullptr);
  t.m = model_from_pretrained(*t.pre, c);
  train_codec(*t.m, 1, c, t.corpus.train, encode_all(*t.m, t.corpus.train));
  return t;
}

TEST(Training, SameSeedGivesIdenticalCheckpoint) {
  const TrainConfig c = tiny_config();
  const Trained a = train_tiny(c);
  const Trained b = train_tiny(c);
  EXPECT_EQ(model_hash(*a.m), model_hash(*b.m));
  TrainConfig d = c;
  d.seed = 2;
  const Trained e = train_tiny(d);
  EXPECT_NE(model_hash(*a.m), model_hash(*e.m));
}

TEST(Training, FrozenNetworksUnchanged) {
  const TrainConfig c = tiny_config();
  Trained t = train_tiny(c);
  auto same = [](const nn::ParamStore<float>& a, const nn::ParamStore<float>& b) {
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
      if (!(a.entries()[i].second.value().array() == b.entries()[i].second.value().array()).all()) return false;
    }
    return true;
  };
  EXPECT_TRUE(same(t.m->ae_store, t.pre->ae_store));
  EXPECT_TRUE(same(t.m->base_store, t.pre->base_store));
  train_codec(*t.m, 2, c, t.corpus.train, encode_all(*t.m, t.corpus.train));
  EXPECT_EQ(t.m->stage, 2);
  EXPECT_TRUE(same(t.m->ae_store, t.pre->ae_store));
  EXPECT_TRUE(same(t.m->base_store, t.pre->base_store));
}

TEST(Training, StageTwoNeedsStageOne) {
  const TrainConfig c = tiny_config();
  const ToyCorpus corpus = make_corpus(1, 2, 0, 32);
  FloatModel m(c.topology, c.diffusion, 1);
  EXPECT_THROW(train_codec(m, 2, c, corpus.train, encode_all(m, corpus.train)), std::logic_error);
  std::ostringstream log;
  TrainConfig d = c;
  d.stage1_checkpoint.clear();
  EXPECT_THROW(run_training(d, 2, log), std::invalid_argument);
}

TEST(Training, StageOneLossTrendsDown) {
  TrainConfig c = tiny_config();
  c.warmup_iters = 0;
  c.stage1_iters = 400;
  c.train_images = 16;
  const ToyCorpus corpus = make_corpus(c.corpus_seed, c.train_images, 0, c.image_size);
  auto pre = build_pretrained(c, corpus.train, corpus.heldout, {}, nullptr);
  auto m = model_from_pretrained(*pre, c);
  std::vector<double> totals;
  train_codec(*m, 1, c, corpus.train, encode_all(*m, corpus.train),
              [&](const std::string&, long long, const LossReport& r, double) { totals.push_back(r.total); });
  ASSERT_EQ(totals.size(), 400u);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += totals[i];
    tail += totals[totals.size() - 1 - i];
  }
  EXPECT_LT(tail, head);
}

TEST(Config, RoundTripAndValidation) {
  TrainConfig c;
  c.lambda_r = 0.25;
  c.L = 5;
  c.diffusion.start = StartMode::kPureNoise;
  c.topology.codebook_size = 64;
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(back.lambda_r, 0.25);
  EXPECT_EQ(back.L, 5);
  EXPECT_EQ(back.diffusion, c.diffusion);
  EXPECT_EQ(back.topology, c.topology);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_THROW(train_config_from_json(R"({"version": 1, "lamda_r": 1})"), std::invalid_argument);
  EXPECT_THROW(train_config_from_json(R"({"version": 2})"), std::invalid_argument);
  EXPECT_THROW(train_config_from_json(R"({"version": 1, "lambda_r": 0})"), std::invalid_argument);
  EXPECT_THROW(train_config_from_json(R"({"version": 1, "L": 0})"), std::invalid_argument);
  EXPECT_EQ(train_config_from_json(R"({"version": 1})").lambda_perc, 0.5);
  for (double l : {2.0, 1.0, 0.5, 0.25, 0.1}) {
    TrainConfig g;
    g.lambda_r = l;
    EXPECT_NO_THROW(train_config_from_json(train_config_to_json(g)));
  }
}

}  // namespace
}  // namespace rrd
