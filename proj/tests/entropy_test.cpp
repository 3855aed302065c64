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
#include <limits>

#include "rrd/codec.hpp"
#include "rrd/entropy_model.hpp"
#include "rrd/random.hpp"

namespace rrd {
namespace {

// Brute force nearest neighbour written against raw arrays.
std::vector<int> brute_force_vq(const Tensor<float>& l, const Tensor<float>& table) {
  const Shape s = l.shape();
  std::vector<int> out;
  for (int n = 0; n < s.n; ++n)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) {
        int best = -1;
        long double best_d = std::numeric_limits<long double>::max();
        for (int e = 0; e < table.shape().n; ++e) {
          long double d = 0;
          for (int c = 0; c < s.c; ++c) {
            const long double diff = static_cast<long double>(l(n, c, h, w)) - table(e, c, 0, 0);
            d += diff * diff;
          }
          if (d < best_d) {
            best_d = d;
            best = e;
          }
        }
        out.push_back(best);
      }
  return out;
}

TEST(VectorQuantizer, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<float> table = rng.normal_tensor<float>({37, 5, 1, 1});
    const Tensor<float> l = rng.normal_tensor<float>({2, 5, 3, 4});
    const VqResult<float> r = vq_nearest(l, table);
    EXPECT_EQ(r.indices, brute_force_vq(l, table));
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 5; ++c)
        for (int h = 0; h < 3; ++h)
          for (int w = 0; w < 4; ++w) {
            EXPECT_EQ(r.gathered(n, c, h, w), table(r.indices[(n * 3 + h) * 4 + w], c, 0, 0));
          }
  }
}

TEST(VectorQuantizer, TiesGoToLowestIndex) {
  Tensor<float> table({4, 2, 1, 1});
  // Entries 1 and 3 are equidistant from the origin; entry 0 is farther.
  const float v[] = {5, 5, 1, 0, 9, 9, 0, 1};
  for (int i = 0; i < 8; ++i) table[i] = v[i];
  const Tensor<float> l({1, 2, 1, 1});
  EXPECT_EQ(vq_nearest(l, table).indices, std::vector<int>{1});
  Tensor<float> dup({3, 2, 1, 1});
  EXPECT_EQ(vq_nearest(l, dup).indices, std::vector<int>{0});
}

TEST(VectorQuantizer, LookupInvertsIndices) {
  Rng rng(4);
  const Tensor<float> table = rng.normal_tensor<float>({16, 3, 1, 1});
  const Tensor<float> l = rng.normal_tensor<float>({1, 3, 5, 6});
  const VqResult<float> r = vq_nearest(l, table);
  const Tensor<float> back = vq_lookup(r.indices, table, l.shape());
  EXPECT_TRUE((back.array() == r.gathered.array()).all());
}

TEST(Quantization, RoundsHalfAwayFromZero) {
  EXPECT_EQ(round_half_away(0.5), 1.0);
  EXPECT_EQ(round_half_away(-0.5), -1.0);
  EXPECT_EQ(round_half_away(1.5), 2.0);
  EXPECT_EQ(round_half_away(-2.5), -3.0);
  EXPECT_EQ(round_half_away(0.49999), 0.0);
  Tensor<double> y({1, 1, 1, 4}), mu({1, 1, 1, 4});
  const double yv[] = {1.5, -0.5, 3.25, 0.0};
  const double mv[] = {1.0, 0.0, 0.25, 0.5};
  for (int i = 0; i < 4; ++i) {
    y[i] = yv[i];
    mu[i] = mv[i];
  }
  EXPECT_EQ(quantized_offsets(y, mu), (std::vector<std::int32_t>{1, -1, 3, -1}));
  const Tensor<double> q = quantize_eval(y, mu);
  EXPECT_EQ(q[0], 2.0);
  EXPECT_EQ(q[1], -1.0);
  EXPECT_EQ(q[2], 3.25);
  EXPECT_EQ(q[3], -0.5);
}

TEST(Quantization, OffsetIsWithinHalfOfInput) {
  Rng rng(5);
  const Tensor<double> y = rng.normal_tensor<double>({2, 3, 4, 5});
  const Tensor<double> mu = rng.normal_tensor<double>({2, 3, 4, 5});
  const Tensor<double> q = quantize_eval(y, mu);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_LE(std::abs(q[i] - y[i]), 0.5 + 1e-12);
}

TEST(Rate, CentredSymbolUnderUnitSigmaCostsBinMass) {
  // 2 Phi(0.5) - 1 and its information content, from a 50-digit evaluation.
  const double mass = 0.382924922548026;
  const double bits = 1.38486653429099;
  EXPECT_NEAR(ad::gaussian_bin_mass(0.0, 1.0), mass, 1e-14);
  Tensor<double> y({1, 4, 2, 2}), mu({1, 4, 2, 2}), sigma({1, 4, 2, 2});
  Rng rng(6);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    mu[i] = rng.normal();
    y[i] = mu[i];
    sigma[i] = 1.0;
  }
  EXPECT_NEAR(rate_estimate(y, EntropyParams<double>{mu, sigma}), 16 * bits, 1e-10);
  const Tensor<double> map = rate_map(y, EntropyParams<double>{mu, sigma});
  EXPECT_NEAR(map.array().sum(), 16 * bits, 1e-10);
}

TEST(Rate, FlooredAtMinimumProbability) {
  Tensor<double> y({1, 1, 1, 1}), mu({1, 1, 1, 1}), sigma({1, 1, 1, 1});
  y[0] = 1000.0;
  sigma[0] = 0.11;
  EXPECT_NEAR(rate_estimate(y, EntropyParams<double>{mu, sigma}), 16.0, 1e-12);
}

TEST(Context, IsCausalInDecodeOrder) {
  Rng rng(7);
  nn::ParamStore<double> store;
  CheckerboardContext<double> ctx(store, 3, 4, 6, rng);
  // Push the context weights away from zero so leaks would show.
  for (auto& [name, v] : store.entries()) v.mutable_value() = rng.normal_tensor<double>(v.shape());
  const Tensor<double> hyper = rng.normal_tensor<double>({1, 4, 5, 6});
  EXPECT_EQ(count_causality_violations(ctx, hyper, {1, 3, 5, 6}, 11), 0);
}

TEST(Context, NonAnchorsDependOnAnchors) {
  Rng rng(8);
  nn::ParamStore<double> store;
  CheckerboardContext<double> ctx(store, 2, 3, 4, rng);
  for (auto& [name, v] : store.entries()) v.mutable_value() = rng.normal_tensor<double>(v.shape());
  const Tensor<double> hyper = rng.normal_tensor<double>({1, 3, 4, 4});
  Tensor<double> y({1, 2, 4, 4});
  const EntropyParams<double> a = ctx.predict(y, hyper);
  y(0, 0, 1, 1) = 5.0;  // anchor
  const EntropyParams<double> b = ctx.predict(y, hyper);
  EXPECT_NE(a.mu(0, 0, 1, 2), b.mu(0, 0, 1, 2));  // neighbouring non-anchor
  EXPECT_EQ(a.mu(0, 0, 0, 0), b.mu(0, 0, 0, 0));  // anchor
}

TEST(Context, SigmaRespectsFloor) {
  Rng rng(9);
  nn::ParamStore<double> store;
  CheckerboardContext<double> ctx(store, 2, 3, 4, rng);
  for (auto& [name, v] : store.entries()) v.mutable_value() = 10.0 * rng.normal_tensor<double>(v.shape());
  const EntropyParams<double> p = ctx.predict(rng.normal_tensor<double>({1, 2, 6, 6}),
                                              rng.normal_tensor<double>({1, 3, 6, 6}));
  EXPECT_GE(p.sigma.array().minCoeff(), kSigmaMin);
}

TEST(Context, MergeTakesAnchorSitesFromAnchorPass) {
  Rng rng(10);
  const Shape s{1, 2, 3, 3};
  EntropyParams<float> a{rng.normal_tensor<float>(s), rng.normal_tensor<float>(s)};
  EntropyParams<float> f{rng.normal_tensor<float>(s), rng.normal_tensor<float>(s)};
  const EntropyParams<float> m = merge_anchor_params(a, f);
  for (int c = 0; c < 2; ++c)
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) {
        const auto& src = is_anchor(h, w) ? a : f;
        EXPECT_EQ(m.mu(0, c, h, w), src.mu(0, c, h, w));
        EXPECT_EQ(m.sigma(0, c, h, w), src.sigma(0, c, h, w));
      }
}

TEST(SigmaLevels, MonotoneAndCoverRange) {
  EXPECT_EQ(sigma_level(0.0), 0);
  EXPECT_EQ(sigma_level(kSigmaMin), 0);
  EXPECT_EQ(sigma_level(1e6), kSigmaLevels - 1);
  EXPECT_NEAR(sigma_at_level(kSigmaLevels - 1), kSigmaMax, 1e-9);
  int prev = 0;
  for (double s = 0.1; s < 80; s *= 1.01) {
    const int k = sigma_level(s);
    EXPECT_GE(k, prev);
    prev = k;
    if (s > kSigmaMin && s < kSigmaMax) {
      // Nearest level in log space: within half a level ratio.
      const double half = 0.5 * std::log(kSigmaMax / kSigmaMin) / (kSigmaLevels - 1);
      EXPECT_LE(std::abs(std::log(sigma_at_level(k) / s)), half + 1e-12);
    }
  }
  EXPECT_THROW(sigma_level(std::nan("")), std::invalid_argument);
}

TEST(SigmaLevels, TablesCostCloseToContinuousRate) {
  // Snapping sigma costs a bounded fraction of a bit; check the whole coded
  // size against the real-valued estimate.
  Rng rng(12);
  const int n = 20000;
  Tensor<double> y({1, 1, 1, n}), mu({1, 1, 1, n}), sigma({1, 1, 1, n});
  std::vector<std::int32_t> q(n);
  std::vector<const CdfTable*> tables(n);
  for (int i = 0; i < n; ++i) {
    sigma[i] = std::exp(rng.uniform(std::log(0.3), std::log(8.0)));
    mu[i] = rng.uniform(-3, 3);
    q[i] = static_cast<std::int32_t>(round_half_away(sigma[i] * rng.normal()));
    y[i] = mu[i] + q[i];
    tables[i] = &sigma_table(sigma_level(sigma[i]));
  }
  const double estimate = rate_estimate(y, EntropyParams<double>{mu, sigma});
  const std::vector<std::uint8_t> bytes = encode_stream(q, tables);
  EXPECT_LE(8.0 * bytes.size(), 1.01 * estimate + 64);
  EXPECT_EQ(decode_stream(bytes, tables, q.size()), q);
}

}  // namespace
}  // namespace rrd
