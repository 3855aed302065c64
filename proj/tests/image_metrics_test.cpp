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
#include <filesystem>
#include <fstream>

#include "rrd/corpus.hpp"
#include "rrd/image_io.hpp"
#include "rrd/metrics.hpp"
#include "rrd/random.hpp"

namespace rrd {
namespace {

namespace fs = std::filesystem;

Tensor<float> quantized_noise(std::uint64_t seed, int h, int w) {
  Rng rng(seed);
  Tensor<float> x({1, 3, h, w});
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
  return x;
}

TEST(ImageIo, PngAndPpmRoundTripExactly) {
  const Tensor<float> x = quantized_noise(1, 13, 17);
  for (const char* ext : {".png", ".ppm"}) {
    const std::string path = (fs::temp_directory_path() / (std::string("rrd_io_test") + ext)).string();
    write_image(path, x);
    const Tensor<float> y = read_image(path);
    ASSERT_EQ(y.shape(), x.shape());
    for (Eigen::Index i = 0; i < x.size(); ++i) ASSERT_EQ(to_byte(y[i]), to_byte(x[i]));
    fs::remove(path);
  }
}

TEST(ImageIo, ByteConversionClampsAndRoundsHalfAway) {
  EXPECT_EQ(to_byte(-0.3f), 0);
  EXPECT_EQ(to_byte(1.7f), 255);
  EXPECT_EQ(to_byte(0.5f / 255.0f), 1);
  EXPECT_EQ(to_byte(0.49f / 255.0f), 0);
  EXPECT_EQ(to_byte(128.0f / 255.0f), 128);
}

TEST(ImageIo, MissingOrInvalidFilesThrow) {
  EXPECT_THROW(read_image("/nonexistent/file.png"), ImageError);
  const std::string path = (fs::temp_directory_path() / "rrd_bad.png").string();
  {
    std::ofstream f(path);
    f << "not an image";
  }
  EXPECT_THROW(read_image(path), ImageError);
  fs::remove(path);
}

TEST(Padding, ReflectsWithoutRepeatingEdge) {
  Tensor<float> x({1, 1, 1, 3});
  x[0] = 1;
  x[1] = 2;
  x[2] = 3;
  const Tensor<float> p = pad_reflect(x, 3, 6);
  const float row[] = {1, 2, 3, 2, 1, 2};
  for (int w = 0; w < 6; ++w) EXPECT_EQ(p(0, 0, 0, w), row[w]) << w;
  for (int h = 1; h < 3; ++h)  // single-row input: every row repeats it
    for (int w = 0; w < 6; ++w) EXPECT_EQ(p(0, 0, h, w), row[w]);
  const Tensor<float> c = crop_image(p, 1, 3);
  EXPECT_TRUE((c.array() == x.array()).all());
}

TEST(Padding, RoundUp) {
  EXPECT_EQ(round_up(64, 8), 64);
  EXPECT_EQ(round_up(65, 8), 72);
  EXPECT_EQ(round_up(1, 8), 8);
}

TEST(Metrics, IdenticalImagesHitCaps) {
  const Tensor<float> x = quantized_noise(2, 32, 32);
  EXPECT_EQ(psnr(x, x), kPsnrCap);
  EXPECT_EQ(ms_ssim(x, x).value, 1.0);
}

TEST(Metrics, UniformOneLevelErrorPsnr) {
  Tensor<float> x({1, 3, 8, 8});
  x.array() = 0.5f;
  Tensor<float> y = x;
  y.array() += 1.0f / 255.0f;
  EXPECT_NEAR(psnr(x, y), 20.0 * std::log10(255.0), 1e-4);
  EXPECT_NEAR(psnr(x, y), 48.13, 0.01);
  EXPECT_NEAR(mse(x, y), 1.0 / (255.0 * 255.0), 1e-9);
}

TEST(Metrics, MsSsimOfInvertedNoiseIsLow) {
  Rng rng(3);
  Tensor<float> x({1, 3, 96, 96});
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(0.5 + 0.15 * rng.normal());
  Tensor<float> y = x;
  y.array() = 1.0f - x.array();
  const MsSsim r = ms_ssim(x, y);
  EXPECT_LT(r.value, 0.5);
  EXPECT_GE(r.value, 0.0);
}

TEST(Metrics, MsSsimInvariantToChannelPermutation) {
  Rng rng(4);
  const Tensor<float> x = toy_image(rng, 64, 64);
  const Tensor<float> y = toy_image(rng, 64, 64);
  auto permute = [](const Tensor<float>& t) {
    Tensor<float> out(t.shape());
    const int order[] = {2, 0, 1};
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < t.shape().h; ++h)
        for (int w = 0; w < t.shape().w; ++w) out(0, c, h, w) = t(0, order[c], h, w);
    return out;
  };
  EXPECT_NEAR(ms_ssim(x, y).value, ms_ssim(permute(x), permute(y)).value, 1e-12);
}

TEST(Metrics, MsSsimScaleCountFollowsImageSize) {
  const Tensor<float> big = quantized_noise(5, 176, 176);
  EXPECT_EQ(ms_ssim(big, big).scales, 5);
  const Tensor<float> small = quantized_noise(6, 64, 64);
  const MsSsim r = ms_ssim(small, small);
  EXPECT_LT(r.scales, 5);
  EXPECT_GE(r.scales, 1);
  EXPECT_THROW(ms_ssim(quantized_noise(7, 10, 40), quantized_noise(7, 10, 40)), std::invalid_argument);
}

TEST(Metrics, MsSsimInUnitInterval) {
  for (int s = 0; s < 5; ++s) {
    const Tensor<float> a = quantized_noise(10 + s, 48, 48);
    const Tensor<float> b = quantized_noise(20 + s, 48, 48);
    const double v = ms_ssim(a, b).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Corpus, SeededAndIndependentSplits) {
  const ToyCorpus a = make_corpus(5, 4, 2, 32);
  const ToyCorpus b = make_corpus(5, 4, 2, 32);
  const ToyCorpus c = make_corpus(5, 6, 2, 32);
  ASSERT_EQ(a.train.size(), 4u);
  ASSERT_EQ(a.heldout.size(), 2u);
  EXPECT_TRUE((a.train[3].array() == b.train[3].array()).all());
  EXPECT_TRUE((a.heldout[1].array() == c.heldout[1].array()).all());
  EXPECT_FALSE((a.train[0].array() == a.heldout[0].array()).all());
  for (const auto& x : a.train) {
    EXPECT_GE(x.array().minCoeff(), 0.0f);
    EXPECT_LE(x.array().maxCoeff(), 1.0f);
  }
}

}  // namespace
}  // namespace rrd
