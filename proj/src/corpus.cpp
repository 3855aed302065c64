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


#include "rrd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "rrd/image_io.hpp"

namespace rrd {
namespace {

struct Rgb {
  double r, g, b;
};

Rgb random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Tensor<float> toy_image(Rng& rng, int h, int w) {
  std::vector<Rgb> px(static_cast<std::size_t>(h) * w);

  const Rgb c0 = random_color(rng);
  const Rgb c1 = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double t = 0.5 + 0.5 * ((j / double(w) - 0.5) * gx + (i / double(h) - 0.5) * gy) * 1.4;
      const double u = std::clamp(t, 0.0, 1.0);
      px[i * w + j] = {c0.r + (c1.r - c0.r) * u, c0.g + (c1.g - c0.g) * u, c0.b + (c1.b - c0.b) * u};
    }
  }

  const int shapes = rng.uniform_int(2, 5);
  for (int k = 0; k < shapes; ++k) {
    const Rgb col = random_color(rng);
    const double cy = rng.uniform(0.0, h), cx = rng.uniform(0.0, w);
    const double ry = rng.uniform(0.08, 0.3) * h, rx = rng.uniform(0.08, 0.3) * w;
    const bool ellipse = rng.uniform() < 0.5;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double dy = (i + 0.5 - cy) / ry, dx = (j + 0.5 - cx) / rx;
        const double d = ellipse ? std::sqrt(dx * dx + dy * dy) : std::max(std::abs(dx), std::abs(dy));
        const double a = 1.0 - smoothstep(0.9, 1.1, d);
        Rgb& p = px[i * w + j];
        p = {p.r + (col.r - p.r) * a, p.g + (col.g - p.g) * a, p.b + (col.b - p.b) * a};
      }
    }
  }

  // Stripes inside a random half-plane.
  const double freq = rng.uniform(0.15, 0.6);
  const double sa = rng.uniform(0.0, std::numbers::pi);
  const double amp = rng.uniform(0.05, 0.2);
  const double na = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double off = rng.uniform(-0.3, 0.3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double side = (j / double(w) - 0.5) * std::cos(na) + (i / double(h) - 0.5) * std::sin(na);
      if (side < off) continue;
      const double v = amp * std::sin(freq * (j * std::cos(sa) + i * std::sin(sa)));
      Rgb& p = px[i * w + j];
      p = {p.r + v, p.g + v, p.b + v};
    }
  }

  Tensor<float> out({1, 3, h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const Rgb& p = px[i * w + j];
      const double n = 0.01 * rng.normal();
      out(0, 0, i, j) = static_cast<float>(std::clamp(p.r + n, 0.0, 1.0));
      out(0, 1, i, j) = static_cast<float>(std::clamp(p.g + n, 0.0, 1.0));
      out(0, 2, i, j) = static_cast<float>(std::clamp(p.b + n, 0.0, 1.0));
    }
  }
  return out;
}

ToyCorpus make_corpus(std::uint64_t seed, int train_count, int heldout_count, int size) {
  ToyCorpus c;
  Rng train_rng(seed);
  Rng heldout_rng(seed ^ 0x5bd1e995a1b2c3d4ULL);
  for (int i = 0; i < train_count; ++i) c.train.push_back(toy_image(train_rng, size, size));
  for (int i = 0; i < heldout_count; ++i) c.heldout.push_back(toy_image(heldout_rng, size, size));
  return c;
}

void write_corpus(const std::string& dir, const std::vector<Tensor<float>>& images,
                  const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s%04zu.png", prefix.c_str(), i);
    write_image((std::filesystem::path(dir) / name).string(), images[i]);
  }
}

}  // namespace rrd
