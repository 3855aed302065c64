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


#include "rrd/metrics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace rrd {
namespace {

using Plane = Eigen::ArrayXXd;

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr std::array<double, 5> kWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

Eigen::ArrayXd gaussian_taps() {
  Eigen::ArrayXd g(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return g / g.sum();
}

// Separable "valid" filtering.
Plane blur(const Plane& p, const Eigen::ArrayXd& g) {
  const int k = static_cast<int>(g.size());
  const int rows = static_cast<int>(p.rows()) - k + 1;
  const int cols = static_cast<int>(p.cols()) - k + 1;
  Plane tmp(rows, p.cols());
  for (int i = 0; i < rows; ++i) {
    tmp.row(i).setZero();
    for (int t = 0; t < k; ++t) tmp.row(i) += g[t] * p.row(i + t);
  }
  Plane out(rows, cols);
  for (int j = 0; j < cols; ++j) {
    out.col(j).setZero();
    for (int t = 0; t < k; ++t) out.col(j) += g[t] * tmp.col(j + t);
  }
  return out;
}

// 2x2 mean with the ragged last row / column averaged over what exists.
Plane downsample(const Plane& p) {
  const int rows = (static_cast<int>(p.rows()) + 1) / 2;
  const int cols = (static_cast<int>(p.cols()) + 1) / 2;
  Plane out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double acc = 0.0;
      int count = 0;
      for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
          const int r = 2 * i + di, c = 2 * j + dj;
          if (r < p.rows() && c < p.cols()) {
            acc += p(r, c);
            ++count;
          }
        }
      }
      out(i, j) = acc / count;
    }
  }
  return out;
}

struct ScaleTerms {
  double ssim;
  double cs;
};

ScaleTerms ssim_terms(const Plane& a, const Plane& b, const Eigen::ArrayXd& g) {
  const Plane mu_a = blur(a, g), mu_b = blur(b, g);
  const Plane saa = blur(a * a, g) - mu_a * mu_a;
  const Plane sbb = blur(b * b, g) - mu_b * mu_b;
  const Plane sab = blur(a * b, g) - mu_a * mu_b;
  const Plane cs = (2.0 * sab + kC2) / (saa + sbb + kC2);
  const Plane lum = (2.0 * mu_a * mu_b + kC1) / (mu_a.square() + mu_b.square() + kC1);
  return {(lum * cs).mean(), cs.mean()};
}

int scale_count(int min_side) {
  int m = 5;
  while (m > 1 && min_side <= (kWindow - 1) * (1 << (m - 1))) --m;
  return m;
}

std::atomic<bool> warned{false};

}  // namespace

double mse(const Tensor<float>& x, const Tensor<float>& y) {
  require_same_shape(x.shape(), y.shape(), "mse");
  if (x.size() == 0) throw std::invalid_argument("mse: empty input");
  return (x.array().cast<double>() - y.array().cast<double>()).square().mean();
}

double psnr(const Tensor<float>& x, const Tensor<float>& y) {
  const double e = mse(x, y);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

MsSsim ms_ssim(const Tensor<float>& x, const Tensor<float>& y) {
  require_same_shape(x.shape(), y.shape(), "ms_ssim");
  const Shape s = x.shape();
  const int min_side = std::min(s.h, s.w);
  if (min_side < kWindow) {
    throw std::invalid_argument("ms_ssim: image side below the 11-pixel window");
  }
  const int m = scale_count(min_side);
  if (m < 5 && !warned.exchange(true)) {
    std::clog << "warning: ms_ssim on " << s.h << "x" << s.w << " uses " << m
              << " of 5 scales (shorter side <= " << (kWindow - 1) * 16 << ")\n";
  }
  double wsum = 0.0;
  for (int j = 0; j < m; ++j) wsum += kWeights[j];

  const Eigen::ArrayXd g = gaussian_taps();
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      Plane a(s.h, s.w), b(s.h, s.w);
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          a(i, j) = x(n, c, i, j);
          b(i, j) = y(n, c, i, j);
        }
      }
      double v = 1.0;
      for (int j = 0; j < m; ++j) {
        const ScaleTerms t = ssim_terms(a, b, g);
        const double term = j + 1 == m ? t.ssim : t.cs;
        v *= std::pow(std::max(term, 0.0), kWeights[j] / wsum);
        if (j + 1 < m) {
          a = downsample(a);
          b = downsample(b);
        }
      }
      total += v;
    }
  }
  MsSsim r;
  r.value = std::clamp(total / (s.n * s.c), 0.0, 1.0);
  r.scales = m;
  return r;
}

}  // namespace rrd
