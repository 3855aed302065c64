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


#ifndef RRD_METRICS_HPP_
#define RRD_METRICS_HPP_

#include "rrd/tensor.hpp"

namespace rrd {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error over every element.
double mse(const Tensor<float>& x, const Tensor<float>& y);

/// 10 log10(1 / mse) for images in [0, 1]; kPsnrCap when the images are
/// identical or the value would exceed the cap.
double psnr(const Tensor<float>& x, const Tensor<float>& y);

struct MsSsim {
  double value = 0.0;
  int scales = 0;
};

/// Multi-scale SSIM with the standard 11-tap Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, data range 1 and the five standard scale weights.
/// Each channel is scored separately and the results averaged. Images whose
/// shorter side is <= 160 use fewer scales (weights renormalized, one
/// warning per process on stderr); fewer than 11 pixels is an error.
MsSsim ms_ssim(const Tensor<float>& x, const Tensor<float>& y);

}  // namespace rrd

#endif  // RRD_METRICS_HPP_
