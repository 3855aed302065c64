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

#include "rrd/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace rrd {

BetaKind parse_beta_kind(const std::string& name) {
  if (name == "linear") return BetaKind::kLinear;
  if (name == "scaled_linear") return BetaKind::kScaledLinear;
  throw std::invalid_argument("unknown beta schedule '" + name + "'");
}

std::string to_string(BetaKind kind) {
  return kind == BetaKind::kLinear ? "linear" : "scaled_linear";
}

NoiseSchedule build_schedule(int T, BetaKind kind, double beta_start,
                             double beta_end) {
  if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
  if (!std::isfinite(beta_start) || !std::isfinite(beta_end)) {
    throw std::invalid_argument("build_schedule: non-finite beta endpoint");
  }
  if (!(beta_start > 0.0) || beta_start > beta_end || !(beta_end < 1.0)) {
    throw std::invalid_argument(
        "build_schedule: require 0 < beta_start <= beta_end < 1");
  }

  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);

  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    double beta;
    if (kind == BetaKind::kLinear) {
      beta = beta_start + frac * (beta_end - beta_start);
    } else {
      const double lo = std::sqrt(beta_start);
      const double hi = std::sqrt(beta_end);
      const double r = lo + frac * (hi - lo);
      beta = r * r;
    }
    s.betas[i] = beta;
    s.alphas[i] = 1.0 - beta;
    s.alpha_bars[i] = (i == 0 ? 1.0 : s.alpha_bars[i - 1]) * s.alphas[i];
  }
  return s;
}

NoiseSchedule default_schedule() {
  return build_schedule(1000, BetaKind::kScaledLinear, 0.00085, 0.012);
}

RelayWeights relay_weights(const NoiseSchedule& schedule, int N) {
  if (N < 1 || N > schedule.T) {
    throw std::invalid_argument("relay_weights: N must lie in [1, T]");
  }
  RelayWeights w;
  w.N = N;
  const double abar_N = schedule.alpha_bar(N);
  w.lambda = std::sqrt(abar_N) / std::sqrt(1.0 - abar_N);
  w.etas.resize(N);
  for (int n = 1; n <= N; ++n) {
    const double abar = schedule.alpha_bar(n);
    w.etas[n - 1] = w.lambda * std::sqrt(1.0 - abar) / std::sqrt(abar);
  }
  // The closed form reaches 1 at n = N up to one rounding; pin it.
  w.etas[N - 1] = 1.0;
  return w;
}

double omega(const NoiseSchedule& schedule, int n) {
  if (n < 1 || n > schedule.T) {
    throw std::out_of_range("omega: step out of range");
  }
  const double abar = schedule.alpha_bar(n);
  return (1.0 - abar) / abar;
}

}  // namespace rrd
