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

#ifndef RRD_SCHEDULE_HPP_
#define RRD_SCHEDULE_HPP_

#include <string>
#include <vector>

namespace rrd {

enum class BetaKind { kLinear, kScaledLinear };

BetaKind parse_beta_kind(const std::string& name);
std::string to_string(BetaKind kind);

/// Variance schedule beta_1..beta_T with alpha_t = 1 - beta_t and the
/// cumulative products alpha_bar_t. Steps are 1-based in the accessors.
/// Immutable after construction.
struct NoiseSchedule {
  int T = 0;
  BetaKind kind = BetaKind::kScaledLinear;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(int t) const { return betas.at(t - 1); }
  double alpha(int t) const { return alphas.at(t - 1); }
  double alpha_bar(int t) const { return alpha_bars.at(t - 1); }
};

/// Throws std::invalid_argument for T < 1, non-finite endpoints, or endpoints
/// outside 0 < beta_start <= beta_end < 1. scaled_linear interpolates
/// sqrt(beta) linearly and squares.
NoiseSchedule build_schedule(int T, BetaKind kind, double beta_start,
                             double beta_end);

/// Latent-diffusion defaults: scaled_linear, 0.00085 .. 0.012, T = 1000.
NoiseSchedule default_schedule();

/// Residual weights eta_n = lambda * sqrt(1 - abar_n) / sqrt(abar_n) with
/// lambda = sqrt(abar_N) / sqrt(1 - abar_N), so eta_N = 1.
struct RelayWeights {
  int N = 0;
  double lambda = 0.0;
  std::vector<double> etas;

  double eta(int n) const { return etas.at(n - 1); }
};

RelayWeights relay_weights(const NoiseSchedule& schedule, int N);

/// Loss weight (1 - abar_n) / abar_n mapping epsilon-space error to
/// z_0-space error.
double omega(const NoiseSchedule& schedule, int n);

}  // namespace rrd

#endif  // RRD_SCHEDULE_HPP_
