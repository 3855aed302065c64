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

#ifndef RRD_SAMPLER_HPP_
#define RRD_SAMPLER_HPP_

// Forward relay residual diffusion and the deterministic reverse process.
//
// Every function here is a template over a "field" type F: anything with a
// shape() accessor and free functions lincomb(a, x, b, y) and scale(a, x).
// rrd::Tensor<S> and rrd::ad::Var<S> both qualify, so the same equations
// drive inference on plain arrays and the unrolled training graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "rrd/random.hpp"
#include "rrd/schedule.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

/// Reverse-step coefficients z_to = k * z0_hat + m * z_from + sigma * noise.
struct SamplerCoefficients {
  int n_from = 0;
  int n_to = 0;
  double k = 0.0;
  double m = 0.0;
  double sigma = 0.0;
};

/// Strictly decreasing step indices, first element = horizon.
struct StepPlan {
  std::vector<int> steps;
  int size() const { return static_cast<int>(steps.size()); }
};

/// Where the reverse chain starts. kRelay noises the compressed latent at the
/// relay horizon; kPureNoise is the vanilla start from a standard normal draw.
enum class StartMode { kRelay, kPureNoise };

namespace detail {
inline void check_step(int n, int limit, const char* what) {
  if (n < 1 || n > limit) throw std::out_of_range(std::string(what) + ": step out of range");
}
}  // namespace detail

/// z_N = sqrt(abar_N) z_c + sqrt(1 - abar_N) noise.
template <typename F>
F make_start(const F& z_c, const NoiseSchedule& schedule, int N, const F& noise) {
  detail::check_step(N, schedule.T, "make_start");
  require_same_shape(z_c.shape(), noise.shape(), "make_start");
  const double abar = schedule.alpha_bar(N);
  return lincomb(std::sqrt(abar), z_c, std::sqrt(1.0 - abar), noise);
}

/// z_n = sqrt(abar_n) (z_0 + eta_n e) + sqrt(1 - abar_n) noise, e = z_c - z_0.
template <typename F>
F forward_diffuse(const F& z_0, const F& z_c, int n, const NoiseSchedule& schedule,
                  const RelayWeights& weights, const F& noise) {
  detail::check_step(n, weights.N, "forward_diffuse");
  require_same_shape(z_0.shape(), z_c.shape(), "forward_diffuse");
  require_same_shape(z_0.shape(), noise.shape(), "forward_diffuse");
  const double abar = schedule.alpha_bar(n);
  const double eta = weights.eta(n);
  const F e = lincomb(1.0, z_c, -1.0, z_0);
  const F shifted = lincomb(1.0, z_0, eta, e);
  return lincomb(std::sqrt(abar), shifted, std::sqrt(1.0 - abar), noise);
}

/// Effective noise lambda * e + noise regressed by the denoiser.
template <typename F>
F effective_noise(const F& e, const F& noise, const RelayWeights& weights) {
  require_same_shape(e.shape(), noise.shape(), "effective_noise");
  return lincomb(weights.lambda, e, 1.0, noise);
}

/// Standard-diffusion form sqrt(abar_n) z_0 + sqrt(1 - abar_n) eps.
template <typename F>
F diffuse_standard(const F& z_0, int n, const NoiseSchedule& schedule, const F& eps) {
  detail::check_step(n, schedule.T, "diffuse_standard");
  const double abar = schedule.alpha_bar(n);
  return lincomb(std::sqrt(abar), z_0, std::sqrt(1.0 - abar), eps);
}

/// z0_hat = (z_n - sqrt(1 - abar_n) eps_hat) / sqrt(abar_n).
template <typename F>
F predict_z0(const F& z_n, const F& eps_hat, int n, const NoiseSchedule& schedule) {
  detail::check_step(n, schedule.T, "predict_z0");
  const double abar = schedule.alpha_bar(n);
  const double inv = 1.0 / std::sqrt(abar);
  return lincomb(inv, z_n, -std::sqrt(1.0 - abar) * inv, eps_hat);
}

/// Solves the three-equation coefficient system with sigma = 0:
///   m = sqrt(1 - abar_to) / sqrt(1 - abar_from)
///   k = sqrt(abar_to) - m sqrt(abar_from)
/// The eta condition holds automatically for the relay weight law, which is
/// why the coefficients depend on the schedule alone.
inline SamplerCoefficients reverse_coefficients(int n_from, int n_to,
                                                const NoiseSchedule& schedule) {
  if (n_to >= n_from) {
    throw std::invalid_argument("reverse_coefficients: require n_to < n_from");
  }
  detail::check_step(n_to, schedule.T, "reverse_coefficients");
  detail::check_step(n_from, schedule.T, "reverse_coefficients");
  const double ab_from = schedule.alpha_bar(n_from);
  const double ab_to = schedule.alpha_bar(n_to);
  SamplerCoefficients c;
  c.n_from = n_from;
  c.n_to = n_to;
  c.m = std::sqrt(1.0 - ab_to) / std::sqrt(1.0 - ab_from);
  c.k = std::sqrt(ab_to) - c.m * std::sqrt(ab_from);
  c.sigma = 0.0;
  return c;
}

inline SamplerCoefficients reverse_coefficients(int n_from, int n_to,
                                                const NoiseSchedule& schedule,
                                                const RelayWeights& weights) {
  detail::check_step(n_from, weights.N, "reverse_coefficients");
  return reverse_coefficients(n_from, n_to, schedule);
}

/// Stochastic variant: m is scaled so that m^2 (1 - abar_from) + sigma^2 =
/// 1 - abar_to still holds, with sigma = fraction * sqrt(1 - abar_to).
/// Only the variance line of the system is preserved exactly; the residual
/// line holds only at fraction = 0.
inline SamplerCoefficients reverse_coefficients_stochastic(
    int n_from, int n_to, const NoiseSchedule& schedule, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("reverse_coefficients_stochastic: fraction in [0, 1)");
  }
  SamplerCoefficients c = reverse_coefficients(n_from, n_to, schedule);
  const double ab_from = schedule.alpha_bar(n_from);
  const double ab_to = schedule.alpha_bar(n_to);
  c.sigma = fraction * std::sqrt(1.0 - ab_to);
  c.m = std::sqrt((1.0 - ab_to) - c.sigma * c.sigma) / std::sqrt(1.0 - ab_from);
  c.k = std::sqrt(ab_to) - c.m * std::sqrt(ab_from);
  return c;
}

/// Residuals of the three coefficient equations for a step pair.
struct CoefficientResiduals {
  double z0_line = 0.0;
  double residual_line = 0.0;
  double variance_line = 0.0;
  double max() const {
    return std::max({std::abs(z0_line), std::abs(residual_line), std::abs(variance_line)});
  }
};

inline CoefficientResiduals coefficient_residuals(const SamplerCoefficients& c,
                                                  const NoiseSchedule& schedule,
                                                  const RelayWeights& weights) {
  const double ab_from = schedule.alpha_bar(c.n_from);
  const double ab_to = schedule.alpha_bar(c.n_to);
  CoefficientResiduals r;
  r.z0_line = c.k + c.m * std::sqrt(ab_from) - std::sqrt(ab_to);
  r.residual_line = c.m * std::sqrt(ab_from) * weights.eta(c.n_from) -
                    std::sqrt(ab_to) * weights.eta(c.n_to);
  r.variance_line = c.m * c.m * (1.0 - ab_from) + c.sigma * c.sigma - (1.0 - ab_to);
  return r;
}

/// z_to = k z0_hat + m z_n. The deterministic path; see the overload below
/// for sigma > 0.
template <typename F>
F reverse_step(const F& z_n, const F& z0_hat, const SamplerCoefficients& c) {
  require_same_shape(z_n.shape(), z0_hat.shape(), "reverse_step");
  return lincomb(c.k, z0_hat, c.m, z_n);
}

template <typename F>
F reverse_step(const F& z_n, const F& z0_hat, const SamplerCoefficients& c,
               const F& fresh_noise) {
  F mean = reverse_step(z_n, z0_hat, c);
  if (c.sigma == 0.0) return mean;
  return lincomb(1.0, mean, c.sigma, fresh_noise);
}

/// L indices evenly spaced on [1, N]: N - floor(i N / L) for i = 0..L-1.
inline StepPlan spaced_steps(int N, int L) {
  if (N < 1) throw std::invalid_argument("spaced_steps: N must be >= 1");
  if (L < 1 || L > N) throw std::invalid_argument("spaced_steps: require 1 <= L <= N");
  StepPlan plan;
  plan.steps.reserve(L);
  for (int i = 0; i < L; ++i) {
    const long long offset = static_cast<long long>(i) * N / L;
    plan.steps.push_back(N - static_cast<int>(offset));
  }
  return plan;
}

/// (1 - lambda_s) eps_base + lambda_s eps_cond, i.e. eps_base +
/// lambda_s (eps_cond - eps_base), written so that lambda_s = 0 and 1 return
/// the endpoints exactly.
template <typename F>
F cfg_blend(const F& eps_base, const F& eps_cond, double lambda_s) {
  if (!std::isfinite(lambda_s)) throw std::invalid_argument("cfg_blend: non-finite scale");
  require_same_shape(eps_base.shape(), eps_cond.shape(), "cfg_blend");
  return lincomb(1.0 - lambda_s, eps_base, lambda_s, eps_cond);
}

/// Conditional and base noise estimators. A null base is allowed when the
/// guidance scale is exactly 1.
template <typename F>
struct Denoisers {
  std::function<F(const F& z_n, const F& c, int n)> cond;
  std::function<F(const F& z_n, int n)> base;
};

template <typename F>
struct ReconstructOptions {
  double lambda_s = 1.0;
  /// Observer called with (n, z_n, z0_hat) at every plan step.
  std::function<void(int, const F&, const F&)> on_step;
};

/// Noise estimate at one step: skips the estimator whose blend weight is 0.
template <typename F>
F guided_estimate(const Denoisers<F>& den, const F& z_n, const F& c, int n,
                  double lambda_s) {
  if (lambda_s == 1.0) return den.cond(z_n, c, n);
  if (!den.base) throw std::invalid_argument("guided_estimate: base estimator required");
  if (lambda_s == 0.0) return den.base(z_n, n);
  return cfg_blend(den.base(z_n, n), den.cond(z_n, c, n), lambda_s);
}

/// Runs the plan from an explicit starting point. The last listed step emits
/// z0_hat directly.
template <typename F>
F reconstruct_from(const F& z_start, const F& c, const StepPlan& plan,
                   const NoiseSchedule& schedule, const Denoisers<F>& den,
                   const ReconstructOptions<F>& opts = {}) {
  if (plan.steps.empty()) throw std::invalid_argument("reconstruct: empty plan");
  F z = z_start;
  for (int i = 0; i < plan.size(); ++i) {
    const int n = plan.steps[i];
    detail::check_step(n, schedule.T, "reconstruct");
    F eps_hat = guided_estimate(den, z, c, n, opts.lambda_s);
    F z0_hat = predict_z0(z, eps_hat, n, schedule);
    if (opts.on_step) opts.on_step(n, z, z0_hat);
    if (i + 1 == plan.size()) return z0_hat;
    const int n_next = plan.steps[i + 1];
    if (n_next >= n) throw std::invalid_argument("reconstruct: plan not decreasing");
    z = reverse_step(z, z0_hat, reverse_coefficients(n, n_next, schedule));
  }
  return z;  // unreachable
}

/// Full relay reconstruction on plain tensors: draws the start noise from
/// `seed`, builds z_N from z_c and iterates the plan.
template <typename S>
Tensor<S> reconstruct(const Tensor<S>& z_c, const Tensor<S>& c, const StepPlan& plan,
                      const NoiseSchedule& schedule, double lambda_s, std::uint64_t seed,
                      const Denoisers<Tensor<S>>& den,
                      StartMode mode = StartMode::kRelay,
                      std::type_identity_t<std::function<void(int, const Tensor<S>&, const Tensor<S>&)>>
                          on_step = {}) {
  if (plan.steps.empty()) throw std::invalid_argument("reconstruct: empty plan");
  Rng rng(seed);
  Tensor<S> noise = rng.normal_tensor<S>(z_c.shape());
  const int horizon = plan.steps.front();
  Tensor<S> start = mode == StartMode::kRelay ? make_start(z_c, schedule, horizon, noise)
                                              : noise;
  ReconstructOptions<Tensor<S>> opts;
  opts.lambda_s = lambda_s;
  opts.on_step = std::move(on_step);
  return reconstruct_from(start, c, plan, schedule, den, opts);
}

}  // namespace rrd

#endif  // RRD_SAMPLER_HPP_
