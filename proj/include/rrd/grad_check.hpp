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

#ifndef RRD_GRAD_CHECK_HPP_
#define RRD_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrd/autodiff.hpp"
#include "rrd/random.hpp"

namespace rrd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_param;
  int checked = 0;
};

/// Compares analytic gradients of `loss` with central differences
/// (L(p + eps) - L(p - eps)) / 2 eps on up to `samples_per_param` randomly
/// chosen entries of each named parameter. The relative error of one entry
/// is |a - n| / max(|a|, |n|, 1e-8).
template <typename S>
GradCheckResult grad_check(const std::function<ad::Var<S>()>& loss,
                           const std::vector<std::pair<std::string, ad::Var<S>>>& params,
                           double epsilon, int samples_per_param = 8, std::uint64_t seed = 7) {
  for (const auto& [name, p] : params) {
    ad::Var<S> v = p;
    v.zero_grad();
  }
  const ad::Var<S> l0 = loss();
  if (!std::isfinite(static_cast<double>(l0.item()))) {
    throw std::runtime_error("grad_check: non-finite loss");
  }
  ad::backward(l0);

  Rng rng(seed);
  GradCheckResult res;
  for (const auto& [name, p] : params) {
    ad::Var<S> v = p;
    const Tensor<S> analytic = v.grad();
    const Eigen::Index size = v.value().size();
    const int count = static_cast<int>(std::min<Eigen::Index>(samples_per_param, size));
    for (int k = 0; k < count; ++k) {
      const Eigen::Index i = count == size ? k : rng.uniform_int(0, static_cast<int>(size - 1));
      const S saved = v.value()[i];
      v.mutable_value()[i] = static_cast<S>(saved + epsilon);
      const double plus = loss().item();
      v.mutable_value()[i] = static_cast<S>(saved - epsilon);
      const double minus = loss().item();
      v.mutable_value()[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw std::runtime_error("grad_check: non-finite loss");
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
        res.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace rrd

#endif  // RRD_GRAD_CHECK_HPP_
