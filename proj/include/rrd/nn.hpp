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

#ifndef RRD_NN_HPP_
#define RRD_NN_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrd/autodiff.hpp"
#include "rrd/random.hpp"
#include "rrd/tensor.hpp"

namespace rrd::nn {

using ad::Var;

/// Named parameter tensors of one network group. Each entry is a persistent
/// leaf variable; forward passes reference it directly, so gradients land on
/// the entry after ad::backward.
template <typename S>
class ParamStore {
 public:
  explicit ParamStore(std::string prefix = {}) : prefix_(std::move(prefix)) {}

  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Var<S> add(const std::string& name, Tensor<S> init) {
    const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
    if (index_.count(full)) throw std::invalid_argument("ParamStore: duplicate " + full);
    Var<S> v(std::move(init), trainable_);
    index_[full] = entries_.size();
    entries_.emplace_back(full, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<S>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Var<S>>>& entries() { return entries_; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Var<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
    return entries_[it->second].second;
  }

  /// Frozen stores create leaves that never receive gradients.
  void set_trainable(bool on) {
    trainable_ = on;
    for (auto& [name, v] : entries_) {
      v.set_requires_grad(on);
      v.zero_grad();
    }
  }
  bool trainable() const { return trainable_; }

  void zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.value().size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [name, v] : entries_) {
      if (!v.value().all_finite()) return false;
    }
    return true;
  }

  /// Copies values by name from a store of possibly different scalar type.
  template <typename T>
  void copy_values_from(const ParamStore<T>& other) {
    for (const auto& [name, v] : other.entries()) {
      at(name).mutable_value() = v.value().template cast<S>();
    }
  }

 private:
  std::string prefix_;
  bool trainable_ = true;
  std::vector<std::pair<std::string, Var<S>>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// He-normal weights for a (cout, cin, k, k) kernel.
template <typename S>
Tensor<S> he_normal(const Shape& shape, Rng& rng, double gain = 1.0) {
  const double fan_in = static_cast<double>(shape.c) * shape.h * shape.w;
  const double std = gain * std::sqrt(2.0 / fan_in);
  Tensor<S> t(shape);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(std * rng.normal());
  return t;
}

template <typename S>
struct Conv2d {
  Var<S> weight;
  Var<S> bias;
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  /// gain = 0 gives a zero-initialized layer.
  Conv2d(ParamStore<S>& store, const std::string& name, int cin, int cout, int k,
         int stride_, Rng& rng, double gain = 1.0)
      : stride(stride_), pad(k / 2) {
    weight = store.add(name + ".weight", gain == 0.0 ? Tensor<S>({cout, cin, k, k})
                                                     : he_normal<S>({cout, cin, k, k}, rng, gain));
    bias = store.add(name + ".bias", Tensor<S>({1, cout, 1, 1}));
  }

  Var<S> operator()(const Var<S>& x) const { return ad::conv2d(x, weight, bias, stride, pad); }
  int out_channels() const { return weight.shape().n; }
};

/// Dense layer over (N, F, 1, 1) features.
template <typename S>
struct Linear {
  Conv2d<S> conv;
  Linear() = default;
  Linear(ParamStore<S>& store, const std::string& name, int fin, int fout, Rng& rng,
         double gain = 1.0)
      : conv(store, name, fin, fout, 1, 1, rng, gain) {}
  Var<S> operator()(const Var<S>& x) const { return conv(x); }
};

/// Adaptive moment estimation over every entry of a set of stores.
template <typename S>
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::vector<ParamStore<S>*> stores, Options opts) : opts_(opts) {
    for (ParamStore<S>* s : stores) {
      for (auto& [name, v] : s->entries()) {
        params_.push_back(v);
        m_.push_back(Eigen::ArrayXd::Zero(v.value().size()));
        v_.push_back(Eigen::ArrayXd::Zero(v.value().size()));
      }
    }
  }

  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  long long steps() const { return t_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Rescales gradients so their global L2 norm is at most max_norm; returns
  /// the norm before clipping.
  double clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto& p : params_) {
      if (p.node()->grad.empty()) continue;
      sq += p.node()->grad.array().template cast<double>().square().sum();
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
      const S f = static_cast<S>(max_norm / norm);
      for (auto& p : params_) {
        if (!p.node()->grad.empty()) p.node()->grad.array() *= f;
      }
    }
    return norm;
  }

  void step() {
    ++t_;
    const double b1t = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double b2t = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var<S>& p = params_[i];
      if (p.node()->grad.empty()) continue;
      const Eigen::ArrayXd g = p.node()->grad.array().template cast<double>();
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.square();
      const Eigen::ArrayXd upd = opts_.lr * (m_[i] / b1t) / ((v_[i] / b2t).sqrt() + opts_.eps);
      p.mutable_value().array() -= upd.template cast<S>();
    }
  }

  /// Clears moment estimates of rows [row_begin, row_end) of parameter
  /// `name`, used after reseeding codebook entries.
  void reset_rows(const Var<S>& param, Eigen::Index begin, Eigen::Index count) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].node() != param.node()) continue;
      m_[i].segment(begin, count).setZero();
      v_[i].segment(begin, count).setZero();
    }
  }

 private:
  Options opts_;
  std::vector<Var<S>> params_;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
  long long t_ = 0;
};

/// Sinusoidal embedding of integer steps, one row per batch element.
template <typename S>
Tensor<S> timestep_embedding(const std::vector<int>& steps, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("timestep_embedding: even dim >= 2");
  const int half = dim / 2;
  Tensor<S> out({static_cast<int>(steps.size()), dim, 1, 1});
  for (std::size_t b = 0; b < steps.size(); ++b) {
    const int n = steps[b];
    if (n < 0) throw std::invalid_argument("timestep_embedding: negative step");
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      out[static_cast<Eigen::Index>(b) * dim + i] = static_cast<S>(std::sin(n * freq));
      out[static_cast<Eigen::Index>(b) * dim + half + i] = static_cast<S>(std::cos(n * freq));
    }
  }
  return out;
}

}  // namespace rrd::nn

#endif  // RRD_NN_HPP_
