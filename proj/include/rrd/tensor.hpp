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

#ifndef RRD_TENSOR_HPP_
#define RRD_TENSOR_HPP_

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace rrd {

/// Extent of a dense NCHW array.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(n) * c * h * w;
  }
  Eigen::Index plane() const { return static_cast<Eigen::Index>(h) * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

inline void require_same_shape(const Shape& a, const Shape& b,
                               const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.str() + " vs " + b.str());
  }
}

/// Dense 4-D array (batch, channel, height, width), row-major, backed by an
/// Eigen column array so whole-tensor arithmetic stays expression based.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(const Shape& shape)
      : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(const Shape& shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw std::invalid_argument("Tensor: data size does not match shape " +
                                  shape_.str());
    }
  }

  static Tensor Zero(const Shape& shape) { return Tensor(shape); }
  static Tensor Constant(const Shape& shape, Scalar value) {
    return Tensor(shape, Array::Constant(shape.size(), value));
  }

  const Shape& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Eigen::Index index(int n, int c, int h, int w) const {
    return ((static_cast<Eigen::Index>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w + w;
  }
  Scalar& operator()(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  Scalar operator()(int n, int c, int h, int w) const {
    return data_[index(n, c, h, w)];
  }
  Scalar& operator[](Eigen::Index i) { return data_[i]; }
  Scalar operator[](Eigen::Index i) const { return data_[i]; }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape shape_;
  Array data_;
};

using LatentTensor = Tensor<float>;

template <typename S>
Tensor<S> operator+(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "operator+");
  return Tensor<S>(a.shape(), a.array() + b.array());
}

template <typename S>
Tensor<S> operator-(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "operator-");
  return Tensor<S>(a.shape(), a.array() - b.array());
}

template <typename S>
Tensor<S> operator*(S k, const Tensor<S>& a) {
  return Tensor<S>(a.shape(), k * a.array());
}

/// a*x + b*y with coefficients supplied in double and applied in the tensor's
/// scalar type. The sampler equations are written against this primitive so
/// they run unchanged on plain tensors and on autodiff variables.
template <typename S>
Tensor<S> lincomb(double a, const Tensor<S>& x, double b, const Tensor<S>& y) {
  require_same_shape(x.shape(), y.shape(), "lincomb");
  return Tensor<S>(x.shape(),
                   static_cast<S>(a) * x.array() + static_cast<S>(b) * y.array());
}

template <typename S>
Tensor<S> scale(double a, const Tensor<S>& x) {
  return Tensor<S>(x.shape(), static_cast<S>(a) * x.array());
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  if (a.size() == 0) return 0.0;
  return (a.array().template cast<double>() - b.array().template cast<double>())
      .abs()
      .maxCoeff();
}

template <typename S>
double sum_squares(const Tensor<S>& a) {
  return a.array().template cast<double>().square().sum();
}

}  // namespace rrd

#endif  // RRD_TENSOR_HPP_
