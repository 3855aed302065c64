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


#ifndef RRD_IMAGE_IO_HPP_
#define RRD_IMAGE_IO_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit PNG (grey, grey+alpha, RGB or RGBA; alpha dropped) or a
/// binary PPM (P6, maxval 255) into a (1, 3, H, W) tensor in [0, 1].
Tensor<float> read_image(const std::string& path);

/// Writes a (1, 3, H, W) tensor as PNG or PPM chosen by extension. Values are
/// clamped to [0, 1], scaled by 255 and rounded half away from zero.
void write_image(const std::string& path, const Tensor<float>& image);

/// Single-channel 8-bit PNG from row-major values in [0, 255].
void write_gray_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& px);

/// The 8-bit code a value in [0, 1] is written as.
std::uint8_t to_byte(float v);

/// Reflect-pads (1, C, H, W) to (1, C, ph, pw) with ph >= H, pw >= W. Indices
/// past the edge mirror without repeating the edge sample.
Tensor<float> pad_reflect(const Tensor<float>& x, int ph, int pw);

/// Top-left (h, w) window.
Tensor<float> crop_image(const Tensor<float>& x, int h, int w);

/// Smallest multiple of `factor` that is >= v.
inline int round_up(int v, int factor) { return (v + factor - 1) / factor * factor; }

}  // namespace rrd

#endif  // RRD_IMAGE_IO_HPP_
