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


#ifndef RRD_CODEC_HPP_
#define RRD_CODEC_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rrd/bitstream.hpp"
#include "rrd/model.hpp"
#include "rrd/range_coder.hpp"

namespace rrd {

/// Every y offset is coded against a discretized zero-mean Gaussian whose
/// sigma is snapped to one of kSigmaLevels log-spaced levels in
/// [kSigmaMin, kSigmaMax]. Tables cover [kSymbolMin, kSymbolMax] plus escape.
inline constexpr int kSymbolMin = -64;
inline constexpr int kSymbolMax = 63;
inline constexpr int kSigmaLevels = 128;
inline constexpr double kSigmaMax = 64.0;

int sigma_level(double sigma);
double sigma_at_level(int level);
const CdfTable& sigma_table(int level);

/// Fixes Eigen's matrix-product blocking sizes instead of deriving them from
/// the host's cache sizes, so float results do not depend on the machine a
/// given binary runs on.
void pin_numerics();

/// Process-wide allocator policy for repeated coding: keeps freed memory in
/// the heap instead of returning it to the OS, so each decode does not
/// page-fault its working set back in. Call once at startup; a no-op
/// outside glibc.
void configure_allocator();

struct CompressOptions {
  int steps = 2;
  double lambda_s = 1.0;
  std::optional<std::uint64_t> seed;  // default: derived from the coded symbols
  bool raw = false;                   // y offsets as raw 32-bit words
};

struct Compressed {
  std::vector<std::uint8_t> bytes;
  BitstreamHeader header;
  LatentCode<float> code;
  int padded_h = 0;
  int padded_w = 0;
};

/// Pads reflectively to a multiple of the downsampling factor, then encodes.
/// `image` is (1, C, H, W) in [0, 1].
Compressed compress(const FloatModel& m, const Tensor<float>& image,
                    const CompressOptions& opts = {});

struct DecompressOptions {
  std::optional<int> steps;
  std::optional<double> lambda_s;
  /// Replaces the model's denoisers, e.g. with an oracle in tests.
  const Denoisers<Tensor<float>>* denoisers = nullptr;
};

struct Decompressed {
  Tensor<float> image;  // cropped to the recorded size
  BitstreamHeader header;
  std::vector<int> vq_indices;
  std::vector<std::int32_t> offsets;  // NCHW order
  Tensor<float> y_hat;
  Tensor<float> c;
  Tensor<float> z_c;
  Tensor<float> z0_hat;
  int steps = 0;
  double lambda_s = 1.0;
  double denoise_seconds = 0.0;
  std::vector<double> step_seconds;
};

/// Throws CorruptStream for malformed or corrupted input and
/// std::invalid_argument for a model mismatch or out-of-range override.
Decompressed decompress(const FloatModel& m, std::span<const std::uint8_t> bytes,
                        const DecompressOptions& opts = {});

inline double bits_per_pixel(std::size_t bytes, std::uint32_t w, std::uint32_t h) {
  return 8.0 * static_cast<double>(bytes) / (static_cast<double>(w) * h);
}

/// Header-derived size in bits per pixel; equals the file-size figure.
inline double header_bpp(const BitstreamHeader& h) {
  return bits_per_pixel(h.total_bytes(), h.width, h.height);
}

/// Bits the coder's tables assign to each y element, summed over channels,
/// as a (y_h, y_w) row-major map.
std::vector<double> bit_allocation(const LatentCode<float>& code);

}  // namespace rrd

#endif  // RRD_CODEC_HPP_
