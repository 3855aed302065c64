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


#ifndef RRD_BITSTREAM_HPP_
#define RRD_BITSTREAM_HPP_

// Container layout of a compressed image. Field-by-field description with
// byte offsets: docs/FORMATS.md.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rrd {

struct BitstreamHeader {
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kSize = 50;
  /// flags bit 0: y offsets stored as raw 32-bit words instead of modeled.
  static constexpr std::uint8_t kRawFlag = 1;

  std::uint8_t version = kVersion;
  std::uint8_t flags = 0;
  std::uint32_t width = 0;   // before padding
  std::uint32_t height = 0;
  std::uint64_t model_hash = 0;
  std::uint8_t lambda_id = 255;  // position in the rate grid, 255 = other
  std::uint16_t steps = 2;
  std::int32_t lambda_s_q16 = 1 << 16;  // guidance scale, 16.16 fixed point
  std::uint64_t seed = 0;
  std::uint8_t index_bits = 0;  // ceil(log2 V); informative, V comes from the model
  std::uint32_t vq_bytes = 0;   // VQ payload length, excluding its checksum
  std::uint32_t y_bytes = 0;    // y payload length, excluding its checksum

  double lambda_s() const { return lambda_s_q16 / 65536.0; }
  bool raw() const { return (flags & kRawFlag) != 0; }
  /// Size of the whole file these fields describe.
  std::size_t total_bytes() const { return kSize + vq_bytes + 4 + y_bytes + 4; }
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> vq_payload;
  std::uint32_t vq_checksum = 0;
  std::vector<std::uint8_t> y_payload;
  std::uint32_t y_checksum = 0;
};

/// Serializes header (with its CRC-32) and both sections. Section lengths in
/// the header are taken from the payload vectors.
std::vector<std::uint8_t> write_bitstream(const Bitstream& b);

/// Parses and validates magic, version, header CRC and total length. Throws
/// CorruptStream on any mismatch. Section checksums are verified by the
/// decoder once the symbols are known.
Bitstream read_bitstream(std::span<const std::uint8_t> bytes);

/// Fixed-point guidance scale; throws when out of the representable range.
std::int32_t lambda_s_to_q16(double lambda_s);

/// Position of lambda_r in {0.1, 0.25, 0.5, 1, 2}, or 255.
std::uint8_t lambda_id(double lambda_r);

}  // namespace rrd

#endif  // RRD_BITSTREAM_HPP_
