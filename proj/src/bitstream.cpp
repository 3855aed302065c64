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


#include "rrd/bitstream.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rrd/range_coder.hpp"

namespace rrd {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'R', 'D', 'E', 'I'};
constexpr std::array<double, 5> kRateGrid{0.1, 0.25, 0.5, 1.0, 2.0};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  using U = std::make_unsigned_t<T>;
  const auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get() {
    using U = std::make_unsigned_t<T>;
    if (pos_ + sizeof(T) > b_.size()) throw CorruptStream("bitstream: truncated header");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> b) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(c, b.data(), static_cast<uInt>(b.size())));
}

}  // namespace

std::vector<std::uint8_t> write_bitstream(const Bitstream& b) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  const BitstreamHeader& h = b.header;
  put(out, h.version);
  put(out, h.flags);
  put(out, h.width);
  put(out, h.height);
  put(out, h.model_hash);
  put(out, h.lambda_id);
  put(out, h.steps);
  put(out, h.lambda_s_q16);
  put(out, h.seed);
  put(out, h.index_bits);
  put(out, static_cast<std::uint32_t>(b.vq_payload.size()));
  put(out, static_cast<std::uint32_t>(b.y_payload.size()));
  put(out, crc(out));
  if (out.size() != BitstreamHeader::kSize) throw std::logic_error("bitstream: header size");
  out.insert(out.end(), b.vq_payload.begin(), b.vq_payload.end());
  put(out, b.vq_checksum);
  out.insert(out.end(), b.y_payload.begin(), b.y_payload.end());
  put(out, b.y_checksum);
  return out;
}

Bitstream read_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < BitstreamHeader::kSize) throw CorruptStream("bitstream: shorter than header");
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (bytes[i] != kMagic[i]) throw CorruptStream("bitstream: bad magic");
  }
  Cursor c(bytes.subspan(kMagic.size()));
  Bitstream b;
  BitstreamHeader& h = b.header;
  h.version = c.get<std::uint8_t>();
  if (h.version != BitstreamHeader::kVersion) {
    throw CorruptStream("bitstream: unsupported version " + std::to_string(h.version));
  }
  h.flags = c.get<std::uint8_t>();
  h.width = c.get<std::uint32_t>();
  h.height = c.get<std::uint32_t>();
  h.model_hash = c.get<std::uint64_t>();
  h.lambda_id = c.get<std::uint8_t>();
  h.steps = c.get<std::uint16_t>();
  h.lambda_s_q16 = c.get<std::int32_t>();
  h.seed = c.get<std::uint64_t>();
  h.index_bits = c.get<std::uint8_t>();
  h.vq_bytes = c.get<std::uint32_t>();
  h.y_bytes = c.get<std::uint32_t>();
  const std::size_t crc_at = kMagic.size() + c.pos();
  const std::uint32_t stored = c.get<std::uint32_t>();
  if (crc(bytes.first(crc_at)) != stored) throw CorruptStream("bitstream: header checksum mismatch");
  if ((h.flags & ~BitstreamHeader::kRawFlag) != 0) throw CorruptStream("bitstream: unknown flags");
  if (h.width == 0 || h.height == 0) throw CorruptStream("bitstream: empty image");
  if (bytes.size() != h.total_bytes()) throw CorruptStream("bitstream: length mismatch");

  auto word = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  std::size_t at = BitstreamHeader::kSize;
  b.vq_payload.assign(bytes.begin() + at, bytes.begin() + at + h.vq_bytes);
  at += h.vq_bytes;
  b.vq_checksum = word(at);
  at += 4;
  b.y_payload.assign(bytes.begin() + at, bytes.begin() + at + h.y_bytes);
  at += h.y_bytes;
  b.y_checksum = word(at);
  return b;
}

std::int32_t lambda_s_to_q16(double lambda_s) {
  const double q = std::round(lambda_s * 65536.0);
  if (!std::isfinite(q) || std::abs(q) > 2147483647.0) {
    throw std::invalid_argument("guidance scale out of range");
  }
  return static_cast<std::int32_t>(q);
}

std::uint8_t lambda_id(double lambda_r) {
  for (std::size_t i = 0; i < kRateGrid.size(); ++i) {
    if (std::abs(kRateGrid[i] - lambda_r) < 1e-12) return static_cast<std::uint8_t>(i);
  }
  return 255;
}

}  // namespace rrd
