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

#ifndef RRD_RANGE_CODER_HPP_
#define RRD_RANGE_CODER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rrd {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;
inline constexpr int kSupportMin = -64;
inline constexpr int kSupportMax = 63;

/// Raised when a payload cannot be decoded: truncated input, an arithmetic
/// state that no encoder could have produced, or a checksum mismatch.
class CorruptStream : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quantized cumulative frequencies over symbols s_min..s_max followed by one
/// escape symbol. cdf has (s_max - s_min + 3) entries, cdf[0] = 0 and
/// cdf.back() = kProbTotal; every symbol including escape has mass >= 1.
struct CdfTable {
  int s_min = 0;
  int s_max = -1;
  std::vector<std::uint32_t> cdf;

  int symbol_count() const { return s_max - s_min + 1; }
  int escape_index() const { return symbol_count(); }
  std::uint32_t freq(int index) const { return cdf[index + 1] - cdf[index]; }
  /// Table index of a value, or the escape index when outside the support.
  int index_of(int value) const {
    return (value < s_min || value > s_max) ? escape_index() : value - s_min;
  }
  /// Model probability of a value (escaped values count only the escape mass).
  double probability(int value) const {
    return static_cast<double>(freq(index_of(value))) / kProbTotal;
  }
};

/// Discretized N(mu, sigma^2) over unit bins centred at integers of
/// [s_min, s_max]; tail mass outside the support goes to the escape symbol.
/// Frequencies are assigned by largest remainder with a floor of one count.
CdfTable build_cdf(double mu, double sigma, int s_min = kSupportMin, int s_max = kSupportMax);

/// Table from explicit integer frequencies (must sum to kProbTotal, each >= 1).
CdfTable cdf_from_frequencies(int s_min, const std::vector<std::uint32_t>& freqs);

/// Byte-oriented range encoder with a 64-bit low register, 32-bit range and
/// carry propagation through a pending byte run.
class RangeEncoder {
 public:
  /// Codes the interval [start, start + freq) out of `total` (total <= 2^16).
  void encode(std::uint32_t start, std::uint32_t freq, std::uint32_t total);
  void encode_symbol(const CdfTable& table, int value);
  void encode_uniform(std::uint32_t value, std::uint32_t total);
  void encode_raw32(std::uint32_t value);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool first_ = true;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  /// Frequency slot of the next symbol under `total`.
  std::uint32_t peek(std::uint32_t total);
  void consume(std::uint32_t start, std::uint32_t freq, std::uint32_t total);

  int decode_symbol(const CdfTable& table);
  std::uint32_t decode_uniform(std::uint32_t total);
  std::uint32_t decode_raw32();

  /// Bytes consumed so far; equals the input size after a clean decode.
  std::size_t position() const { return pos_; }

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t slot_ = 0;
};

/// Codes one value per table; out-of-support values use escape + raw 32 bits.
std::vector<std::uint8_t> encode_stream(std::span<const std::int32_t> symbols,
                                        std::span<const CdfTable* const> tables);
std::vector<std::int32_t> decode_stream(std::span<const std::uint8_t> bytes,
                                        std::span<const CdfTable* const> tables,
                                        std::size_t count);

/// Ideal code length -sum log2 p(s) under the quantized tables, counting
/// escapes as the escape mass plus 32 raw bits.
double table_bits(std::span<const std::int32_t> symbols, std::span<const CdfTable* const> tables);

/// CRC-32 over a payload followed by the little-endian bytes of its decoded
/// symbols. Covers both, so any altered payload byte is caught even when it
/// does not change the decoded values.
std::uint32_t section_checksum(std::span<const std::uint8_t> payload,
                               std::span<const std::int32_t> symbols);

}  // namespace rrd

#endif  // RRD_RANGE_CODER_HPP_
