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

#include "rrd/range_coder.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rrd/autodiff.hpp"

namespace rrd {
namespace {

constexpr std::uint32_t kTop = 1u << 24;

std::uint32_t zigzag(std::int32_t v) {
  return (static_cast<std::uint32_t>(v) << 1) ^ static_cast<std::uint32_t>(v >> 31);
}

std::int32_t unzigzag(std::uint32_t u) {
  return static_cast<std::int32_t>((u >> 1) ^ (~(u & 1) + 1));
}

void check_total(std::uint32_t total) {
  if (total == 0 || total > kProbTotal) throw std::invalid_argument("range coder: bad total");
}

}  // namespace

CdfTable build_cdf(double mu, double sigma, int s_min, int s_max) {
  if (s_max < s_min) throw std::invalid_argument("build_cdf: empty support");
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
    throw std::invalid_argument("build_cdf: invalid parameters");
  }
  const int nsym = s_max - s_min + 1;
  const int n = nsym + 1;
  if (n > static_cast<int>(kProbTotal)) throw std::invalid_argument("build_cdf: support too wide");

  std::vector<double> target(n);
  for (int i = 0; i < nsym; ++i) {
    target[i] = ad::gaussian_bin_mass((s_min + i) - mu, sigma) * kProbTotal;
  }
  const double lower_tail = ad::std_normal_cdf((s_min - 0.5 - mu) / sigma);
  const double upper_tail = ad::std_normal_cdf(-(s_max + 0.5 - mu) / sigma);
  target[nsym] = (lower_tail + upper_tail) * kProbTotal;

  std::vector<std::int64_t> freq(n);
  std::int64_t assigned = 0;
  for (int i = 0; i < n; ++i) {
    freq[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(target[i])));
    assigned += freq[i];
  }
  std::int64_t diff = static_cast<std::int64_t>(kProbTotal) - assigned;

  if (diff > 0) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return target[a] - freq[a] > target[b] - freq[b];
    });
    for (int k = 0; diff > 0; k = (k + 1) % n, --diff) ++freq[order[k]];
  }
  while (diff < 0) {
    int pick = -1;
    double worst = -1e300;
    for (int i = 0; i < n; ++i) {
      if (freq[i] <= 1) continue;
      const double excess = freq[i] - target[i];
      if (excess > worst) {
        worst = excess;
        pick = i;
      }
    }
    if (pick < 0) throw std::logic_error("build_cdf: cannot normalize");
    --freq[pick];
    ++diff;
  }

  CdfTable t;
  t.s_min = s_min;
  t.s_max = s_max;
  t.cdf.resize(n + 1);
  t.cdf[0] = 0;
  for (int i = 0; i < n; ++i) t.cdf[i + 1] = t.cdf[i] + static_cast<std::uint32_t>(freq[i]);
  return t;
}

CdfTable cdf_from_frequencies(int s_min, const std::vector<std::uint32_t>& freqs) {
  if (freqs.size() < 2) throw std::invalid_argument("cdf_from_frequencies: need symbols + escape");
  CdfTable t;
  t.s_min = s_min;
  t.s_max = s_min + static_cast<int>(freqs.size()) - 2;
  t.cdf.assign(freqs.size() + 1, 0);
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (freqs[i] == 0) throw std::invalid_argument("cdf_from_frequencies: zero frequency");
    t.cdf[i + 1] = t.cdf[i] + freqs[i];
  }
  if (t.cdf.back() != kProbTotal) throw std::invalid_argument("cdf_from_frequencies: bad total");
  return t;
}

// ---------------------------------------------------------------------------

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      const auto byte = static_cast<std::uint8_t>(temp + carry);
      // The leading byte is always zero: every interval nests inside the
      // initial [0, 2^32), so it carries no information and is not stored.
      if (first_) {
        first_ = false;
      } else {
        out_.push_back(byte);
      }
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(std::uint32_t start, std::uint32_t freq, std::uint32_t total) {
  check_total(total);
  if (freq == 0 || start + freq > total) throw std::invalid_argument("RangeEncoder: bad interval");
  const std::uint32_t r = range_ / total;
  low_ += static_cast<std::uint64_t>(r) * start;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_symbol(const CdfTable& table, int value) {
  const int idx = table.index_of(value);
  encode(table.cdf[idx], table.freq(idx), kProbTotal);
  if (idx == table.escape_index()) encode_raw32(zigzag(value));
}

void RangeEncoder::encode_uniform(std::uint32_t value, std::uint32_t total) {
  if (value >= total) throw std::invalid_argument("encode_uniform: value out of range");
  encode(value, 1, total);
}

void RangeEncoder::encode_raw32(std::uint32_t value) {
  encode_uniform(value >> 16, kProbTotal);
  encode_uniform(value & 0xFFFFu, kProbTotal);
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

// ---------------------------------------------------------------------------

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw CorruptStream("range decoder: truncated payload");
  return in_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::peek(std::uint32_t total) {
  check_total(total);
  const std::uint32_t r = range_ / total;
  const std::uint32_t v = code_ / r;
  if (v >= total) throw CorruptStream("range decoder: code outside interval");
  return v;
}

void RangeDecoder::consume(std::uint32_t start, std::uint32_t freq, std::uint32_t total) {
  const std::uint32_t r = range_ / total;
  code_ -= r * start;
  range_ = r * freq;
  normalize();
}

int RangeDecoder::decode_symbol(const CdfTable& table) {
  const std::uint32_t v = peek(kProbTotal);
  const auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), v);
  const int idx = static_cast<int>(it - table.cdf.begin()) - 1;
  consume(table.cdf[idx], table.freq(idx), kProbTotal);
  if (idx == table.escape_index()) return unzigzag(decode_raw32());
  return table.s_min + idx;
}

std::uint32_t RangeDecoder::decode_uniform(std::uint32_t total) {
  const std::uint32_t v = peek(total);
  consume(v, 1, total);
  return v;
}

std::uint32_t RangeDecoder::decode_raw32() {
  const std::uint32_t hi = decode_uniform(kProbTotal);
  const std::uint32_t lo = decode_uniform(kProbTotal);
  return (hi << 16) | lo;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_stream(std::span<const std::int32_t> symbols,
                                        std::span<const CdfTable* const> tables) {
  if (symbols.size() != tables.size()) throw std::invalid_argument("encode_stream: table count");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(*tables[i], symbols[i]);
  return enc.finish();
}

std::vector<std::int32_t> decode_stream(std::span<const std::uint8_t> bytes,
                                        std::span<const CdfTable* const> tables,
                                        std::size_t count) {
  if (tables.size() != count) throw std::invalid_argument("decode_stream: table count");
  RangeDecoder dec(bytes);
  std::vector<std::int32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode_symbol(*tables[i]);
  if (dec.position() != bytes.size()) throw CorruptStream("range decoder: trailing bytes");
  return out;
}

double table_bits(std::span<const std::int32_t> symbols, std::span<const CdfTable* const> tables) {
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = *tables[i];
    const int idx = t.index_of(symbols[i]);
    bits -= std::log2(static_cast<double>(t.freq(idx)) / kProbTotal);
    if (idx == t.escape_index()) bits += 32.0;
  }
  return bits;
}

std::uint32_t section_checksum(std::span<const std::uint8_t> payload,
                               std::span<const std::int32_t> symbols) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  std::vector<std::uint8_t> le;
  le.reserve(symbols.size() * 4);
  for (std::int32_t s : symbols) {
    const auto u = static_cast<std::uint32_t>(s);
    for (int b = 0; b < 4; ++b) le.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  crc = crc32(crc, le.data(), static_cast<uInt>(le.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace rrd
