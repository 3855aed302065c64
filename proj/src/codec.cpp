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


#include "rrd/codec.hpp"

#include <Eigen/Core>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

#include "rrd/image_io.hpp"

namespace rrd {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint32_t kMaxSide = 1u << 15;

int index_bits(int v) {
  int b = 0;
  while ((1 << b) < v) ++b;
  return b;
}

/// Positions in coding order: anchors first, then the rest, each NCHW.
std::vector<Eigen::Index> coding_order(const Shape& s) {
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(s.size()));
  for (int pass = 0; pass < 2; ++pass)
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int h = 0; h < s.h; ++h)
          for (int w = 0; w < s.w; ++w)
            if (is_anchor(h, w) == (pass == 0)) {
              order.push_back(((static_cast<Eigen::Index>(n) * s.c + c) * s.h + h) * s.w + w);
            }
  return order;
}

std::uint64_t symbol_seed(const std::vector<int>& idx, const std::vector<std::int32_t>& q) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  for (int i : idx) mix(static_cast<std::uint32_t>(i));
  for (std::int32_t v : q) mix(static_cast<std::uint32_t>(v));
  return h;
}

const CdfTable& table_for(float sigma) { return sigma_table(sigma_level(sigma)); }

struct Geometry {
  int padded_h, padded_w;
  LatentGeometry g;
};

Geometry geometry(std::uint32_t h, std::uint32_t w) {
  Geometry out;
  out.padded_h = round_up(static_cast<int>(h), Topology::kDownFactor);
  out.padded_w = round_up(static_cast<int>(w), Topology::kDownFactor);
  out.g = LatentGeometry::for_image(out.padded_h, out.padded_w);
  return out;
}

}  // namespace

int sigma_level(double sigma) {
  if (!std::isfinite(sigma)) throw std::invalid_argument("sigma_level: non-finite sigma");
  const double step = std::log(kSigmaMax / kSigmaMin) / (kSigmaLevels - 1);
  const double k = std::round(std::log(std::max(sigma, kSigmaMin) / kSigmaMin) / step);
  return static_cast<int>(std::min<double>(k, kSigmaLevels - 1));
}

double sigma_at_level(int level) {
  if (level < 0 || level >= kSigmaLevels) throw std::out_of_range("sigma_at_level");
  return kSigmaMin * std::pow(kSigmaMax / kSigmaMin, static_cast<double>(level) / (kSigmaLevels - 1));
}

const CdfTable& sigma_table(int level) {
  static std::array<CdfTable, kSigmaLevels> tables;
  static std::once_flag once;
  std::call_once(once, [] {
    for (int k = 0; k < kSigmaLevels; ++k) tables[k] = build_cdf(0.0, sigma_at_level(k), kSymbolMin, kSymbolMax);
  });
  if (level < 0 || level >= kSigmaLevels) throw std::out_of_range("sigma_table");
  return tables[level];
}

void pin_numerics() { Eigen::setCpuCacheSizes(32 * 1024, 1024 * 1024, 8 * 1024 * 1024); }

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
#endif
}

std::vector<double> bit_allocation(const LatentCode<float>& code) {
  const Shape s = code.y_hat.shape();
  std::vector<double> map(static_cast<std::size_t>(s.plane()), 0.0);
  for (int c = 0; c < s.c; ++c)
    for (Eigen::Index p = 0; p < s.plane(); ++p) {
      const Eigen::Index i = c * s.plane() + p;
      const CdfTable& t = table_for(code.params.sigma[i]);
      const int idx = t.index_of(code.offsets[i]);
      double bits = -std::log2(static_cast<double>(t.freq(idx)) / kProbTotal);
      if (idx == t.escape_index()) bits += 32.0;
      map[p] += bits;
    }
  return map;
}

Compressed compress(const FloatModel& m, const Tensor<float>& image, const CompressOptions& opts) {
  pin_numerics();
  const Shape is = image.shape();
  if (is.n != 1 || is.c != m.topo.image_channels) throw std::invalid_argument("compress: image shape " + is.str());
  if (is.h < 1 || is.w < 1 || static_cast<std::uint32_t>(is.h) > kMaxSide ||
      static_cast<std::uint32_t>(is.w) > kMaxSide) {
    throw std::invalid_argument("compress: unsupported image size " + is.str());
  }
  if (opts.steps < 1 || opts.steps > m.horizon() || opts.steps > 65535) {
    throw std::invalid_argument("compress: steps must lie in [1, " + std::to_string(m.horizon()) + "]");
  }
  const Geometry geo = geometry(static_cast<std::uint32_t>(is.h), static_cast<std::uint32_t>(is.w));

  Compressed out;
  out.padded_h = geo.padded_h;
  out.padded_w = geo.padded_w;
  const Tensor<float> padded = pad_reflect(image, geo.padded_h, geo.padded_w);
  out.code = analyze_latent(m, m.encode_image(padded));
  const LatentCode<float>& code = out.code;

  Bitstream b;
  {
    RangeEncoder enc;
    const auto v = static_cast<std::uint32_t>(m.codebook.size());
    for (int i : code.vq_indices) enc.encode_uniform(static_cast<std::uint32_t>(i), v);
    b.vq_payload = enc.finish();
    const std::vector<std::int32_t> sym(code.vq_indices.begin(), code.vq_indices.end());
    b.vq_checksum = section_checksum(b.vq_payload, sym);
  }
  {
    RangeEncoder enc;
    std::vector<std::int32_t> sym;
    for (Eigen::Index i : coding_order(code.y_hat.shape())) {
      const std::int32_t q = code.offsets[static_cast<std::size_t>(i)];
      if (opts.raw) {
        enc.encode_raw32(static_cast<std::uint32_t>(q));
      } else {
        enc.encode_symbol(table_for(code.params.sigma[i]), q);
      }
      sym.push_back(q);
    }
    b.y_payload = enc.finish();
    b.y_checksum = section_checksum(b.y_payload, sym);
  }

  BitstreamHeader& h = b.header;
  h.flags = opts.raw ? BitstreamHeader::kRawFlag : 0;
  h.width = static_cast<std::uint32_t>(is.w);
  h.height = static_cast<std::uint32_t>(is.h);
  h.model_hash = model_hash(m);
  h.lambda_id = lambda_id(m.lambda_r);
  h.steps = static_cast<std::uint16_t>(opts.steps);
  h.lambda_s_q16 = lambda_s_to_q16(opts.lambda_s);
  h.seed = opts.seed.value_or(symbol_seed(code.vq_indices, code.offsets));
  h.index_bits = static_cast<std::uint8_t>(index_bits(m.codebook.size()));
  out.bytes = write_bitstream(b);
  out.header = read_bitstream(out.bytes).header;
  return out;
}

Decompressed decompress(const FloatModel& m, std::span<const std::uint8_t> bytes,
                        const DecompressOptions& opts) {
  pin_numerics();
  const Bitstream b = read_bitstream(bytes);
  const BitstreamHeader& h = b.header;
  if (h.width > kMaxSide || h.height > kMaxSide) throw CorruptStream("bitstream: image too large");
  if (h.model_hash != model_hash(m)) {
    throw std::invalid_argument("decompress: bitstream was written by a different model");
  }
  if (h.index_bits != index_bits(m.codebook.size())) throw CorruptStream("bitstream: index width mismatch");

  Decompressed out;
  out.header = h;
  out.steps = opts.steps.value_or(h.steps);
  out.lambda_s = opts.lambda_s.value_or(h.lambda_s());
  if (out.steps < 1 || out.steps > m.horizon()) {
    throw std::invalid_argument("decompress: steps " + std::to_string(out.steps) + " outside [1, " +
                                std::to_string(m.horizon()) + "]");
  }
  const Geometry geo = geometry(h.height, h.width);
  const LatentGeometry& g = geo.g;

  // Side information.
  const Shape side{1, m.topo.side_channels, g.side_h, g.side_w};
  {
    RangeDecoder dec(b.vq_payload);
    const auto v = static_cast<std::uint32_t>(m.codebook.size());
    std::vector<std::int32_t> sym(static_cast<std::size_t>(side.plane()));
    for (auto& s : sym) s = static_cast<std::int32_t>(dec.decode_uniform(v));
    if (dec.position() != b.vq_payload.size() || section_checksum(b.vq_payload, sym) != b.vq_checksum) {
      throw CorruptStream("bitstream: VQ section checksum mismatch");
    }
    out.vq_indices.assign(sym.begin(), sym.end());
  }
  const Tensor<float> l_hat = vq_lookup(out.vq_indices, m.codebook.entries.value(), side);
  const Tensor<float> hyper =
      m.codec.hyper_synthesis(ad::constant(l_hat), g.y_h, g.y_w).value();

  // Two-pass y decode.
  const Shape ys{1, m.topo.y_channels, g.y_h, g.y_w};
  const std::vector<Eigen::Index> order = coding_order(ys);
  const std::size_t anchors = static_cast<std::size_t>(std::count_if(order.begin(), order.end(), [&](Eigen::Index i) {
    return is_anchor(static_cast<int>((i / ys.w) % ys.h), static_cast<int>(i % ys.w));
  }));
  out.offsets.assign(static_cast<std::size_t>(ys.size()), 0);
  out.y_hat = Tensor<float>(ys);
  std::vector<std::int32_t> sym;
  sym.reserve(order.size());
  RangeDecoder dec(b.y_payload);
  auto decode_range = [&](const EntropyParams<float>& p, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Eigen::Index i = order[k];
      const std::int32_t q = h.raw() ? static_cast<std::int32_t>(dec.decode_raw32())
                                     : dec.decode_symbol(table_for(p.sigma[i]));
      out.offsets[static_cast<std::size_t>(i)] = q;
      out.y_hat[i] = p.mu[i] + static_cast<float>(q);
      sym.push_back(q);
    }
  };
  const EntropyParams<float> anchor_params = m.context.predict(Tensor<float>(ys), hyper);
  decode_range(anchor_params, 0, anchors);
  const EntropyParams<float> params =
      merge_anchor_params(anchor_params, m.context.predict(out.y_hat, hyper));
  decode_range(params, anchors, order.size());
  if (dec.position() != b.y_payload.size() || section_checksum(b.y_payload, sym) != b.y_checksum) {
    throw CorruptStream("bitstream: y section checksum mismatch");
  }

  std::tie(out.c, out.z_c) = m.synthesis(out.y_hat, g.latent_h, g.latent_w);
  const Denoisers<Tensor<float>> den = opts.denoisers ? *opts.denoisers : m.denoisers();
  const StepPlan plan = spaced_steps(m.horizon(), out.steps);
  auto last = Clock::now();
  const auto start = last;
  out.z0_hat = reconstruct(out.z_c, out.c, plan, m.schedule, out.lambda_s, h.seed, den, m.diffusion.start,
                           [&](int, const Tensor<float>&, const Tensor<float>&) {
                             const auto now = Clock::now();
                             out.step_seconds.push_back(std::chrono::duration<double>(now - last).count());
                             last = now;
                           });
  out.denoise_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  out.image = crop_image(m.decode_latent(out.z0_hat), static_cast<int>(h.height), static_cast<int>(h.width));
  return out;
}

}  // namespace rrd
