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

#include "rrd/model.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "json_convert.hpp"

namespace rrd {
namespace {

constexpr char kMagic[4] = {'R', 'R', 'D', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(b, u);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t u = u32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string to_string(StartMode mode) {
  return mode == StartMode::kRelay ? "relay" : "pure_noise";
}

StartMode parse_start_mode(const std::string& name) {
  if (name == "relay") return StartMode::kRelay;
  if (name == "pure_noise") return StartMode::kPureNoise;
  throw std::invalid_argument("unknown start mode '" + name + "'");
}

std::string topology_json(const Topology& t, const DiffusionConfig& d) {
  return nlohmann::json{{"topology", topology_to_json(t)}, {"diffusion", diffusion_to_json(d)}}
      .dump();
}

std::uint64_t model_hash(const FloatModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string desc = topology_json(model.topo, model.diffusion);
  h = fnv1a(h, desc.data(), desc.size());
  for (const auto* store : model.stores()) {
    for (const auto& [name, v] : store->entries()) {
      h = fnv1a(h, name.data(), name.size());
      std::vector<std::uint8_t> bytes;
      bytes.reserve(v.value().size() * 4);
      for (Eigen::Index i = 0; i < v.value().size(); ++i) put_f32(bytes, v.value()[i]);
      h = fnv1a(h, bytes.data(), bytes.size());
    }
  }
  return h;
}

void save_checkpoint(const std::string& path, const FloatModel& model) {
  std::vector<std::uint8_t> b(kMagic, kMagic + 4);
  put_u32(b, kCheckpointVersion);
  nlohmann::json meta{{"topology", topology_to_json(model.topo)},
                      {"diffusion", diffusion_to_json(model.diffusion)},
                      {"stage", model.stage},
                      {"lambda_r", model.lambda_r},
                      {"config_hash", model.config_hash}};
  const std::string js = meta.dump();
  put_u32(b, static_cast<std::uint32_t>(js.size()));
  b.insert(b.end(), js.begin(), js.end());

  std::uint32_t count = 0;
  for (const auto* store : model.stores()) count += static_cast<std::uint32_t>(store->entries().size());
  put_u32(b, count);
  for (const auto* store : model.stores()) {
    for (const auto& [name, v] : store->entries()) {
      put_u16(b, static_cast<std::uint16_t>(name.size()));
      b.insert(b.end(), name.begin(), name.end());
      const Shape s = v.shape();
      for (int d : {s.n, s.c, s.h, s.w}) put_u32(b, static_cast<std::uint32_t>(d));
      for (Eigen::Index i = 0; i < v.value().size(); ++i) put_f32(b, v.value()[i]);
    }
  }
  put_u32(b, static_cast<std::uint32_t>(crc32(0L, b.data(), static_cast<uInt>(b.size()))));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

std::unique_ptr<FloatModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < 16 || std::memcmp(b.data(), kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  {
    std::vector<std::uint8_t> last(b.end() - 4, b.end());
    Reader r(last);
    const std::uint32_t stored = r.u32();
    const auto crc = static_cast<std::uint32_t>(crc32(0L, b.data(), static_cast<uInt>(b.size() - 4)));
    if (stored != crc) throw std::runtime_error("checkpoint: checksum mismatch in " + path);
  }
  Reader r(b);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto meta = nlohmann::json::parse(r.str(r.u32()));
  auto model = std::make_unique<FloatModel>(topology_from_json(meta.at("topology")),
                                            diffusion_from_json(meta.at("diffusion")), 0);
  model->stage = meta.at("stage");
  model->lambda_r = meta.at("lambda_r");
  model->config_hash = meta.at("config_hash");

  const std::uint32_t count = r.u32();
  std::size_t expected = 0;
  for (const auto* store : model->stores()) expected += store->entries().size();
  if (count != expected) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    nn::ParamStore<float>* owner = nullptr;
    for (auto* store : model->stores()) {
      if (store->contains(name)) owner = store;
    }
    if (!owner) throw std::runtime_error("checkpoint: unknown parameter " + name);
    ad::Var<float>& v = owner->at(name);
    if (!(v.shape() == s)) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    Tensor<float>& t = v.mutable_value();
    for (Eigen::Index k = 0; k < t.size(); ++k) t[k] = r.f32();
  }
  if (r.pos() + 4 != b.size()) throw std::runtime_error("checkpoint: trailing bytes");
  model->codebook.reset_usage();
  return model;
}

}  // namespace rrd
