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


#include "rrd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json_convert.hpp"

namespace rrd {
namespace {

using nlohmann::json;

// One row per field: JSON key plus accessors on TrainConfig.
template <typename F>
void for_each_field(TrainConfig& c, F&& f) {
  f("seed", c.seed);
  f("corpus_seed", c.corpus_seed);
  f("train_images", c.train_images);
  f("heldout_images", c.heldout_images);
  f("image_size", c.image_size);
  f("ae_iters", c.ae_iters);
  f("ae_batch", c.ae_batch);
  f("ae_lr", c.ae_lr);
  f("ae_target_mse", c.ae_target_mse);
  f("base_iters", c.base_iters);
  f("base_batch", c.base_batch);
  f("base_lr", c.base_lr);
  f("lambda_r", c.lambda_r);
  f("lambda_perc", c.lambda_perc);
  f("L", c.L);
  f("batch", c.batch);
  f("warmup_iters", c.warmup_iters);
  f("stage1_iters", c.stage1_iters);
  f("stage1_lr", c.stage1_lr);
  f("stage2_iters", c.stage2_iters);
  f("stage2_lr", c.stage2_lr);
  f("grad_clip", c.grad_clip);
  f("reseed_interval", c.reseed_interval);
  f("output", c.output);
  f("metrics_log", c.metrics_log);
  f("pretrained", c.pretrained);
  f("stage1_checkpoint", c.stage1_checkpoint);
}

void validate(const TrainConfig& c) {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  req(c.lambda_r > 0.0, "lambda_r must be > 0");
  req(c.lambda_perc >= 0.0, "lambda_perc must be >= 0");
  req(c.L >= 1, "L must be >= 1");
  req(c.batch >= 1 && c.ae_batch >= 1 && c.base_batch >= 1, "batch sizes must be >= 1");
  req(c.train_images >= 1, "corpus must not be empty");
  req(c.heldout_images >= 0, "heldout_images must be >= 0");
  req(c.image_size >= 16 && c.image_size % Topology::kDownFactor == 0,
      "image_size must be a multiple of 8 and >= 16");
  req(c.grad_clip > 0.0, "grad_clip must be > 0");
  req(c.diffusion.N >= 1 && c.diffusion.N <= c.diffusion.T, "N must lie in [1, T]");
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["version"] = kConfigVersion;
  TrainConfig c = cfg;
  for_each_field(c, [&](const char* key, auto& v) { j[key] = v; });
  j["topology"] = topology_to_json(cfg.topology);
  j["diffusion"] = diffusion_to_json(cfg.diffusion);
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  if (j.value("version", -1) != kConfigVersion) {
    throw std::invalid_argument("config: unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  }
  TrainConfig c;
  std::set<std::string> known{"version", "topology", "diffusion"};
  try {
    for_each_field(c, [&](const char* key, auto& v) {
      known.insert(key);
      if (j.contains(key)) j.at(key).get_to(v);
    });
    if (j.contains("topology")) {
      json t = topology_to_json(c.topology);
      t.update(j.at("topology"));
      c.topology = topology_from_json(t);
    }
    if (j.contains("diffusion")) {
      json d = diffusion_to_json(c.diffusion);
      d.update(j.at("diffusion"));
      c.diffusion = diffusion_from_json(d);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << train_config_to_json(cfg) << "\n";
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  // Paths do not change what is trained.
  c.output.clear();
  c.metrics_log.clear();
  c.pretrained.clear();
  c.stage1_checkpoint.clear();
  const std::string s = train_config_to_json(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace rrd
