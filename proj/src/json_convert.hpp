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


#ifndef RRD_SRC_JSON_CONVERT_HPP_
#define RRD_SRC_JSON_CONVERT_HPP_

// JSON forms of the model descriptors, shared by checkpoints and configs.

#include "json.hpp"
#include "rrd/model.hpp"

namespace rrd {

inline nlohmann::json topology_to_json(const Topology& t) {
  return {{"image_channels", t.image_channels}, {"ae_width", t.ae_width},
          {"ae_width2", t.ae_width2},           {"latent_channels", t.latent_channels},
          {"codec_width", t.codec_width},       {"y_channels", t.y_channels},
          {"side_channels", t.side_channels},   {"hyper_width", t.hyper_width},
          {"entropy_width", t.entropy_width},   {"cond_channels", t.cond_channels},
          {"codebook_size", t.codebook_size},   {"denoiser_width", t.denoiser_width},
          {"denoiser_blocks", t.denoiser_blocks}, {"time_embed", t.time_embed},
          {"control_ratio", t.control_ratio}};
}

inline Topology topology_from_json(const nlohmann::json& j) {
  Topology t;
  t.image_channels = j.at("image_channels");
  t.ae_width = j.at("ae_width");
  t.ae_width2 = j.at("ae_width2");
  t.latent_channels = j.at("latent_channels");
  t.codec_width = j.at("codec_width");
  t.y_channels = j.at("y_channels");
  t.side_channels = j.at("side_channels");
  t.hyper_width = j.at("hyper_width");
  t.entropy_width = j.at("entropy_width");
  t.cond_channels = j.at("cond_channels");
  t.codebook_size = j.at("codebook_size");
  t.denoiser_width = j.at("denoiser_width");
  t.denoiser_blocks = j.at("denoiser_blocks");
  t.time_embed = j.at("time_embed");
  t.control_ratio = j.at("control_ratio");
  return t;
}

inline nlohmann::json diffusion_to_json(const DiffusionConfig& d) {
  return {{"T", d.T},
          {"beta_schedule", to_string(d.kind)},
          {"beta_start", d.beta_start},
          {"beta_end", d.beta_end},
          {"N", d.N},
          {"start", to_string(d.start)}};
}

inline DiffusionConfig diffusion_from_json(const nlohmann::json& j) {
  DiffusionConfig d;
  d.T = j.at("T");
  d.kind = parse_beta_kind(j.at("beta_schedule"));
  d.beta_start = j.at("beta_start");
  d.beta_end = j.at("beta_end");
  d.N = j.at("N");
  d.start = parse_start_mode(j.at("start"));
  return d;
}

}  // namespace rrd

#endif  // RRD_SRC_JSON_CONVERT_HPP_
