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


#ifndef RRD_CONFIG_HPP_
#define RRD_CONFIG_HPP_

#include <string>

#include "rrd/training.hpp"

namespace rrd {

inline constexpr int kConfigVersion = 1;

/// Versioned JSON. Missing keys keep their defaults; unknown keys and a
/// different version are errors (std::invalid_argument).
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

/// Stable 64-bit digest of the serialized config.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace rrd

#endif  // RRD_CONFIG_HPP_
