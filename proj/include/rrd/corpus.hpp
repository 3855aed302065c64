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


#ifndef RRD_CORPUS_HPP_
#define RRD_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "rrd/random.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

/// One procedural RGB image (1, 3, h, w) in [0, 1]: a smooth two-colour
/// gradient, a few flat shapes with soft edges, an oriented stripe texture in
/// part of the frame and mild pixel noise.
Tensor<float> toy_image(Rng& rng, int h, int w);

/// Seeded train / held-out split. The two sets come from independent streams
/// so changing one count does not change the other set.
struct ToyCorpus {
  std::vector<Tensor<float>> train;
  std::vector<Tensor<float>> heldout;
};

ToyCorpus make_corpus(std::uint64_t seed, int train_count, int heldout_count, int size);

/// Writes images as numbered PNG files into `dir` (created if missing).
void write_corpus(const std::string& dir, const std::vector<Tensor<float>>& images,
                  const std::string& prefix);

}  // namespace rrd

#endif  // RRD_CORPUS_HPP_
