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

#ifndef RRD_FREEZE_HPP_
#define RRD_FREEZE_HPP_

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd::ad {

/// Holds the values of stop-gradient operands and discrete decisions (codebook
/// indices, rounding, sampled steps and noise) of one forward pass. In live
/// mode values pass through. In record mode they are stored; in replay mode
/// the stored values are returned in order, so a perturbed re-evaluation of
/// the loss keeps every sg(.) operand and every decision fixed. That is what
/// makes a central difference comparable with the analytic gradient.
template <typename S>
class Freezer {
 public:
  enum class Mode { kLive, kRecord, kReplay };

  Freezer() = default;
  explicit Freezer(Mode mode) : mode_(mode) {}

  Mode mode() const { return mode_; }
  void start_replay() {
    mode_ = Mode::kReplay;
    t_cursor_ = 0;
    i_cursor_ = 0;
  }

  Tensor<S> tensor(Tensor<S> live) {
    switch (mode_) {
      case Mode::kLive:
        return live;
      case Mode::kRecord:
        tensors_.push_back(live);
        return live;
      case Mode::kReplay:
        if (t_cursor_ >= tensors_.size()) throw std::logic_error("Freezer: replay overrun");
        return tensors_[t_cursor_++];
    }
    return live;
  }

  std::vector<int> indices(std::vector<int> live) {
    switch (mode_) {
      case Mode::kLive:
        return live;
      case Mode::kRecord:
        ints_.push_back(live);
        return live;
      case Mode::kReplay:
        if (i_cursor_ >= ints_.size()) throw std::logic_error("Freezer: replay overrun");
        return ints_[i_cursor_++];
    }
    return live;
  }

  int index(int live) { return indices({live}).front(); }

 private:
  Mode mode_ = Mode::kLive;
  std::vector<Tensor<S>> tensors_;
  std::vector<std::vector<int>> ints_;
  std::size_t t_cursor_ = 0;
  std::size_t i_cursor_ = 0;
};

}  // namespace rrd::ad

#endif  // RRD_FREEZE_HPP_
