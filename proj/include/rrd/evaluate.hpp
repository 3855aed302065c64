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


#ifndef RRD_EVALUATE_HPP_
#define RRD_EVALUATE_HPP_

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace rrd {

/// Evaluation grid, read from versioned JSON:
///   {"version": 1, "models": [{"label": "l1", "path": "m.rrdc"}],
///    "steps": [2, 5], "lambda_s": [0, 0.6, 0.8, 1, 1.3, 1.5],
///    "output_dir": "eval", "tile": 0, "bit_maps": true, "save_images": false}
struct EvalModel {
  std::string label;
  std::string path;
};

struct EvalGrid {
  std::vector<EvalModel> models;
  std::vector<int> steps{2};
  std::vector<double> lambda_s{1.0};
  std::string output_dir = "eval";
  int tile = 0;  // > 0: code non-overlapping tiles of this size independently
  bool bit_maps = true;
  bool save_images = false;
};

EvalGrid parse_eval_grid(const std::string& json_text);
EvalGrid load_eval_grid(const std::string& path);

struct MetricsRecord {
  std::string model;
  std::string image;  // "MEAN" for aggregate rows
  std::string layout = "whole";
  int steps = 0;
  double lambda_s = 1.0;
  double bpp = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  int ms_ssim_scales = 0;
  double denoise_seconds = 0.0;
  std::vector<double> step_seconds;
  /// Squared L2 distance to the lambda_s = 0 reconstruction.
  double distance = std::numeric_limits<double>::quiet_NaN();
  bool ok = true;
  std::string error;
};

/// Runs every (model, image, steps, lambda_s) combination over the PNG/PPM
/// files of `image_dir` (sorted by name). A failing combination yields a row
/// with ok = false and the reason; the run continues. Aggregate MEAN rows
/// follow the per-image rows of each (model, steps, lambda_s).
std::vector<MetricsRecord> evaluate(const std::string& image_dir, const EvalGrid& grid, std::ostream& log);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows);

}  // namespace rrd

#endif  // RRD_EVALUATE_HPP_
