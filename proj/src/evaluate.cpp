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


#include "rrd/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rrd/codec.hpp"
#include "rrd/image_io.hpp"
#include "rrd/metrics.hpp"

namespace rrd {
namespace fs = std::filesystem;
namespace {

std::vector<fs::path> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::invalid_argument("no PNG/PPM images in " + dir);
  return out;
}

Tensor<float> window(const Tensor<float>& x, int y0, int x0, int h, int w) {
  const Shape s = x.shape();
  Tensor<float> out({1, s.c, h, w});
  for (int c = 0; c < s.c; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out(0, c, i, j) = x(0, c, y0 + i, x0 + j);
  return out;
}

void paste(Tensor<float>& dst, const Tensor<float>& src, int y0, int x0) {
  const Shape s = src.shape();
  for (int c = 0; c < s.c; ++c)
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j) dst(0, c, y0 + i, x0 + j) = src(0, c, i, j);
}

struct Tile {
  int y0, x0;
  Compressed code;
};

// Every tile of one image, compressed once and decoded per setting.
struct Encoded {
  std::vector<Tile> tiles;
  std::size_t bytes = 0;
};

struct Decoded {
  Tensor<float> image;
  double seconds = 0.0;
  std::vector<double> step_seconds;
};

Decoded decode_all(const FloatModel& m, const Encoded& e, const Shape& shape, int steps, double lambda_s) {
  Decoded d;
  d.image = Tensor<float>(shape);
  DecompressOptions o;
  o.steps = steps;
  o.lambda_s = lambda_s;
  for (const Tile& t : e.tiles) {
    const Decompressed r = decompress(m, t.code.bytes, o);
    paste(d.image, r.image, t.y0, t.x0);
    d.seconds += r.denoise_seconds;
    if (d.step_seconds.empty()) {
      d.step_seconds = r.step_seconds;
    } else {
      for (std::size_t i = 0; i < d.step_seconds.size() && i < r.step_seconds.size(); ++i) {
        d.step_seconds[i] += r.step_seconds[i];
      }
    }
  }
  return d;
}

void write_bit_map(const std::string& path, const LatentCode<float>& code) {
  const std::vector<double> bits = bit_allocation(code);
  const double peak = std::max(1e-12, *std::max_element(bits.begin(), bits.end()));
  std::vector<std::uint8_t> px(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) px[i] = to_byte(static_cast<float>(bits[i] / peak));
  write_gray_png(path, code.y_hat.shape().h, code.y_hat.shape().w, px);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string setting_key(int steps, double lambda_s) {
  std::ostringstream ss;
  ss << steps << "/" << lambda_s;
  return ss.str();
}

}  // namespace

EvalGrid parse_eval_grid(const std::string& text) {
  using nlohmann::json;
  EvalGrid g;
  try {
    const json j = json::parse(text);
    if (j.value("version", -1) != 1) throw std::invalid_argument("eval grid: unsupported version");
    for (const auto& m : j.at("models")) g.models.push_back({m.at("label"), m.at("path")});
    if (j.contains("steps")) g.steps = j.at("steps").get<std::vector<int>>();
    if (j.contains("lambda_s")) g.lambda_s = j.at("lambda_s").get<std::vector<double>>();
    g.output_dir = j.value("output_dir", g.output_dir);
    g.tile = j.value("tile", g.tile);
    g.bit_maps = j.value("bit_maps", g.bit_maps);
    g.save_images = j.value("save_images", g.save_images);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("eval grid: ") + e.what());
  }
  if (g.models.empty() || g.steps.empty() || g.lambda_s.empty()) {
    throw std::invalid_argument("eval grid: models, steps and lambda_s must be non-empty");
  }
  if (g.tile < 0 || (g.tile > 0 && g.tile % Topology::kDownFactor != 0)) {
    throw std::invalid_argument("eval grid: tile must be 0 or a positive multiple of 8");
  }
  return g;
}

EvalGrid load_eval_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval grid " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_eval_grid(ss.str());
}

std::vector<MetricsRecord> evaluate(const std::string& image_dir, const EvalGrid& grid, std::ostream& log) {
  const std::vector<fs::path> images = list_images(image_dir);
  fs::create_directories(grid.output_dir);
  const std::string layout = grid.tile > 0 ? "tiles" + std::to_string(grid.tile) + "_nonoverlap" : "whole";
  const bool sweep = std::find(grid.lambda_s.begin(), grid.lambda_s.end(), 0.0) != grid.lambda_s.end() ||
                     grid.lambda_s.size() > 1;
  std::vector<MetricsRecord> rows;

  for (const EvalModel& em : grid.models) {
    std::unique_ptr<FloatModel> m;
    try {
      m = load_checkpoint(em.path);
    } catch (const std::exception& e) {
      log << "model " << em.label << ": " << e.what() << "\n";
      MetricsRecord r;
      r.model = em.label;
      r.image = "*";
      r.ok = false;
      r.error = e.what();
      rows.push_back(r);
      continue;
    }
    std::map<std::string, std::vector<MetricsRecord>> by_setting;
    for (const fs::path& path : images) {
      const std::string name = path.filename().string();
      Tensor<float> x;
      Encoded enc;
      try {
        x = read_image(path.string());
        const Shape s = x.shape();
        const int th = grid.tile > 0 ? grid.tile : s.h;
        const int tw = grid.tile > 0 ? grid.tile : s.w;
        for (int y0 = 0; y0 < s.h; y0 += th)
          for (int x0 = 0; x0 < s.w; x0 += tw) {
            Tile t{y0, x0, compress(*m, window(x, y0, x0, std::min(th, s.h - y0), std::min(tw, s.w - x0)))};
            enc.bytes += t.code.bytes.size();
            enc.tiles.push_back(std::move(t));
          }
        if (grid.bit_maps && grid.tile == 0) {
          write_bit_map((fs::path(grid.output_dir) / (em.label + "_" + path.stem().string() + "_bits.png")).string(),
                        enc.tiles.front().code.code);
        }
      } catch (const std::exception& e) {
        log << em.label << " " << name << ": " << e.what() << "\n";
        for (int L : grid.steps)
          for (double ls : grid.lambda_s) {
            MetricsRecord r;
            r.model = em.label;
            r.image = name;
            r.layout = layout;
            r.steps = L;
            r.lambda_s = ls;
            r.ok = false;
            r.error = e.what();
            by_setting[setting_key(L, ls)].push_back(r);
          }
        continue;
      }
      for (int L : grid.steps) {
        Tensor<float> base;
        bool have_base = false;
        if (sweep) {
          try {
            base = decode_all(*m, enc, x.shape(), L, 0.0).image;
            have_base = true;
          } catch (const std::exception& e) {
            log << em.label << " " << name << " base reconstruction: " << e.what() << "\n";
          }
        }
        for (double ls : grid.lambda_s) {
          MetricsRecord r;
          r.model = em.label;
          r.image = name;
          r.layout = layout;
          r.steps = L;
          r.lambda_s = ls;
          try {
            const Decoded d = decode_all(*m, enc, x.shape(), L, ls);
            r.bpp = bits_per_pixel(enc.bytes, static_cast<std::uint32_t>(x.shape().w),
                                   static_cast<std::uint32_t>(x.shape().h));
            r.psnr = psnr(x, d.image);
            const MsSsim ms = ms_ssim(x, d.image);
            r.ms_ssim = ms.value;
            r.ms_ssim_scales = ms.scales;
            r.denoise_seconds = d.seconds;
            r.step_seconds = d.step_seconds;
            if (have_base) r.distance = (d.image.array() - base.array()).cast<double>().square().sum();
            if (grid.save_images) {
              std::ostringstream fn;
              fn << em.label << "_" << path.stem().string() << "_L" << L << "_s" << ls << ".png";
              write_image((fs::path(grid.output_dir) / fn.str()).string(), d.image);
            }
          } catch (const std::exception& e) {
            log << em.label << " " << name << " L=" << L << " lambda_s=" << ls << ": " << e.what() << "\n";
            r.ok = false;
            r.error = e.what();
          }
          by_setting[setting_key(L, ls)].push_back(r);
        }
      }
    }
    for (int L : grid.steps)
      for (double ls : grid.lambda_s) {
        const auto& group = by_setting[setting_key(L, ls)];
        MetricsRecord mean;
        mean.model = em.label;
        mean.image = "MEAN";
        mean.layout = layout;
        mean.steps = L;
        mean.lambda_s = ls;
        int n = 0;
        double dist = 0.0;
        int nd = 0;
        for (const MetricsRecord& r : group) {
          rows.push_back(r);
          if (!r.ok) continue;
          ++n;
          mean.bpp += r.bpp;
          mean.psnr += r.psnr;
          mean.ms_ssim += r.ms_ssim;
          mean.denoise_seconds += r.denoise_seconds;
          mean.ms_ssim_scales = r.ms_ssim_scales;
          if (std::isfinite(r.distance)) {
            dist += r.distance;
            ++nd;
          }
        }
        if (n == 0) {
          mean.ok = false;
          mean.error = "no successful rows";
        } else {
          mean.bpp /= n;
          mean.psnr /= n;
          mean.ms_ssim /= n;
          mean.denoise_seconds /= n;
          if (nd > 0) mean.distance = dist / nd;
        }
        rows.push_back(mean);
      }
  }
  return rows;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "model,image,layout,steps,lambda_s,bpp,psnr,ms_ssim,ms_ssim_scales,denoise_seconds,step_seconds,"
         "distance_to_base,status,reason\n";
  out.precision(10);
  for (const MetricsRecord& r : rows) {
    std::ostringstream steps;
    steps.precision(6);
    for (std::size_t i = 0; i < r.step_seconds.size(); ++i) steps << (i ? ";" : "") << r.step_seconds[i];
    out << csv_escape(r.model) << "," << csv_escape(r.image) << "," << r.layout << "," << r.steps << ","
        << r.lambda_s << "," << r.bpp << "," << r.psnr << "," << r.ms_ssim << "," << r.ms_ssim_scales << ","
        << r.denoise_seconds << "," << steps.str() << ",";
    if (std::isfinite(r.distance)) out << r.distance;
    out << "," << (r.ok ? "ok" : "failed") << "," << csv_escape(r.error) << "\n";
  }
}

}  // namespace rrd
