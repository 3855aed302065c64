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


#include "rrd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace rrd {
namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

Tensor<float> read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ImageError("cannot read PNG '" + path + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageError("cannot decode PNG '" + path + "': " + img.message);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Tensor<float> out({1, 3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) out(0, c, i, j) = buf[(i * w + j) * 3 + c] / 255.0f;
  return out;
}

void skip_ws_and_comments(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

Tensor<float> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P6") throw ImageError("'" + path + "': only binary P6 PPM is supported");
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments(in);
  in >> w;
  skip_ws_and_comments(in);
  in >> h;
  skip_ws_and_comments(in);
  in >> maxval;
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw ImageError("'" + path + "': bad PPM header");
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw ImageError("'" + path + "': truncated PPM data");
  Tensor<float> out({1, 3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) out(0, c, i, j) = buf[(i * w + j) * 3 + c] / 255.0f;
  return out;
}

void write_png_rgb(const std::string& path, int h, int w, const std::vector<png_byte>& buf,
                   png_uint_32 format) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG '" + path + "': " + img.message);
  }
}

}  // namespace

std::uint8_t to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::round(c));
}

Tensor<float> read_image(const std::string& path) {
  if (has_suffix(path, ".ppm")) return read_ppm(path);
  if (has_suffix(path, ".png")) return read_png(path);
  throw ImageError("unsupported image extension: '" + path + "' (use .png or .ppm)");
}

void write_image(const std::string& path, const Tensor<float>& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw ImageError("write_image: expected (1, 3, H, W), got " + s.str());
  std::vector<png_byte> buf(static_cast<std::size_t>(s.h) * s.w * 3);
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j)
      for (int c = 0; c < 3; ++c) buf[(i * s.w + j) * 3 + c] = to_byte(image(0, c, i, j));
  if (has_suffix(path, ".ppm")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageError("cannot open '" + path + "' for writing");
    out << "P6\n" << s.w << " " << s.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ImageError("write failed for '" + path + "'");
    return;
  }
  if (has_suffix(path, ".png")) {
    write_png_rgb(path, s.h, s.w, buf, PNG_FORMAT_RGB);
    return;
  }
  throw ImageError("unsupported image extension: '" + path + "' (use .png or .ppm)");
}

void write_gray_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& px) {
  if (px.size() != static_cast<std::size_t>(h) * w) throw ImageError("write_gray_png: size");
  write_png_rgb(path, h, w, px, PNG_FORMAT_GRAY);
}

namespace {
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}
}  // namespace

Tensor<float> pad_reflect(const Tensor<float>& x, int ph, int pw) {
  const Shape s = x.shape();
  if (ph < s.h || pw < s.w) throw std::invalid_argument("pad_reflect: target smaller than input");
  Tensor<float> out({s.n, s.c, ph, pw});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < ph; ++i)
        for (int j = 0; j < pw; ++j) out(n, c, i, j) = x(n, c, reflect(i, s.h), reflect(j, s.w));
  return out;
}

Tensor<float> crop_image(const Tensor<float>& x, int h, int w) {
  const Shape s = x.shape();
  if (h > s.h || w > s.w) throw std::invalid_argument("crop_image: window larger than input");
  Tensor<float> out({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out(n, c, i, j) = x(n, c, i, j);
  return out;
}

}  // namespace rrd
