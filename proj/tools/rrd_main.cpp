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


// Command line front end: compress, decompress, eval, train, corpus.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rrd/codec.hpp"
#include "rrd/config.hpp"
#include "rrd/corpus.hpp"
#include "rrd/evaluate.hpp"
#include "rrd/image_io.hpp"
#include "rrd/model.hpp"
#include "rrd/training.hpp"

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

int main(int argc, char** argv) {
  rrd::configure_allocator();
  CLI::App app{"rrd: extreme-rate image codec with relay-residual diffusion decoding"};
  app.require_subcommand(1);

  std::string in, out, model;
  int steps = 2;
  double lambda_s = 1.0;
  bool raw = false;
  auto* comp = app.add_subcommand("compress", "Encode an 8-bit PNG/PPM image");
  comp->add_option("input", in, "Input image")->required()->check(CLI::ExistingFile);
  comp->add_option("-o,--output", out, "Output bitstream")->required();
  comp->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  comp->add_option("--steps", steps, "Default decode step count stored in the header")->capture_default_str();
  comp->add_option("--lambda-s", lambda_s, "Default guidance scale stored in the header")->capture_default_str();
  comp->add_flag("--raw", raw, "Store y offsets as raw 32-bit words");

  std::optional<int> dsteps;
  std::optional<double> dlambda;
  auto* dec = app.add_subcommand("decompress", "Decode a bitstream to PNG/PPM");
  dec->add_option("input", in, "Bitstream")->required()->check(CLI::ExistingFile);
  dec->add_option("-o,--output", out, "Output image (.png or .ppm)")->required();
  dec->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  dec->add_option("--steps", dsteps, "Override the denoising step count L");
  dec->add_option("--lambda-s", dlambda, "Override the guidance scale");

  std::string dir, grid;
  auto* ev = app.add_subcommand("eval", "Evaluate models over a directory of images");
  ev->add_option("dir", dir, "Image directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--grid", grid, "Evaluation grid (JSON)")->required()->check(CLI::ExistingFile);

  std::string config;
  int stage = 1;
  auto* tr = app.add_subcommand("train", "Train a codec");
  tr->add_option("--config", config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
  tr->add_option("--stage", stage, "1: independent training, 2: fixed-step fine-tuning")
      ->required()
      ->check(CLI::IsMember({1, 2}));

  std::string corpus_dir;
  auto* cp = app.add_subcommand("corpus", "Write the held-out toy images of a training config as PNGs");
  cp->add_option("dir", corpus_dir, "Output directory")->required();
  cp->add_option("--config", config, "Training config (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // --help is not an error
  }

  try {
    if (*comp) {
      const auto m = rrd::load_checkpoint(model);
      rrd::CompressOptions o;
      o.steps = steps;
      o.lambda_s = lambda_s;
      o.raw = raw;
      const rrd::Compressed c = rrd::compress(*m, rrd::read_image(in), o);
      write_file(out, c.bytes);
      std::cout << "wrote " << c.bytes.size() << " bytes, "
                << rrd::bits_per_pixel(c.bytes.size(), c.header.width, c.header.height) << " bpp\n";
    } else if (*dec) {
      const auto m = rrd::load_checkpoint(model);
      rrd::DecompressOptions o;
      o.steps = dsteps;
      o.lambda_s = dlambda;
      const std::vector<std::uint8_t> bytes = read_file(in);
      const rrd::Decompressed d = rrd::decompress(*m, bytes, o);
      rrd::write_image(out, d.image);
      std::cout << "decoded " << d.header.width << "x" << d.header.height << " with L=" << d.steps
                << ", lambda_s=" << d.lambda_s << ", denoising " << d.denoise_seconds << " s\n";
    } else if (*ev) {
      const rrd::EvalGrid g = rrd::load_eval_grid(grid);
      const auto rows = rrd::evaluate(dir, g, std::cerr);
      const std::string csv = g.output_dir + "/metrics.csv";
      rrd::write_metrics_csv(csv, rows);
      std::cout << "wrote " << rows.size() << " rows to " << csv << "\n";
    } else if (*tr) {
      rrd::run_training(rrd::load_train_config(config), stage, std::cout);
    } else if (*cp) {
      const rrd::TrainConfig c = rrd::load_train_config(config);
      const rrd::ToyCorpus corpus = rrd::make_corpus(c.corpus_seed, 0, c.heldout_images, c.image_size);
      rrd::write_corpus(corpus_dir, corpus.heldout, "heldout_");
      std::cout << "wrote " << corpus.heldout.size() << " images to " << corpus_dir << "\n";
    }
  } catch (const rrd::CorruptStream& e) {
    std::cerr << "error: corrupt bitstream: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
