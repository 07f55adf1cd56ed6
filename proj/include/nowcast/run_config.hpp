// Copyright 2026 The Nowcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOWCAST_RUN_CONFIG_HPP
#define NOWCAST_RUN_CONFIG_HPP

#include <chrono>
#include <filesystem>
#include <string>

#include "nowcast/config.hpp"
#include "nowcast/data/fetch.hpp"
#include "nowcast/data/synth.hpp"
#include "nowcast/eval/render.hpp"
#include "nowcast/model.hpp"
#include "nowcast/training.hpp"

namespace nowcast {

struct EvalOptions {
  std::size_t batch_size = 8;
  eval::RenderOptions render;
};

/**
 * Everything one CLI invocation needs, read from a key = value file.
 *
 *   paths.data_dir, paths.cache_dir, paths.checkpoint, paths.out_dir
 *   arch.*   model architecture
 *   train.*  epochs, batch_size, seed, shuffle, rho, eps, lr_scale
 *   eval.*   batch_size, gif_delay_ms, strip_frames
 *   synth.*  synthetic generator, plus synth.count
 *   fetch.*  archive download
 */
struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path checkpoint = "model.nckp";
  std::filesystem::path out_dir = "out";
  model::ArchitectureConfig arch;
  train::TrainConfig train;
  EvalOptions eval;
  data::SynthConfig synth;
  std::size_t synth_count = 16;
  data::FetchConfig fetch;

  static RunConfig read(const KeyValueConfig& kv) {
    RunConfig c;
    c.data_dir = kv.get_string("paths.data_dir", c.data_dir.string());
    c.cache_dir = kv.get_string("paths.cache_dir", c.cache_dir.string());
    c.checkpoint = kv.get_string("paths.checkpoint", c.checkpoint.string());
    c.out_dir = kv.get_string("paths.out_dir", c.out_dir.string());
    c.arch = model::ArchitectureConfig::read(kv);
    c.train = train::TrainConfig::read(kv);
    c.eval.batch_size = kv.get_number("eval.batch_size", c.eval.batch_size);
    c.eval.render.gif_delay =
        std::chrono::milliseconds(kv.get_number<long>("eval.gif_delay_ms", c.eval.render.gif_delay.count()));
    c.eval.render.strip_frames = kv.get_number("eval.strip_frames", c.eval.render.strip_frames);
    c.synth = data::SynthConfig::read(kv);
    c.synth_count = kv.get_number("synth.count", c.synth_count);
    c.fetch = data::FetchConfig::read(kv);
    if (!kv.has("fetch.cache_dir")) c.fetch.cache_dir = c.cache_dir;
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) { return read(KeyValueConfig::load(path.string())); }

  void validate() const {
    arch.validate();
    train.validate();
    synth.validate();
    if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be >= 1");
    if (eval.render.strip_frames == 0) throw ConfigError("eval.strip_frames must be >= 1");
    if (eval.render.gif_delay.count() < 0) throw ConfigError("eval.gif_delay_ms must be >= 0");
  }

  /// Creates `dir` (and parents) or fails with a ConfigError naming the key.
  static void ensure_dir(const std::filesystem::path& dir, const char* key) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      throw ConfigError(std::string(key) + ": cannot create directory " + dir.string());
    }
  }
};

}  // namespace nowcast

#endif  // NOWCAST_RUN_CONFIG_HPP
