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

#ifndef NOWCAST_DATA_SYNTH_HPP
#define NOWCAST_DATA_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nowcast/config.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/data/sequences.hpp"

namespace nowcast::data {

/**
 * Gaussian blobs advected at a constant velocity.
 *
 * Boundary rule: clip. Blobs are not wrapped; they simply leave the canvas.
 * Start centers are drawn from the region that keeps every center inside
 * the frame for the whole sequence; when that region is empty the center is
 * drawn anywhere and the sample carries a warning.
 */
struct SynthConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t blobs = 1;
  double amplitude_min = 0.6;  // peak value, within (0,1]
  double amplitude_max = 0.9;
  double radius_min = 1.5;  // Gaussian sigma in pixels
  double radius_max = 2.5;
  double velocity_x = 1.0;  // pixels per frame, +x is right
  double velocity_y = 0.0;  // +y is down
  double noise = 0.0;       // std-dev of additive Gaussian noise
  std::uint64_t seed = 0;
  SequenceConfig sequence;
  Instant epoch = make_utc(2022, 1, 1);

  void validate() const {
    if (height == 0 || width == 0) throw ConfigError("synth: frame size must be >= 1");
    if (!(amplitude_min > 0.0 && amplitude_min <= amplitude_max && amplitude_max <= 1.0)) {
      throw ConfigError("synth: amplitudes must satisfy 0 < min <= max <= 1");
    }
    if (!(radius_min > 0.0 && radius_min <= radius_max)) {
      throw ConfigError("synth: radii must satisfy 0 < min <= max");
    }
    if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    if (!std::isfinite(velocity_x) || !std::isfinite(velocity_y)) {
      throw ConfigError("synth: velocity must be finite");
    }
  }

  void write(KeyValueConfig& kv) const {
    kv.set_number("synth.height", height);
    kv.set_number("synth.width", width);
    kv.set_number("synth.blobs", blobs);
    kv.set_number("synth.amplitude_min", amplitude_min);
    kv.set_number("synth.amplitude_max", amplitude_max);
    kv.set_number("synth.radius_min", radius_min);
    kv.set_number("synth.radius_max", radius_max);
    kv.set_number("synth.velocity_x", velocity_x);
    kv.set_number("synth.velocity_y", velocity_y);
    kv.set_number("synth.noise", noise);
    kv.set_number("synth.seed", seed);
    kv.set_number("synth.input_frames", sequence.input_frames);
    kv.set_number("synth.output_frames", sequence.output_frames);
    kv.set_number("synth.cadence_minutes", sequence.cadence.count());
  }

  static SynthConfig read(const KeyValueConfig& kv) {
    SynthConfig c;
    c.height = kv.get_number("synth.height", c.height);
    c.width = kv.get_number("synth.width", c.width);
    c.blobs = kv.get_number("synth.blobs", c.blobs);
    c.amplitude_min = kv.get_number("synth.amplitude_min", c.amplitude_min);
    c.amplitude_max = kv.get_number("synth.amplitude_max", c.amplitude_max);
    c.radius_min = kv.get_number("synth.radius_min", c.radius_min);
    c.radius_max = kv.get_number("synth.radius_max", c.radius_max);
    c.velocity_x = kv.get_number("synth.velocity_x", c.velocity_x);
    c.velocity_y = kv.get_number("synth.velocity_y", c.velocity_y);
    c.noise = kv.get_number("synth.noise", c.noise);
    c.seed = kv.get_number("synth.seed", c.seed);
    c.sequence.input_frames = kv.get_number("synth.input_frames", c.sequence.input_frames);
    c.sequence.output_frames = kv.get_number("synth.output_frames", c.sequence.output_frames);
    c.sequence.cadence = minutes(kv.get_number<long>("synth.cadence_minutes", c.sequence.cadence.count()));
    return c;
  }
};

namespace detail {

// Uniform start coordinate keeping pos0 + v*t inside [0, extent-1] for
// t = 0..steps-1. Returns false when no such start exists.
inline bool draw_start(double extent, double v, std::size_t steps, std::mt19937_64& rng,
                       double& out) {
  const double travel = v * static_cast<double>(steps - 1);
  const double lo = std::max(0.0, -travel);
  const double hi = std::min(extent - 1.0, extent - 1.0 - travel);
  if (lo <= hi) {
    out = std::uniform_real_distribution<double>(lo, std::nextafter(hi, hi + 1.0))(rng);
    return true;
  }
  out = std::uniform_real_distribution<double>(0.0, extent - 1.0)(rng);
  return false;
}

}  // namespace detail

/// `n_sequences` samples; deterministic per cfg.seed. Sequence k occupies
/// its own time slot, so frames never repeat across sequences.
inline std::vector<SequenceSample> synth_advection(const SynthConfig& cfg, std::size_t n_sequences) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t win = cfg.sequence.window();
  const std::size_t h = cfg.height, w = cfg.width;

  struct Blob {
    double cx, cy, amp, radius;
  };

  std::vector<SequenceSample> out;
  out.reserve(n_sequences);
  for (std::size_t k = 0; k < n_sequences; ++k) {
    SequenceSample sample;
    sample.provenance = "synth:seed=" + std::to_string(cfg.seed) + ":seq=" + std::to_string(k);
    std::vector<Blob> blobs(cfg.blobs);
    for (auto& b : blobs) {
      const bool in_x = detail::draw_start(static_cast<double>(w), cfg.velocity_x, win, rng, b.cx);
      const bool in_y = detail::draw_start(static_cast<double>(h), cfg.velocity_y, win, rng, b.cy);
      b.amp = std::uniform_real_distribution<double>(cfg.amplitude_min, cfg.amplitude_max)(rng);
      b.radius = std::uniform_real_distribution<double>(cfg.radius_min, cfg.radius_max)(rng);
      if (!in_x || !in_y) {
        sample.warning = true;
        sample.warning_message = "a blob leaves the frame before the sequence ends";
      }
    }
    const Instant base = cfg.epoch + cfg.sequence.cadence * static_cast<int>(k * win);
    for (std::size_t t = 0; t < win; ++t) {
      RadarFrame f;
      f.timestamp = base + cfg.sequence.cadence * static_cast<int>(t);
      f.source = FrameSource::Synthetic;
      f.values = Tensor<float>({1, h, w});
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double v = 0.0;
          for (const auto& b : blobs) {
            const double dx = static_cast<double>(x) - (b.cx + cfg.velocity_x * static_cast<double>(t));
            const double dy = static_cast<double>(y) - (b.cy + cfg.velocity_y * static_cast<double>(t));
            v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
          }
          v = std::min(v, 1.0);
          if (cfg.noise > 0.0) v += cfg.noise * gauss(rng);
          f.values[y * w + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
      (t < cfg.sequence.input_frames ? sample.x : sample.y).push_back(std::move(f));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_SYNTH_HPP
