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

#ifndef NOWCAST_DATA_SEQUENCES_HPP
#define NOWCAST_DATA_SEQUENCES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "nowcast/data/frame.hpp"

namespace nowcast::data {

/// Window geometry: input_frames + output_frames consecutive frames at a
/// fixed cadence. The defaults give 36 frames at 5 minutes, three hours.
struct SequenceConfig {
  std::size_t input_frames = 18;
  std::size_t output_frames = 18;
  minutes cadence{5};

  std::size_t window() const { return input_frames + output_frames; }
  minutes span() const { return cadence * static_cast<int>(window()); }
};

/**
 * Cuts every window of `cfg.window()` consecutive frames out of a
 * time-ordered list, advancing by `stride`. Consecutive frames must be one
 * cadence apart within +-10%; any other gap (or a repeated/out-of-order
 * timestamp) breaks the run. Frames are copied, never interpolated.
 */
inline std::vector<SequenceSample> build_sequences(std::span<const RadarFrame> frames,
                                                   const SequenceConfig& cfg,
                                                   std::size_t stride = 1) {
  if (stride == 0) throw ValueError("build_sequences: stride must be >= 1");
  const auto c = std::chrono::duration_cast<seconds>(cfg.cadence).count();
  const double lo = 0.9 * static_cast<double>(c), hi = 1.1 * static_cast<double>(c);
  const std::size_t win = cfg.window();

  std::vector<SequenceSample> out;
  std::size_t run_start = 0;
  auto emit_run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s + win <= end; s += stride) {
      SequenceSample sample;
      sample.x.assign(frames.begin() + s, frames.begin() + s + cfg.input_frames);
      sample.y.assign(frames.begin() + s + cfg.input_frames, frames.begin() + s + win);
      sample.provenance = "frames:" + format_utc(frames[s].timestamp) + ".." +
                          format_utc(frames[s + win - 1].timestamp);
      out.push_back(std::move(sample));
    }
  };
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    bool breaks = i == frames.size();
    if (!breaks) {
      const double gap = static_cast<double>((frames[i].timestamp - frames[i - 1].timestamp).count());
      breaks = gap < lo || gap > hi;
    }
    if (breaks) {
      emit_run(run_start, i);
      run_start = i;
    }
  }
  return out;
}

enum class SplitPolicy { ByTimeRange, Random };

struct SplitResult {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> val;
  std::size_t dropped = 0;  // training windows discarded to keep frames disjoint
};

/**
 * Holds out round(val_fraction * n) samples. ByTimeRange takes the
 * chronologically latest ones and keeps only training windows that end
 * before validation starts; Random draws them with `seed`. Either way, a
 * training window sharing any frame timestamp with a validation window is
 * dropped, so the two sets are disjoint at the frame level.
 */
inline SplitResult split_train_val(std::vector<SequenceSample> samples, double val_fraction,
                                   SplitPolicy policy, std::uint64_t seed = 0) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValueError("split_train_val: val_fraction must lie in (0,1)");
  }
  const std::size_t n = samples.size();
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw ValueError("split_train_val: " + std::to_string(n) +
                     " samples cannot be split with val_fraction " + std::to_string(val_fraction));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (policy == SplitPolicy::ByTimeRange) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return samples[a].start() < samples[b].start();
    });
  } else {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<bool> is_val(n, false);
  if (policy == SplitPolicy::ByTimeRange) {
    for (std::size_t k = n - n_val; k < n; ++k) is_val[order[k]] = true;
  } else {
    for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;
  }

  std::set<std::int64_t> val_frames;
  Instant val_start = Instant::max();
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_val[i]) continue;
    val_start = std::min(val_start, samples[i].start());
    for (const auto* part : {&samples[i].x, &samples[i].y}) {
      for (const auto& f : *part) val_frames.insert(f.timestamp.time_since_epoch().count());
    }
  }

  SplitResult r;
  // Both sets keep the chronological (or original) order.
  std::vector<std::size_t> sorted = order;
  if (policy == SplitPolicy::Random) std::sort(sorted.begin(), sorted.end());
  for (std::size_t i : sorted) {
    if (is_val[i]) {
      r.val.push_back(std::move(samples[i]));
      continue;
    }
    bool clash = policy == SplitPolicy::ByTimeRange && samples[i].end() >= val_start;
    for (const auto* part : {&samples[i].x, &samples[i].y}) {
      for (const auto& f : *part) {
        if (val_frames.count(f.timestamp.time_since_epoch().count())) clash = true;
      }
    }
    if (clash) {
      ++r.dropped;
    } else {
      r.train.push_back(std::move(samples[i]));
    }
  }
  if (r.train.empty()) {
    throw ValueError("split_train_val: no training samples remain after enforcing disjointness");
  }
  return r;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_SEQUENCES_HPP
