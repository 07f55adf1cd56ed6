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

#ifndef NOWCAST_DATA_FRAME_HPP
#define NOWCAST_DATA_FRAME_HPP

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::data {

using Instant = std::chrono::sys_seconds;
using std::chrono::minutes;
using std::chrono::seconds;

enum class FrameSource { Live, File, Synthetic, Predicted };

/// One normalized single-channel reflectivity image, values [1,h,w] in [0,1].
struct RadarFrame {
  Instant timestamp{};
  Tensor<float> values{Shape{1, 1, 1}};
  FrameSource source = FrameSource::File;

  std::size_t height() const { return values.dim(1); }
  std::size_t width() const { return values.dim(2); }

  void validate() const {
    if (values.rank() != 3 || values.dim(0) != 1) {
      throw ShapeError("radar frame must be [1,h,w], got " + to_string(values.shape()));
    }
    for (float v : values.data()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw ValueError("radar frame value outside [0,1]");
    }
  }
};

/// An (X, y) pair of consecutive frames.
struct SequenceSample {
  std::vector<RadarFrame> x;
  std::vector<RadarFrame> y;
  std::string provenance;
  bool warning = false;
  std::string warning_message;

  Instant start() const { return x.front().timestamp; }
  Instant end() const { return y.empty() ? x.back().timestamp : y.back().timestamp; }
};

struct Batch {
  Tensor<float> x;  // [N, T_in, 1, h, w]
  Tensor<float> y;  // [N, T_out, 1, h, w]
};

/// [T, 1, h, w] view of a frame list (copied).
inline Tensor<float> stack_frames(std::span<const RadarFrame> frames) {
  if (frames.empty()) throw ShapeError("cannot stack an empty frame list");
  const std::size_t h = frames[0].height(), w = frames[0].width();
  Tensor<float> out({frames.size(), 1, h, w});
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].values.shape() != Shape{1, h, w}) {
      throw ShapeError("frame " + std::to_string(t) + " has shape " +
                       to_string(frames[t].values.shape()) + ", expected [1," +
                       std::to_string(h) + "," + std::to_string(w) + "]");
    }
    std::copy(frames[t].values.data().begin(), frames[t].values.data().end(),
              out.raw() + t * h * w);
  }
  return out;
}

inline Batch stack_samples(std::span<const SequenceSample> samples) {
  if (samples.empty()) throw ShapeError("cannot batch zero samples");
  std::vector<Tensor<float>> xs, ys;
  for (const auto& s : samples) {
    xs.push_back(stack_frames(s.x));
    ys.push_back(stack_frames(s.y));
  }
  auto cat = [](const std::vector<Tensor<float>>& parts) {
    Shape shape = parts[0].shape();
    shape.insert(shape.begin(), parts.size());
    Tensor<float> out(shape);
    const std::size_t n = parts[0].size();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].shape() != parts[0].shape()) {
        throw ShapeError("sample " + std::to_string(i) + " shape " + to_string(parts[i].shape()) +
                         " differs from sample 0 " + to_string(parts[0].shape()));
      }
      std::copy(parts[i].data().begin(), parts[i].data().end(), out.raw() + i * n);
    }
    return out;
  };
  return {cat(xs), cat(ys)};
}

/// Splits a [T,1,h,w] (or [1,T,1,h,w]) tensor back into frames at the given
/// timestamps.
inline std::vector<RadarFrame> unstack_frames(const Tensor<float>& seq,
                                              std::span<const Instant> times,
                                              FrameSource source) {
  const std::size_t r = seq.rank();
  if (r != 4 && r != 5) throw ShapeError("unstack_frames expects [T,1,h,w]");
  const std::size_t steps = seq.dim(r - 4), h = seq.dim(r - 2), w = seq.dim(r - 1);
  if (times.size() != steps) throw ShapeError("unstack_frames: timestamp count mismatch");
  std::vector<RadarFrame> out;
  for (std::size_t t = 0; t < steps; ++t) {
    RadarFrame f;
    f.timestamp = times[t];
    f.source = source;
    f.values = Tensor<float>({1, h, w});
    std::copy_n(seq.raw() + t * h * w, h * w, f.values.raw());
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// UTC helpers

inline std::tm to_tm(Instant t) {
  const std::time_t tt = static_cast<std::time_t>(t.time_since_epoch().count());
  std::tm tm{};
  gmtime_r(&tt, &tm);
  return tm;
}

/// strftime over a UTC instant.
inline std::string format_utc(Instant t, const char* fmt = "%Y-%m-%dT%H:%M:%SZ") {
  const std::tm tm = to_tm(t);
  char buf[128];
  const std::size_t n = std::strftime(buf, sizeof(buf), fmt, &tm);
  return std::string(buf, n);
}

inline Instant make_utc(int year, int month, int day, int hour = 0, int minute = 0,
                        int second = 0) {
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  return Instant(seconds(timegm(&tm)));
}

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z]" or the compact "YYYYMMDDHHMM".
inline std::optional<Instant> parse_utc(const std::string& text) {
  int y, mo, d, h, mi, s = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d", &y, &mo, &d, &h, &mi, &s) >= 5) {
    return make_utc(y, mo, d, h, mi, s);
  }
  if (text.size() >= 12 &&
      std::sscanf(text.c_str(), "%4d%2d%2d%2d%2d", &y, &mo, &d, &h, &mi) == 5) {
    return make_utc(y, mo, d, h, mi);
  }
  return std::nullopt;
}

/// First run of 12 digits in a file name, read as YYYYMMDDHHMM.
inline std::optional<Instant> timestamp_from_name(const std::string& name) {
  std::size_t run = 0;
  for (std::size_t i = 0; i < name.size(); ++i) {
    run = std::isdigit(static_cast<unsigned char>(name[i])) ? run + 1 : 0;
    if (run == 12) return parse_utc(name.substr(i - 11, 12));
  }
  return std::nullopt;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_FRAME_HPP
