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

#ifndef NOWCAST_DATA_RESIZE_HPP
#define NOWCAST_DATA_RESIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nowcast/data/frame.hpp"

namespace nowcast::data {

namespace detail {

struct AreaTap {
  std::size_t src;
  double weight;
};

// For each output cell i, the source cells overlapping [i*s, (i+1)*s) with
// weights overlap / s (summing to 1).
inline std::vector<std::vector<AreaTap>> area_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  std::vector<std::vector<AreaTap>> taps(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double lo = i * scale, hi = (i + 1) * scale;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(in, static_cast<std::size_t>(std::ceil(hi)));
    for (std::size_t j = first; j < last; ++j) {
      const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
      if (overlap > 0.0) taps[i].push_back({j, overlap / scale});
    }
  }
  return taps;
}

}  // namespace detail

/**
 * Box-filter downsizing: every output pixel is the area-weighted mean of the
 * source pixels its footprint covers, fractional edges included. Output
 * values stay within [min, max] of the input.
 */
inline RadarFrame resize_area(const RadarFrame& frame, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_area: output dimensions must be >= 1");
  const std::size_t in_h = frame.height(), in_w = frame.width();
  if (out_h > in_h || out_w > in_w) {
    throw ShapeError("resize_area only shrinks: " + std::to_string(in_h) + "x" +
                     std::to_string(in_w) + " -> " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  const auto rows = detail::area_taps(in_h, out_h);
  const auto cols = detail::area_taps(in_w, out_w);

  // Columns first, then rows.
  std::vector<double> tmp(in_h * out_w, 0.0);
  for (std::size_t y = 0; y < in_h; ++y) {
    const float* src = frame.values.raw() + y * in_w;
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (const auto& t : cols[x]) acc += t.weight * src[t.src];
      tmp[y * out_w + x] = acc;
    }
  }
  const auto [mn, mx] = std::minmax_element(frame.values.data().begin(), frame.values.data().end());
  RadarFrame out;
  out.timestamp = frame.timestamp;
  out.source = frame.source;
  out.values = Tensor<float>({1, out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (const auto& t : rows[y]) acc += t.weight * tmp[t.src * out_w + x];
      out.values[y * out_w + x] = std::clamp(static_cast<float>(acc), *mn, *mx);
    }
  }
  return out;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_RESIZE_HPP
