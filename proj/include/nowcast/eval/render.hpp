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

#ifndef NOWCAST_EVAL_RENDER_HPP
#define NOWCAST_EVAL_RENDER_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/data/png.hpp"
#include "nowcast/eval/gif.hpp"
#include "nowcast/eval/viridis.hpp"

namespace nowcast::eval {

namespace detail {

// 3x5 bitmap glyphs; each row holds three bits, most significant on the left.
struct Glyph {
  char c;
  std::array<std::uint8_t, 5> rows;
};

inline constexpr std::array<Glyph, 26> kFont = {{
    {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
    {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
    {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'+', {0, 2, 7, 2, 0}}, {'-', {0, 0, 7, 0, 0}},
    {'A', {2, 5, 7, 5, 5}}, {'D', {6, 5, 5, 5, 6}}, {'E', {7, 4, 6, 4, 7}}, {'H', {5, 5, 7, 5, 5}},
    {'I', {7, 2, 2, 2, 7}}, {'M', {5, 7, 7, 5, 5}}, {'N', {6, 5, 5, 5, 5}}, {'P', {6, 5, 6, 4, 4}},
    {'R', {6, 5, 6, 5, 5}}, {'S', {7, 4, 7, 1, 7}}, {'T', {7, 2, 2, 2, 2}}, {'U', {5, 5, 5, 5, 7}},
    {'X', {5, 5, 2, 5, 5}}, {' ', {0, 0, 0, 0, 0}},
}};

inline const Glyph* find_glyph(char c) {
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

inline std::size_t text_width(std::string_view text, std::size_t scale) {
  return text.empty() ? 0 : (text.size() * 4 - 1) * scale;
}

// Draws `text` with its top-left corner at (x0, y0); pixels outside the
// image are skipped. Unknown characters render blank.
inline void draw_text(IndexedImage& img, std::string_view text, std::size_t x0, std::size_t y0,
                      std::size_t scale, std::uint8_t color) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    const Glyph* g = find_glyph(text[k]);
    if (g == nullptr) continue;
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (!((g->rows[r] >> (2 - c)) & 1)) continue;
        for (std::size_t dy = 0; dy < scale; ++dy) {
          for (std::size_t dx = 0; dx < scale; ++dx) {
            const std::size_t x = x0 + (k * 4 + c) * scale + dx, y = y0 + r * scale + dy;
            if (x < img.width && y < img.height) img.at(x, y) = color;
          }
        }
      }
    }
  }
}

// Copies `frame` into `img` at (x0, y0), each source pixel a zoom x zoom block.
inline void blit_frame(IndexedImage& img, const data::RadarFrame& frame, std::size_t x0, std::size_t y0,
                       std::size_t zoom) {
  const std::size_t h = frame.height(), w = frame.width();
  for (std::size_t y = 0; y < h * zoom; ++y) {
    for (std::size_t x = 0; x < w * zoom; ++x) {
      img.at(x0 + x, y0 + y) = viridis_index(frame.values[(y / zoom) * w + x / zoom]);
    }
  }
}

inline void write_bytes(const std::filesystem::path& path, const io::Bytes& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw FormatError(FormatErrorKind::Io, "cannot create " + path.parent_path().string());
  io::write_file(path, bytes);
}

}  // namespace detail

/// Expands palette indices to 8-bit RGB through the viridis table.
inline data::Image8 to_rgb(const IndexedImage& img) {
  data::Image8 out;
  out.width = img.width;
  out.height = img.height;
  out.channels = 3;
  out.pixels.resize(img.width * img.height * 3);
  for (std::size_t i = 0; i < img.index.size(); ++i) {
    const Rgb c = kViridis[img.index[i]];
    out.pixels[3 * i] = c.r;
    out.pixels[3 * i + 1] = c.g;
    out.pixels[3 * i + 2] = c.b;
  }
  return out;
}

/// A frame as palette indices round(v * 255), one pixel per value.
inline IndexedImage colorize(const data::RadarFrame& frame) {
  frame.validate();
  IndexedImage img(frame.width(), frame.height());
  detail::blit_frame(img, frame, 0, 0, 1);
  return img;
}

/// 8-bit RGB PNG of the frame in viridis, same dimensions as the frame.
inline void render_frame(const data::RadarFrame& frame, const std::filesystem::path& out) {
  detail::write_bytes(out, data::encode_png(to_rgb(colorize(frame))));
}

struct RenderOptions {
  std::chrono::milliseconds gif_delay{200};
  std::chrono::minutes cadence{5};
  std::size_t strip_frames = 4;
  std::size_t min_half_width = 64;  // frames are enlarged by an integer zoom up to this width
  std::size_t separator = 2;
};

/**
 * Geometry of one comparison panel: a label band of height `band` across
 * the top, then the truth frame on the left and the prediction on the
 * right, separated by `separator` columns.
 */
struct PanelLayout {
  std::size_t zoom = 1;
  std::size_t half_width = 0;  // zoomed frame width
  std::size_t body_height = 0;
  std::size_t band = 0;
  std::size_t text_scale = 1;
  std::size_t separator = 0;

  std::size_t width() const { return 2 * half_width + separator; }
  std::size_t height() const { return band + body_height; }
  std::size_t left_x() const { return 0; }
  std::size_t right_x() const { return half_width + separator; }

  static PanelLayout make(std::size_t h, std::size_t w, const RenderOptions& opts) {
    PanelLayout l;
    l.zoom = std::max<std::size_t>(1, (opts.min_half_width + w - 1) / w);
    l.half_width = w * l.zoom;
    l.body_height = h * l.zoom;
    l.text_scale = std::max<std::size_t>(1, l.half_width / 64);
    l.band = 5 * l.text_scale + 4;
    l.separator = opts.separator;
    return l;
  }
};

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kTextColor = 255;

/// Panel for lead step `lead` (1-based), labeled "TRUTH +<min>M" / "PRED +<min>M".
inline IndexedImage compose_panel(const data::RadarFrame& truth, const data::RadarFrame& pred, std::size_t lead,
                                  const RenderOptions& opts = {}) {
  truth.validate();
  pred.validate();
  if (truth.values.shape() != pred.values.shape()) {
    throw ShapeError("compose_panel: truth " + to_string(truth.values.shape()) + " vs prediction " +
                     to_string(pred.values.shape()));
  }
  const auto l = PanelLayout::make(truth.height(), truth.width(), opts);
  IndexedImage img(l.width(), l.height(), kBackground);
  const std::string when = " +" + std::to_string(opts.cadence.count() * static_cast<long>(lead)) + "M";
  detail::draw_text(img, "TRUTH" + when, l.left_x() + 2, 2, l.text_scale, kTextColor);
  detail::draw_text(img, "PRED" + when, l.right_x() + 2, 2, l.text_scale, kTextColor);
  detail::blit_frame(img, truth, l.left_x(), l.band, l.zoom);
  detail::blit_frame(img, pred, l.right_x(), l.band, l.zoom);
  return img;
}

/// The first `rows` panels stacked top to bottom (lead 1 at the top).
inline IndexedImage compose_strip(std::span<const IndexedImage> panels, std::size_t rows) {
  rows = std::min(rows, panels.size());
  if (rows == 0) throw ValueError("compose_strip: no panels");
  const std::size_t w = panels[0].width, h = panels[0].height;
  IndexedImage img(w, h * rows, kBackground);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(panels[r].index.begin(), panels[r].index.end(), img.index.begin() + r * w * h);
  }
  return img;
}

struct ComparisonOutputs {
  std::vector<std::filesystem::path> panels;
  std::filesystem::path gif;
  std::filesystem::path strip;
};

/**
 * Writes panel_NN.png for every lead step, comparison.gif animating all
 * panels, and strip.png with the first `opts.strip_frames` panels.
 */
inline ComparisonOutputs render_comparison(std::span<const data::RadarFrame> pred,
                                           std::span<const data::RadarFrame> truth,
                                           const std::filesystem::path& out_dir,
                                           const RenderOptions& opts = {}) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ShapeError("render_comparison: " + std::to_string(pred.size()) + " predicted vs " +
                     std::to_string(truth.size()) + " true frames");
  }
  std::vector<IndexedImage> panels;
  for (std::size_t k = 0; k < pred.size(); ++k) panels.push_back(compose_panel(truth[k], pred[k], k + 1, opts));

  ComparisonOutputs out;
  for (std::size_t k = 0; k < panels.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "panel_%02zu.png", k + 1);
    out.panels.push_back(out_dir / name);
    detail::write_bytes(out.panels.back(), data::encode_png(to_rgb(panels[k])));
  }
  out.gif = out_dir / "comparison.gif";
  detail::write_bytes(out.gif, encode_gif(panels, kViridis, opts.gif_delay));
  out.strip = out_dir / "strip.png";
  detail::write_bytes(out.strip, data::encode_png(to_rgb(compose_strip(panels, opts.strip_frames))));
  return out;
}

}  // namespace nowcast::eval

#endif  // NOWCAST_EVAL_RENDER_HPP
