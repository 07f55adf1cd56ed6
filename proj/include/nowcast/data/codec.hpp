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

#ifndef NOWCAST_DATA_CODEC_HPP
#define NOWCAST_DATA_CODEC_HPP

// RFRM raw frame container (little-endian):
//
//   "RFRM"        4 bytes magic
//   u16 version   1
//   u32 height
//   u32 width
//   i64 timestamp UNIX epoch seconds, UTC
//   f32 payload   height * width values in [0,1], row-major

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "nowcast/binary_io.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/data/png.hpp"

namespace nowcast::data {

inline constexpr char kRfrmMagic[4] = {'R', 'F', 'R', 'M'};
inline constexpr std::uint16_t kRfrmVersion = 1;

enum class FrameFormat { GrayPng8, RawF32 };

inline io::Bytes encode_rfrm(const RadarFrame& frame) {
  frame.validate();
  io::ByteWriter w;
  w.raw(std::string_view(kRfrmMagic, 4));
  w.u16(kRfrmVersion);
  w.u32(static_cast<std::uint32_t>(frame.height()));
  w.u32(static_cast<std::uint32_t>(frame.width()));
  w.i64(frame.timestamp.time_since_epoch().count());
  for (float v : frame.values.data()) w.f32(v);
  return std::move(w).bytes();
}

inline RadarFrame decode_rfrm(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "RFRM frame");
  if (r.remaining() < 4 || r.raw(4) != std::string(kRfrmMagic, 4)) {
    throw FormatError(FormatErrorKind::BadMagic, "frame does not start with RFRM");
  }
  const std::uint16_t version = r.u16();
  if (version != kRfrmVersion) {
    throw FormatError(FormatErrorKind::UnsupportedVersion,
                      "RFRM version " + std::to_string(version));
  }
  const std::uint32_t h = r.u32(), w = r.u32();
  if (h == 0 || w == 0) throw FormatError(FormatErrorKind::Malformed, "RFRM with zero dimension");
  RadarFrame f;
  f.timestamp = Instant(seconds(r.i64()));
  f.source = FrameSource::File;
  r.need(static_cast<std::size_t>(h) * w * 4);
  f.values = Tensor<float>({1, h, w});
  for (float& v : f.values.data()) {
    v = r.f32();
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw FormatError(FormatErrorKind::ValueOutOfRange, "RFRM value outside [0,1]");
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::Malformed, "trailing bytes after RFRM payload");
  }
  return f;
}

/**
 * GrayPng8 maps pixel v to v/255 and takes its timestamp from `timestamp`
 * (the epoch when absent); RawF32 reads an RFRM container.
 */
inline RadarFrame decode_frame(std::span<const std::uint8_t> bytes, FrameFormat format,
                               std::optional<Instant> timestamp = std::nullopt) {
  if (format == FrameFormat::RawF32) return decode_rfrm(bytes);
  const Image8 img = decode_gray_png8(bytes);
  RadarFrame f;
  f.timestamp = timestamp.value_or(Instant{});
  f.source = FrameSource::File;
  f.values = Tensor<float>({1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) f.values[i] = img.pixels[i] / 255.0f;
  return f;
}

/// Quantizes to an 8-bit grayscale PNG (round(v * 255)).
inline io::Bytes encode_gray_png(const RadarFrame& frame) {
  Image8 img;
  img.width = frame.width();
  img.height = frame.height();
  img.channels = 1;
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(frame.values[i], 0.0f, 1.0f) * 255.0f));
  }
  return encode_png(img);
}

inline std::optional<FrameFormat> format_from_path(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png" || ext == ".PNG") return FrameFormat::GrayPng8;
  if (ext == ".rfrm") return FrameFormat::RawF32;
  return std::nullopt;
}

/// Reads a frame file, inferring the format from its extension. PNG
/// timestamps come from a YYYYMMDDHHMM run in the file name.
inline RadarFrame load_frame(const std::filesystem::path& path) {
  const auto fmt = format_from_path(path);
  if (!fmt) {
    throw FormatError(FormatErrorKind::UnsupportedFormat, "unknown frame extension: " + path.string());
  }
  const auto bytes = io::read_file(path);
  return decode_frame(bytes, *fmt, timestamp_from_name(path.filename().string()));
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_CODEC_HPP
