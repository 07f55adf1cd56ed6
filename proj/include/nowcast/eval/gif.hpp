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

#ifndef NOWCAST_EVAL_GIF_HPP
#define NOWCAST_EVAL_GIF_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/error.hpp"
#include "nowcast/eval/viridis.hpp"

namespace nowcast::eval {

/// 8-bit palette indices, row-major.
struct IndexedImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> index;

  IndexedImage() = default;
  IndexedImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), index(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return index[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return index[y * width + x]; }
  friend bool operator==(const IndexedImage&, const IndexedImage&) = default;
};

namespace detail {

class BitPacker {
 public:
  void put(std::uint32_t code, unsigned bits) {
    acc_ |= code << nbits_;
    nbits_ += bits;
    while (nbits_ >= 8) {
      out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }

  std::vector<std::uint8_t> finish() && {
    if (nbits_ > 0) out_.push_back(static_cast<std::uint8_t>(acc_ & 0xff));
    return std::move(out_);
  }

 private:
  std::uint32_t acc_ = 0;
  unsigned nbits_ = 0;
  std::vector<std::uint8_t> out_;
};

// Variable-width LZW over 8-bit indices, as used by GIF (codes up to 12
// bits, clear code emitted when the table fills).
inline std::vector<std::uint8_t> lzw_encode(std::span<const std::uint8_t> data) {
  constexpr unsigned kMinCodeSize = 8;
  constexpr int kClear = 1 << kMinCodeSize, kEnd = kClear + 1, kMaxCode = 4095;
  std::vector<std::int16_t> table(static_cast<std::size_t>(kMaxCode + 1) * 256, -1);
  BitPacker bits;
  unsigned size = kMinCodeSize + 1;
  int max_code = kEnd;
  bits.put(kClear, size);
  if (data.empty()) {
    bits.put(kEnd, size);
    return std::move(bits).finish();
  }
  int prefix = data[0];
  for (std::size_t i = 1; i < data.size(); ++i) {
    const std::uint8_t c = data[i];
    const std::size_t key = static_cast<std::size_t>(prefix) * 256 + c;
    if (table[key] >= 0) {
      prefix = table[key];
      continue;
    }
    bits.put(static_cast<std::uint32_t>(prefix), size);
    table[key] = static_cast<std::int16_t>(++max_code);
    if (max_code >= (1 << size)) ++size;
    if (max_code == kMaxCode) {
      bits.put(kClear, size);
      std::fill(table.begin(), table.end(), std::int16_t{-1});
      size = kMinCodeSize + 1;
      max_code = kEnd;
    }
    prefix = c;
  }
  bits.put(static_cast<std::uint32_t>(prefix), size);
  bits.put(kEnd, size);
  return std::move(bits).finish();
}

}  // namespace detail

/**
 * Animated GIF89a with a single global 256-color palette, looping forever.
 * All frames must share one size. `delay` is rounded to centiseconds.
 */
inline io::Bytes encode_gif(std::span<const IndexedImage> frames, const std::array<Rgb, 256>& palette,
                            std::chrono::milliseconds delay) {
  if (frames.empty()) throw ValueError("encode_gif: no frames");
  const std::size_t w = frames[0].width, h = frames[0].height;
  if (w == 0 || h == 0 || w > 0xffff || h > 0xffff) throw ShapeError("encode_gif: bad frame size");
  io::ByteWriter out;
  out.raw(std::string_view("GIF89a"));
  out.u16(static_cast<std::uint16_t>(w));
  out.u16(static_cast<std::uint16_t>(h));
  out.append({0xf7, 0x00, 0x00});  // global table of 2^8 entries, 8-bit color resolution
  for (const auto& c : palette) out.append({c.r, c.g, c.b});
  out.append({0x21, 0xff, 0x0b});
  out.raw(std::string_view("NETSCAPE2.0"));
  out.append({0x03, 0x01, 0x00, 0x00, 0x00});  // loop count 0: forever

  const auto cs = static_cast<std::uint16_t>((delay.count() + 5) / 10);
  for (const auto& f : frames) {
    if (f.width != w || f.height != h || f.index.size() != w * h) {
      throw ShapeError("encode_gif: frames differ in size");
    }
    out.append({0x21, 0xf9, 0x04, 0x04});  // graphic control, disposal: leave in place
    out.u16(cs);
    out.append({0x00, 0x00});
    out.append({0x2c});
    out.u16(0);
    out.u16(0);
    out.u16(static_cast<std::uint16_t>(w));
    out.u16(static_cast<std::uint16_t>(h));
    out.append({0x00, 0x08});  // no local table; LZW minimum code size 8
    const auto lzw = detail::lzw_encode(f.index);
    for (std::size_t pos = 0; pos < lzw.size(); pos += 255) {
      const std::size_t n = std::min<std::size_t>(255, lzw.size() - pos);
      out.append({static_cast<std::uint8_t>(n)});
      out.append(std::span(lzw.data() + pos, n));
    }
    out.append({0x00});
  }
  out.append({0x3b});
  return std::move(out).bytes();
}

}  // namespace nowcast::eval

#endif  // NOWCAST_EVAL_GIF_HPP
