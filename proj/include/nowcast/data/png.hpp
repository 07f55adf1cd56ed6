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

#ifndef NOWCAST_DATA_PNG_HPP
#define NOWCAST_DATA_PNG_HPP

#include <png.h>

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/error.hpp"

namespace nowcast::data {

/// 8-bit image, `channels` interleaved samples per pixel, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * channels]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return &pixels[(y * width + x) * channels];
  }
};

namespace detail {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace detail

/**
 * Decodes an 8-bit grayscale PNG (no alpha, no palette). Anything else is a
 * FormatError: Malformed for unreadable data, UnsupportedFormat for valid
 * PNGs of another color type or depth.
 */
inline Image8 decode_gray_png8(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0) {
    throw FormatError(FormatErrorKind::BadMagic, "not a PNG file");
  }
  detail::PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size())) {
    throw FormatError(FormatErrorKind::Malformed, std::string("png header: ") + p.img.message);
  }
  if (p.img.format != PNG_FORMAT_GRAY) {
    throw FormatError(FormatErrorKind::UnsupportedFormat,
                      "expected 8-bit grayscale PNG without alpha or palette");
  }
  Image8 out;
  out.width = p.img.width;
  out.height = p.img.height;
  out.channels = 1;
  out.pixels.resize(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, out.pixels.data(), 0, nullptr)) {
    throw FormatError(FormatErrorKind::Malformed, std::string("png data: ") + p.img.message);
  }
  return out;
}

/// Encodes a 1-channel (gray) or 3-channel (RGB) 8-bit image.
inline io::Bytes encode_png(const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw FormatError(FormatErrorKind::UnsupportedFormat, "png encoder supports gray or RGB");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw FormatError(FormatErrorKind::Malformed, "image buffer size does not match its shape");
  }
  detail::PngImage p;
  p.img.width = static_cast<png_uint_32>(image.width);
  p.img.height = static_cast<png_uint_32>(image.height);
  p.img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(p.img, size, 0, image.pixels.data(), 0, nullptr)) {
    throw FormatError(FormatErrorKind::Io, std::string("png encode: ") + p.img.message);
  }
  io::Bytes out(size);
  if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw FormatError(FormatErrorKind::Io, std::string("png encode: ") + p.img.message);
  }
  out.resize(size);
  return out;
}

/// Decodes any PNG into 8-bit RGB (used for inspecting rendered output).
inline Image8 decode_rgb_png8(std::span<const std::uint8_t> bytes) {
  detail::PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size())) {
    throw FormatError(FormatErrorKind::Malformed, std::string("png header: ") + p.img.message);
  }
  p.img.format = PNG_FORMAT_RGB;
  Image8 out;
  out.width = p.img.width;
  out.height = p.img.height;
  out.channels = 3;
  out.pixels.resize(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, out.pixels.data(), 0, nullptr)) {
    throw FormatError(FormatErrorKind::Malformed, std::string("png data: ") + p.img.message);
  }
  return out;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_PNG_HPP
