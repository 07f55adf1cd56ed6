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

#ifndef NOWCAST_ERROR_HPP
#define NOWCAST_ERROR_HPP

#include <stdexcept>
#include <string>

namespace nowcast {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer configurations that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Inputs outside an operation's domain (non-finite values, bad ranges).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A cache handed to a backward pass that does not belong to it.
class CacheError : public Error {
 public:
  using Error::Error;
};

/// Architecture configuration violating its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A training step aborted before touching the parameters.
class TrainingError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  Malformed,
  ValueOutOfRange,
  UnsupportedFormat,
  Io,
};

inline const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::UnsupportedVersion: return "unsupported version";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::Malformed: return "malformed";
    case FormatErrorKind::ValueOutOfRange: return "value out of range";
    case FormatErrorKind::UnsupportedFormat: return "unsupported format";
    case FormatErrorKind::Io: return "i/o failure";
  }
  return "unknown";
}

/// Decoding or encoding failure of one of the binary file formats
/// (RFRM frames, PNG, checkpoints). The kind tells callers what went wrong.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace nowcast

#endif  // NOWCAST_ERROR_HPP
