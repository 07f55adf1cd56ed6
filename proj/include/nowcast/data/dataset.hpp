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

#ifndef NOWCAST_DATA_DATASET_HPP
#define NOWCAST_DATA_DATASET_HPP

// Dataset directory layout:
//
//   <dir>/manifest.json
//   <dir>/<sample id>/x_00.rfrm ... x_<I-1>.rfrm
//   <dir>/<sample id>/y_00.rfrm ... y_<O-1>.rfrm
//
// The manifest records the window geometry and, per sample, its id,
// provenance and warning (if any). Keys are written in sorted order, so
// equal datasets produce byte-identical directories.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/data/codec.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/data/sequences.hpp"

namespace nowcast::data {

inline constexpr const char* kDatasetFormat = "nowcast-dataset";
inline constexpr int kDatasetVersion = 1;

struct Dataset {
  SequenceConfig sequence;
  std::vector<SequenceSample> samples;
  std::vector<std::string> ids;
};

namespace detail {

inline std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace detail

inline void write_dataset(const std::filesystem::path& dir, const std::vector<SequenceSample>& samples,
                          const SequenceConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = kDatasetFormat;
  manifest["version"] = kDatasetVersion;
  manifest["input_frames"] = cfg.input_frames;
  manifest["output_frames"] = cfg.output_frames;
  manifest["cadence_minutes"] = cfg.cadence.count();
  manifest["samples"] = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.x.size() != cfg.input_frames || s.y.size() != cfg.output_frames) {
      throw ShapeError("write_dataset: sample " + std::to_string(i) + " has " +
                       std::to_string(s.x.size()) + "/" + std::to_string(s.y.size()) +
                       " frames, expected " + std::to_string(cfg.input_frames) + "/" +
                       std::to_string(cfg.output_frames));
    }
    const std::string id = detail::numbered("sample_", i, 5);
    const fs::path sdir = dir / id;
    fs::create_directories(sdir);
    for (std::size_t t = 0; t < s.x.size(); ++t) {
      io::write_file(sdir / (detail::numbered("x_", t, 2) + ".rfrm"), encode_rfrm(s.x[t]));
    }
    for (std::size_t t = 0; t < s.y.size(); ++t) {
      io::write_file(sdir / (detail::numbered("y_", t, 2) + ".rfrm"), encode_rfrm(s.y[t]));
    }
    nlohmann::json entry{{"id", id}, {"provenance", s.provenance}};
    if (s.warning) entry["warning"] = s.warning_message;
    manifest["samples"].push_back(std::move(entry));
  }
  const std::string text = manifest.dump(2) + "\n";
  io::write_file(dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  const auto bytes = io::read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Malformed, "dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    if (manifest.at("format").get<std::string>() != kDatasetFormat) {
      throw FormatError(FormatErrorKind::BadMagic, "not a dataset manifest: " + dir.string());
    }
    if (manifest.at("version").get<int>() != kDatasetVersion) {
      throw FormatError(FormatErrorKind::UnsupportedVersion, "dataset version " + manifest.at("version").dump());
    }
    ds.sequence.input_frames = manifest.at("input_frames").get<std::size_t>();
    ds.sequence.output_frames = manifest.at("output_frames").get<std::size_t>();
    ds.sequence.cadence = minutes(manifest.at("cadence_minutes").get<long>());
    for (const auto& entry : manifest.at("samples")) {
      SequenceSample s;
      const auto id = entry.at("id").get<std::string>();
      s.provenance = entry.at("provenance").get<std::string>();
      if (entry.contains("warning")) {
        s.warning = true;
        s.warning_message = entry.at("warning").get<std::string>();
      }
      const auto sdir = dir / id;
      for (std::size_t t = 0; t < ds.sequence.input_frames; ++t) {
        s.x.push_back(decode_rfrm(io::read_file(sdir / (detail::numbered("x_", t, 2) + ".rfrm"))));
      }
      for (std::size_t t = 0; t < ds.sequence.output_frames; ++t) {
        s.y.push_back(decode_rfrm(io::read_file(sdir / (detail::numbered("y_", t, 2) + ".rfrm"))));
      }
      ds.ids.push_back(id);
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Malformed, "dataset manifest: " + std::string(e.what()));
  }
  return ds;
}

/// Every .png / .rfrm file in `dir`, decoded and sorted by timestamp.
inline std::vector<RadarFrame> load_frames_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && format_from_path(entry.path())) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<RadarFrame> frames;
  for (const auto& p : paths) frames.push_back(load_frame(p));
  std::stable_sort(frames.begin(), frames.end(),
                   [](const RadarFrame& a, const RadarFrame& b) { return a.timestamp < b.timestamp; });
  return frames;
}

}  // namespace nowcast::data

#endif  // NOWCAST_DATA_DATASET_HPP
