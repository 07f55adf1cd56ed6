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

#ifndef NOWCAST_CHECKPOINT_HPP
#define NOWCAST_CHECKPOINT_HPP

// Checkpoint layout (all integers little-endian):
//
//   "NCKP"                      magic, 4 bytes
//   u16 version                 currently 1
//   u32 length, bytes           config text block (KeyValueConfig format):
//                               arch.*, optimizer.*, meta.*
//   u32 count                   number of tensors that follow
//   count x { u32 name length, name bytes, u32 rank, rank x u32 dims,
//             prod(dims) x f32 payload }
//
// Model tensors come first in ModelParams::for_each_tensor order, then the
// optimizer accumulators as "adadelta/sq_grad/<name>" and
// "adadelta/sq_update/<name>".

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/binary_io.hpp"
#include "nowcast/config.hpp"
#include "nowcast/model.hpp"
#include "nowcast/optim.hpp"

namespace nowcast::model {

inline constexpr char kCheckpointMagic[4] = {'N', 'C', 'K', 'P'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;

  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  ModelParams<float> params;
  std::optional<optim::OptimState<float>> optimizer;
  TrainingMeta meta;
};

inline io::Bytes encode_checkpoint(const ModelParams<float>& params,
                                   const optim::OptimState<float>* optimizer,
                                   const TrainingMeta& meta) {
  KeyValueConfig kv;
  params.arch.write(kv);
  kv.set("optimizer.present", optimizer ? "true" : "false");
  if (optimizer) {
    kv.set_number("optimizer.rho", optimizer->config.rho);
    kv.set_number("optimizer.eps", optimizer->config.eps);
    kv.set_number("optimizer.lr_scale", optimizer->config.lr_scale);
  }
  kv.set_number("meta.epoch", meta.epoch);
  kv.set_number("meta.step", meta.step);
  kv.set_number("meta.seed", meta.seed);
  std::string hist;
  for (std::size_t i = 0; i < meta.loss_history.size(); ++i) {
    if (i) hist += ",";
    hist += KeyValueConfig::format_number(meta.loss_history[i]);
  }
  kv.set("meta.loss_history", hist);
  const std::string text = kv.to_text();

  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  params.for_each_tensor(
      [&](const std::string& n, const Tensor<float>& t) { tensors.emplace_back(n, &t); });
  if (optimizer) {
    for (std::size_t i = 0; i < optimizer->names.size(); ++i) {
      tensors.emplace_back("adadelta/sq_grad/" + optimizer->names[i], &optimizer->slots[i].sq_grad);
      tensors.emplace_back("adadelta/sq_update/" + optimizer->names[i],
                           &optimizer->slots[i].sq_update);
    }
  }

  io::ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t->data()) w.f32(v);
  }
  return std::move(w).bytes();
}

/// Parses a checkpoint image. Errors are FormatError with kind BadMagic,
/// UnsupportedVersion, Truncated or Malformed; nothing partial is returned.
inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 4 || r.raw(4) != std::string(kCheckpointMagic, 4)) {
    throw FormatError(FormatErrorKind::BadMagic, "checkpoint does not start with NCKP");
  }
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::UnsupportedVersion,
                      "checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const std::uint32_t text_len = r.u32();
  const std::string text = r.raw(text_len);
  KeyValueConfig kv;
  ArchitectureConfig arch;
  try {
    kv = KeyValueConfig::parse(text);
    arch = ArchitectureConfig::read(kv);
    arch.validate();
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::Malformed, std::string("checkpoint config: ") + e.what());
  }

  std::map<std::string, Tensor<float>> found;
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.raw(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError(FormatErrorKind::Malformed, "tensor " + name + " rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw FormatError(FormatErrorKind::Malformed, "tensor " + name + " has a zero dimension");
      n *= d;
    }
    r.need(n * 4);
    std::vector<float> data(n);
    for (float& v : data) v = r.f32();
    if (!found.emplace(name, Tensor<float>(std::move(shape), std::move(data))).second) {
      throw FormatError(FormatErrorKind::Malformed, "duplicate tensor " + name);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::Malformed,
                      std::to_string(r.remaining()) + " trailing bytes after the last tensor");
  }

  auto take = [&](const std::string& name, Tensor<float>& dst) {
    auto it = found.find(name);
    if (it == found.end()) throw FormatError(FormatErrorKind::Malformed, "missing tensor " + name);
    if (it->second.shape() != dst.shape()) {
      throw FormatError(FormatErrorKind::Malformed, "tensor " + name + " has shape " +
                                                        to_string(it->second.shape()) + ", arch needs " +
                                                        to_string(dst.shape()));
    }
    dst = std::move(it->second);
    found.erase(it);
  };

  Checkpoint ck;
  ck.params = build_model<float>(arch, 0);
  ck.params.for_each_tensor([&](const std::string& n, Tensor<float>& t) { take(n, t); });
  try {
    if (kv.get_bool("optimizer.present", false)) {
      optim::AdadeltaConfig cfg;
      cfg.rho = kv.get_number("optimizer.rho", cfg.rho);
      cfg.eps = kv.get_number("optimizer.eps", cfg.eps);
      cfg.lr_scale = kv.get_number("optimizer.lr_scale", cfg.lr_scale);
      auto state = init_optim_state(ck.params, cfg);
      for (std::size_t i = 0; i < state.names.size(); ++i) {
        take("adadelta/sq_grad/" + state.names[i], state.slots[i].sq_grad);
        take("adadelta/sq_update/" + state.names[i], state.slots[i].sq_update);
      }
      ck.optimizer = std::move(state);
    }
    ck.meta.epoch = kv.get_number<std::size_t>("meta.epoch", 0);
    ck.meta.step = kv.get_number<std::size_t>("meta.step", 0);
    ck.meta.seed = kv.get_number<std::uint64_t>("meta.seed", 0);
    const std::string hist = kv.get_string("meta.loss_history", "");
    std::size_t pos = 0;
    while (pos < hist.size()) {
      std::size_t end = hist.find(',', pos);
      if (end == std::string::npos) end = hist.size();
      ck.meta.loss_history.push_back(
          KeyValueConfig::parse_number<double>(hist.substr(pos, end - pos), "meta.loss_history"));
      pos = end + 1;
    }
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::Malformed, std::string("checkpoint config: ") + e.what());
  } catch (const ValueError& e) {
    throw FormatError(FormatErrorKind::Malformed, std::string("checkpoint optimizer: ") + e.what());
  }
  if (!found.empty()) {
    throw FormatError(FormatErrorKind::Malformed, "unexpected tensor " + found.begin()->first);
  }
  return ck;
}

inline void save_checkpoint(const ModelParams<float>& params,
                            const optim::OptimState<float>* optimizer, const TrainingMeta& meta,
                            const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params, optimizer, meta);
  const std::filesystem::path tmp = path.string() + ".part";
  io::write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint(bytes);
}

}  // namespace nowcast::model

#endif  // NOWCAST_CHECKPOINT_HPP
