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

#ifndef NOWCAST_TRAINING_HPP
#define NOWCAST_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "nowcast/checkpoint.hpp"
#include "nowcast/config.hpp"
#include "nowcast/data/frame.hpp"
#include "nowcast/model.hpp"
#include "nowcast/optim.hpp"

namespace nowcast::train {

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;  // model initialization and sample order
  bool shuffle = true;
  optim::AdadeltaConfig optimizer;

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    try {
      optimizer.validate();
    } catch (const ValueError& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }

  void write(KeyValueConfig& kv) const {
    kv.set_number("train.epochs", epochs);
    kv.set_number("train.batch_size", batch_size);
    kv.set_number("train.seed", seed);
    kv.set("train.shuffle", shuffle ? "true" : "false");
    kv.set_number("train.rho", optimizer.rho);
    kv.set_number("train.eps", optimizer.eps);
    kv.set_number("train.lr_scale", optimizer.lr_scale);
  }

  static TrainConfig read(const KeyValueConfig& kv) {
    TrainConfig c;
    c.epochs = kv.get_number("train.epochs", c.epochs);
    c.batch_size = kv.get_number("train.batch_size", c.batch_size);
    c.seed = kv.get_number("train.seed", c.seed);
    c.shuffle = kv.get_bool("train.shuffle", c.shuffle);
    c.optimizer.rho = kv.get_number("train.rho", c.optimizer.rho);
    c.optimizer.eps = kv.get_number("train.eps", c.optimizer.eps);
    c.optimizer.lr_scale = kv.get_number("train.lr_scale", c.optimizer.lr_scale);
    return c;
  }
};

/// Sample order of one epoch. The permutation depends only on (seed, epoch),
/// so a run resumed from a checkpoint visits samples in the same order.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

struct EpochReport {
  std::size_t epoch = 0;  // 1-based count of completed epochs
  double mean_loss = 0.0;
  std::size_t steps = 0;
};

struct FitHooks {
  std::function<void(std::size_t step, double loss)> on_step;
  std::function<void(const EpochReport&, const model::ModelParams<float>&, const optim::OptimState<float>&,
                     const model::TrainingMeta&)>
      on_epoch;
};

/**
 * Runs epochs meta.epoch+1 .. cfg.epochs over `samples` in mini-batches of
 * cfg.batch_size (the last batch of an epoch may be smaller). meta records
 * the completed epoch count, the total step count and the mean loss of
 * every epoch; pass a checkpoint's meta to resume.
 */
inline model::TrainingMeta fit(model::ModelParams<float>& params, optim::OptimState<float>& state,
                               std::span<const data::SequenceSample> samples, const TrainConfig& cfg,
                               model::TrainingMeta meta = {}, const FitHooks& hooks = {}) {
  cfg.validate();
  if (samples.empty()) throw ValueError("fit: no training samples");
  meta.seed = cfg.seed;
  for (std::size_t epoch = meta.epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(samples.size(), cfg.seed, epoch, cfg.shuffle);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<data::SequenceSample> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);
      const auto b = data::stack_samples(batch);
      const double loss = model::train_step(params, state, b.x, b.y).loss;
      loss_sum += loss;
      ++steps;
      ++meta.step;
      if (hooks.on_step) hooks.on_step(meta.step, loss);
    }
    meta.epoch = epoch + 1;
    const EpochReport report{meta.epoch, loss_sum / static_cast<double>(steps), steps};
    meta.loss_history.push_back(report.mean_loss);
    if (hooks.on_epoch) hooks.on_epoch(report, params, state, meta);
  }
  return meta;
}

}  // namespace nowcast::train

#endif  // NOWCAST_TRAINING_HPP
