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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nowcast/checkpoint.hpp"
#include "nowcast/model.hpp"
#include "oracles.hpp"

namespace {

using nowcast::Shape;
using nowcast::Tensor;
using nowcast::model::ArchitectureConfig;
using nowcast::model::InferenceMode;
using nowcast::model::LayerKind;
using nowcast::model::Mode;

ArchitectureConfig tiny_arch() {
  ArchitectureConfig a;
  a.input_frames = 3;
  a.output_frames = 3;
  a.frame_h = 5;
  a.frame_w = 5;
  a.blocks = {{2, 3}, {2, 3}};
  a.strict = false;
  return a;
}

TEST(Architecture, DefaultIsTheNineLayerStack) {
  const ArchitectureConfig a;
  const auto layers = a.layers();
  const std::vector<LayerKind> want{LayerKind::Input,    LayerKind::ConvLSTM, LayerKind::BatchNorm,
                                    LayerKind::ConvLSTM, LayerKind::BatchNorm, LayerKind::ConvLSTM,
                                    LayerKind::BatchNorm, LayerKind::ConvLSTM, LayerKind::OutputHead};
  EXPECT_EQ(layers, want);
  EXPECT_EQ(a.input_frames, 18u);
  EXPECT_EQ(a.output_frames, 18u);
  EXPECT_EQ(a.frame_h, 344u);
  EXPECT_EQ(a.frame_w, 315u);
  EXPECT_EQ(a.blocks.size(), 4u);
  EXPECT_EQ(a.blocks[0].kernel, 5u);
  EXPECT_EQ(a.blocks[3].kernel, 1u);
  EXPECT_DOUBLE_EQ(a.leaky_relu_alpha, 0.3);
  EXPECT_EQ(a.inference_mode, InferenceMode::DirectMapped);
  EXPECT_NO_THROW(a.validate());
}

TEST(Architecture, StrictModeRequiresFourBlocks) {
  auto a = tiny_arch();
  a.strict = true;
  EXPECT_THROW(a.validate(), nowcast::ConfigError);
  a.strict = false;
  EXPECT_NO_THROW(a.validate());
  a.blocks[0].kernel = 2;
  EXPECT_THROW(a.validate(), nowcast::ConfigError);
}

TEST(Architecture, KeyValueRoundTripAndFingerprint) {
  auto a = tiny_arch();
  a.inference_mode = InferenceMode::Autoregressive;
  a.input_frames = 4;
  a.peephole = true;
  nowcast::KeyValueConfig kv;
  a.write(kv);
  const auto b = ArchitectureConfig::read(nowcast::KeyValueConfig::parse(kv.to_text()));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 16u);
  b.validate();
  auto c = b;
  c.blocks[1].filters = 3;
  EXPECT_NE(c.fingerprint(), b.fingerprint());
}

TEST(Model, ParameterCountMatchesHandCount) {
  const auto p = nowcast::model::build_model<float>(tiny_arch(), 1);
  // Block 1: 8x1x3x3 + 8x2x3x3 + 8 = 224; block 2: 8x2x3x3 * 2 + 8 = 296;
  // one BatchNorm: gamma + beta = 4; head: 1x2x3x3 + 1 = 19.
  EXPECT_EQ(p.parameter_count(), 224u + 296u + 4u + 19u);
  EXPECT_EQ(p.lstm.size(), 2u);
  EXPECT_EQ(p.bn.size(), 1u);
  const auto names = p.trainable_names();
  EXPECT_EQ(names.front(), "convlstm0/input_kernels");
  EXPECT_EQ(names.back(), "head/bias");
}

TEST(Model, SameSeedSameWeights) {
  const auto a = nowcast::model::build_model<float>(tiny_arch(), 9);
  const auto b = nowcast::model::build_model<float>(tiny_arch(), 9);
  const auto c = nowcast::model::build_model<float>(tiny_arch(), 10);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Model, ForwardShapesAndRange) {
  std::mt19937_64 rng(1);
  const auto p = nowcast::model::build_model<double>(tiny_arch(), 2);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng);
  const auto train = nowcast::model::forward(p, x, Mode::Train);
  const auto infer = nowcast::model::forward(p, x, Mode::Infer);
  EXPECT_EQ(train.y_hat.shape(), (Shape{2, 3, 1, 5, 5}));
  for (double v : infer.y_hat.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(nowcast::model::backward(p, infer.caches, infer.y_hat), nowcast::CacheError);
}

TEST(Model, RejectsBadInputs) {
  const auto p = nowcast::model::build_model<float>(tiny_arch(), 2);
  EXPECT_THROW(nowcast::model::forward(p, Tensor<float>({1, 3, 1, 4, 5}, 0.5f), Mode::Infer), nowcast::ShapeError);
  EXPECT_THROW(nowcast::model::forward(p, Tensor<float>({1, 2, 1, 5, 5}, 0.5f), Mode::Infer), nowcast::ShapeError);
  EXPECT_THROW(nowcast::model::forward(p, Tensor<float>({1, 3, 1, 5, 5}, 1.5f), Mode::Infer), nowcast::ValueError);
}

// The full-model gradient against central differences on sampled parameters.
double sampled_model_fd(const ArchitectureConfig& arch, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto p = nowcast::model::build_model<double>(arch, seed);
  const auto x = oracle::random({2, arch.input_frames, 1, arch.frame_h, arch.frame_w}, 0, 1, rng);
  const auto y = oracle::random({2, arch.output_frames, 1, arch.frame_h, arch.frame_w}, 0, 1, rng);
  auto loss_of = [&](const nowcast::model::ModelParams<double>& q) {
    return nowcast::optim::bce_loss(nowcast::model::forward(q, x, Mode::Train).y_hat, y).value;
  };
  const auto fwd = nowcast::model::forward(p, x, Mode::Train);
  const auto grads = nowcast::model::backward(p, fwd.caches, nowcast::optim::bce_loss(fwd.y_hat, y).gradient);

  std::vector<std::pair<std::string, std::size_t>> picks;
  std::vector<std::pair<std::string, std::size_t>> all;
  p.for_each_trainable([&](const std::string& name, Tensor<double>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) all.emplace_back(name, i);
  });
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(samples, all.size()));

  double worst = 0.0;
  const double h = 1e-6;
  for (const auto& [name, idx] : all) {
    double* slot = nullptr;
    p.for_each_trainable([&](const std::string& n, Tensor<double>& t) {
      if (n == name) slot = &t[idx];
    });
    const double saved = *slot;
    *slot = saved + h;
    const double fp = loss_of(p);
    *slot = saved - h;
    const double fm = loss_of(p);
    *slot = saved;
    const double num = (fp - fm) / (2 * h);
    const double ana = grads[name][idx];
    worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
  }
  return worst;
}

TEST(Model, GradientOnSampledParametersMatchesFiniteDifferences) {
  EXPECT_LE(sampled_model_fd(tiny_arch(), 25, 3), 1e-3);
  auto a = tiny_arch();
  a.peephole = true;
  a.leaky_relu_after_batchnorm = false;
  EXPECT_LE(sampled_model_fd(a, 25, 4), 1e-3);
  a.inference_mode = InferenceMode::Autoregressive;
  EXPECT_LE(sampled_model_fd(a, 25, 5), 1e-3);
}

TEST(Model, TrainStepReducesLossOnAFixedBatch) {
  std::mt19937_64 rng(5);
  auto p = nowcast::model::build_model<float>(tiny_arch(), 5);
  auto st = nowcast::model::init_optim_state(p);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  const auto y = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  const double first = nowcast::model::train_step(p, st, x, y).loss;
  double last = first;
  for (int i = 0; i < 30; ++i) last = nowcast::model::train_step(p, st, x, y).loss;
  EXPECT_LT(last, first);
}

TEST(Model, TrainStepAbortsOnNonFiniteLossWithoutMutation) {
  auto p = nowcast::model::build_model<float>(tiny_arch(), 6);
  auto st = nowcast::model::init_optim_state(p);
  p.head.bias[0] = std::numeric_limits<float>::quiet_NaN();
  const auto before = p;
  const auto state_before = st;
  const Tensor<float> x({1, 3, 1, 5, 5}, 0.5f);
  EXPECT_THROW(nowcast::model::train_step(p, st, x, x), nowcast::TrainingError);
  EXPECT_EQ(p.lstm[0].input_kernels, before.lstm[0].input_kernels);
  EXPECT_EQ(p.bn[0].running_mean, before.bn[0].running_mean);
  EXPECT_TRUE(st == state_before);
}

TEST(Model, AutoregressiveTargetsShiftByOneFrame) {
  auto a = tiny_arch();
  a.inference_mode = InferenceMode::Autoregressive;
  Tensor<float> x({1, 3, 1, 1, 1}, std::vector<float>{0.1f, 0.2f, 0.3f});
  Tensor<float> y({1, 3, 1, 1, 1}, std::vector<float>{0.4f, 0.5f, 0.6f});
  const auto t = nowcast::model::training_targets(a, x, y);
  EXPECT_EQ(t.data()[0], 0.2f);
  EXPECT_EQ(t.data()[1], 0.3f);
  EXPECT_EQ(t.data()[2], 0.4f);
}

TEST(Model, PredictShapesInBothModes) {
  auto a = tiny_arch();
  const Tensor<float> x({2, 3, 1, 5, 5}, 0.25f);
  const auto direct = nowcast::model::predict(nowcast::model::build_model<float>(a, 1), x);
  EXPECT_EQ(direct.shape(), (Shape{2, 3, 1, 5, 5}));
  a.inference_mode = InferenceMode::Autoregressive;
  a.output_frames = 4;
  const auto auto_pred = nowcast::model::predict(nowcast::model::build_model<float>(a, 1), x);
  EXPECT_EQ(auto_pred.shape(), (Shape{2, 4, 1, 5, 5}));
  for (float v : auto_pred.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Model, FirstAutoregressiveStepEqualsTeacherForcedOutput) {
  // With inputs fed in order, the first rollout prediction is the last
  // output of the teacher-forced forward pass over the same inputs.
  auto a = tiny_arch();
  a.inference_mode = InferenceMode::Autoregressive;
  std::mt19937_64 rng(8);
  const auto p = nowcast::model::build_model<double>(a, 8);
  const auto x = oracle::random({1, 3, 1, 5, 5}, 0, 1, rng);
  const auto forced = nowcast::model::forward(p, x, Mode::Infer).y_hat;
  const auto rolled = nowcast::model::predict(p, x);
  EXPECT_LE(oracle::max_abs_diff(nowcast::slice_time(forced, 2), nowcast::slice_time(rolled, 0)), 1e-12);
}

TEST(Model, IdenticalSeedsGiveIdenticalLossTraces) {
  std::mt19937_64 rng(9);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  const auto y = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  auto trace = [&] {
    auto p = nowcast::model::build_model<float>(tiny_arch(), 77);
    auto st = nowcast::model::init_optim_state(p);
    std::vector<double> losses;
    for (int i = 0; i < 5; ++i) losses.push_back(nowcast::model::train_step(p, st, x, y).loss);
    return losses;
  };
  EXPECT_EQ(trace(), trace());
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Trained {
  nowcast::model::ModelParams<float> params;
  nowcast::optim::OptimState<float> state;
};

Trained trained_tiny() {
  std::mt19937_64 rng(10);
  Trained t{nowcast::model::build_model<float>(tiny_arch(), 10), {}};
  t.state = nowcast::model::init_optim_state(t.params);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  for (int i = 0; i < 3; ++i) nowcast::model::train_step(t.params, t.state, x, x);
  return t;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto t = trained_tiny();
  nowcast::model::TrainingMeta meta{2, 7, 10, {0.61, 0.5, 1.0 / 3.0}};
  const auto bytes = nowcast::model::encode_checkpoint(t.params, &t.state, meta);
  const auto ck = nowcast::model::decode_checkpoint(bytes);
  EXPECT_TRUE(ck.params == t.params);
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_TRUE(*ck.optimizer == t.state);
  EXPECT_EQ(ck.meta, meta);
  EXPECT_EQ(nowcast::model::encode_checkpoint(ck.params, &*ck.optimizer, ck.meta), bytes);
}

TEST(Checkpoint, WithoutOptimizer) {
  const auto t = trained_tiny();
  const auto ck = nowcast::model::decode_checkpoint(nowcast::model::encode_checkpoint(t.params, nullptr, {}));
  EXPECT_FALSE(ck.optimizer.has_value());
  EXPECT_TRUE(ck.params == t.params);
}

TEST(Checkpoint, CorruptionIsReportedByKind) {
  using nowcast::FormatErrorKind;
  const auto t = trained_tiny();
  const auto good = nowcast::model::encode_checkpoint(t.params, &t.state, {});
  auto kind_of = [](const nowcast::io::Bytes& b) {
    try {
      nowcast::model::decode_checkpoint(b);
    } catch (const nowcast::FormatError& e) {
      return e.kind();
    }
    return FormatErrorKind::Io;  // sentinel: decoded fine
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of(bad_magic), FormatErrorKind::BadMagic);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_EQ(kind_of(bad_version), FormatErrorKind::UnsupportedVersion);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_EQ(kind_of(truncated), FormatErrorKind::Truncated);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(kind_of(trailing), FormatErrorKind::Malformed);
}

}  // namespace
