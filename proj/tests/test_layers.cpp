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

#include <random>

#include "nowcast/nn/batchnorm.hpp"
#include "nowcast/nn/output_head.hpp"
#include "oracles.hpp"

namespace {

using nowcast::Shape;
using nowcast::Tensor;
using nowcast::nn::BatchNormParams;
using nowcast::nn::Mode;

BatchNormParams<double> random_bn(std::size_t ch, std::mt19937_64& rng) {
  auto p = BatchNormParams<double>::make(ch);
  p.gamma = oracle::random({ch}, 0.5, 1.5, rng);
  p.beta = oracle::random({ch}, -0.5, 0.5, rng);
  return p;
}

TEST(BatchNorm, TrainModeMatchesOracleOnRank4And5) {
  std::mt19937_64 rng(61);
  for (const Shape& shape : {Shape{3, 2, 4, 4}, Shape{2, 3, 4, 2, 3}}) {
    const std::size_t ch = shape[shape.size() - 3];
    const auto p = random_bn(ch, rng);
    const auto x = oracle::random(shape, -2, 3, rng);
    const auto got = nowcast::nn::batchnorm_forward(x, p, Mode::Train);
    const auto want = oracle::batchnorm(x, std::vector<double>(p.gamma.data().begin(), p.gamma.data().end()),
                                        std::vector<double>(p.beta.data().begin(), p.beta.data().end()), 1e-3);
    EXPECT_LE(oracle::max_abs_diff(got.y, want), 1e-12);
  }
}

TEST(BatchNorm, InferModeUsesRunningStatistics) {
  auto p = BatchNormParams<double>::make(1);
  p.running_mean[0] = 2.0;
  p.running_var[0] = 4.0;
  Tensor<double> x({1, 1, 1, 2}, std::vector<double>{2.0, 4.0});
  const auto y = nowcast::nn::batchnorm_forward(x, p, Mode::Infer).y;
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 2.0 / std::sqrt(4.0 + 1e-3), 1e-15);
}

TEST(BatchNorm, RunningStatsFollowMomentum) {
  auto p = BatchNormParams<double>::make(1, 1e-3, 0.99);
  Tensor<double> x({1, 1, 1, 2}, std::vector<double>{1.0, 3.0});  // mean 2, biased var 1
  nowcast::nn::batchnorm_forward(x, p, Mode::Train);
  EXPECT_NEAR(p.running_mean[0], 0.99 * 0.0 + 0.01 * 2.0, 1e-15);
  EXPECT_NEAR(p.running_var[0], 0.99 * 1.0 + 0.01 * 1.0, 1e-15);
  // The const overload leaves the statistics alone.
  const auto before = p;
  nowcast::nn::batchnorm_forward(x, static_cast<const BatchNormParams<double>&>(p), Mode::Train);
  EXPECT_EQ(p.running_mean, before.running_mean);
}

TEST(BatchNorm, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(62);
  for (const Shape& shape : {Shape{2, 3, 3, 3}, Shape{2, 2, 2, 4, 4}}) {
    const std::size_t ch = shape[shape.size() - 3];
    const auto p = random_bn(ch, rng);
    const auto x = oracle::random(shape, -1, 1, rng);
    const auto fwd = nowcast::nn::batchnorm_forward(x, p, Mode::Train);
    const auto w = oracle::random(shape, -1, 1, rng);
    const auto g = nowcast::nn::batchnorm_backward(fwd.cache, p, w);
    auto loss_x = [&](const Tensor<double>& v) {
      return oracle::project(nowcast::nn::batchnorm_forward(v, p, Mode::Train).y, w);
    };
    auto loss_gamma = [&](const Tensor<double>& v) {
      auto q = p;
      q.gamma = v;
      return oracle::project(nowcast::nn::batchnorm_forward(x, q, Mode::Train).y, w);
    };
    auto loss_beta = [&](const Tensor<double>& v) {
      auto q = p;
      q.beta = v;
      return oracle::project(nowcast::nn::batchnorm_forward(x, q, Mode::Train).y, w);
    };
    EXPECT_LE(oracle::fd_error(loss_x, x, g.dx), 1e-4);
    EXPECT_LE(oracle::fd_error(loss_gamma, p.gamma, g.dgamma), 1e-4);
    EXPECT_LE(oracle::fd_error(loss_beta, p.beta, g.dbeta), 1e-4);
  }
}

TEST(BatchNorm, BackwardRefusesInferCache) {
  auto p = BatchNormParams<double>::make(1);
  Tensor<double> x({1, 1, 2, 2}, 0.5);
  const auto fwd = nowcast::nn::batchnorm_forward(x, p, Mode::Infer);
  EXPECT_THROW(nowcast::nn::batchnorm_backward(fwd.cache, p, x), nowcast::CacheError);
}

TEST(BatchNorm, RejectsBadHyperparameters) {
  EXPECT_THROW(BatchNormParams<float>::make(2, 0.0), nowcast::ValueError);
  EXPECT_THROW(BatchNormParams<float>::make(2, 1e-3, 1.0), nowcast::ValueError);
}

TEST(OutputHead, SigmoidOfConvolutionPerStep) {
  std::mt19937_64 rng(71);
  nowcast::nn::Rng init_rng(1);
  auto head = nowcast::nn::OutputHead<double>::init(3, 3, init_rng);
  head.bias[0] = 0.2;
  const auto seq = oracle::random({2, 4, 3, 5, 5}, -1, 1, rng);
  const auto y = nowcast::nn::output_head_forward(seq, head, false).y;
  ASSERT_EQ(y.shape(), (Shape{2, 4, 1, 5, 5}));
  const auto z = oracle::conv2d(seq.reshaped({8, 3, 5, 5}), head.kernels, head.bias);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(y[i], oracle::sigm(z[i]), 1e-12);
    EXPECT_GT(y[i], 0.0);
    EXPECT_LT(y[i], 1.0);
  }
}

TEST(OutputHead, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(72);
  nowcast::nn::Rng init_rng(2);
  const auto head = nowcast::nn::OutputHead<double>::init(2, 3, init_rng);
  const auto seq = oracle::random({1, 3, 2, 4, 4}, -1, 1, rng);
  const auto fwd = nowcast::nn::output_head_forward(seq, head, true);
  const auto w = oracle::random(fwd.y.shape(), -1, 1, rng);
  const auto g = nowcast::nn::output_head_backward(fwd.cache, head, w);
  auto loss_seq = [&](const Tensor<double>& v) {
    return oracle::project(nowcast::nn::output_head_forward(v, head, false).y, w);
  };
  auto loss_k = [&](const Tensor<double>& v) {
    auto h = head;
    h.kernels = v;
    return oracle::project(nowcast::nn::output_head_forward(seq, h, false).y, w);
  };
  auto loss_b = [&](const Tensor<double>& v) {
    auto h = head;
    h.bias = v;
    return oracle::project(nowcast::nn::output_head_forward(seq, h, false).y, w);
  };
  EXPECT_LE(oracle::fd_error(loss_seq, seq, g.d_seq), 1e-4);
  EXPECT_LE(oracle::fd_error(loss_k, head.kernels, g.d_kernels), 1e-4);
  EXPECT_LE(oracle::fd_error(loss_b, head.bias, g.d_bias), 1e-4);
}

TEST(LeakyRelu, ForwardAndBackward) {
  Tensor<double> x({4}, std::vector<double>{-2, -0.5, 0.5, 2});
  const auto y = nowcast::nn::leaky_relu_forward(x, 0.3);
  EXPECT_DOUBLE_EQ(y[0], -0.6);
  EXPECT_DOUBLE_EQ(y[3], 2.0);
  const auto dx = nowcast::nn::leaky_relu_backward(x, 0.3, Tensor<double>({4}, 1.0));
  EXPECT_DOUBLE_EQ(dx[1], 0.3);
  EXPECT_DOUBLE_EQ(dx[2], 1.0);
}

}  // namespace
