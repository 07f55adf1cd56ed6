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

#include "nowcast/conv.hpp"
#include "oracles.hpp"

namespace {

using nowcast::ConvSpec;
using nowcast::Shape;
using nowcast::ShapeError;
using nowcast::Tensor;

struct ConvCase {
  ConvSpec spec;
  Tensor<double> input, kernels, bias;
};

ConvCase random_case(std::mt19937_64& rng, std::size_t max_hw = 8) {
  std::uniform_int_distribution<std::size_t> dim(1, max_hw), ch(1, 4), k(0, 2);
  const std::size_t kh = 2 * k(rng) + 1, kw = 2 * k(rng) + 1;
  ConvCase c{ConvSpec::make(ch(rng), ch(rng), kh, kw), {}, {}, {}};
  c.input = oracle::random({std::uniform_int_distribution<std::size_t>(1, 2)(rng), c.spec.in_channels, dim(rng),
                            dim(rng)},
                           -1, 1, rng);
  c.kernels = oracle::random(c.spec.kernel_shape(), -1, 1, rng);
  c.bias = oracle::random({c.spec.out_channels}, -1, 1, rng);
  return c;
}

TEST(Conv2d, MatchesNaiveLoopOnRandomCases) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_case(rng);
    const auto got = nowcast::conv2d_forward(c.input, c.spec, c.kernels, c.bias);
    const auto want = oracle::conv2d(c.input, c.kernels, c.bias);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(oracle::max_abs_diff(got, want), 1e-12) << "trial " << trial;
  }
}

TEST(Conv2d, SinglePrecisionWithinTolerance) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_case(rng);
    const auto got = nowcast::conv2d_forward(c.input.cast<float>(), c.spec, c.kernels.cast<float>(),
                                             c.bias.cast<float>());
    const auto want = oracle::conv2d(c.input, c.kernels, c.bias);
    EXPECT_LE(oracle::max_abs_diff(got.cast<double>(), want), 1e-5);
  }
}

TEST(Conv2d, KernelIsNotFlipped) {
  // Hand-computed: a 3x3 kernel with a single 1 at row 0, col 2 reads the
  // input pixel one up and one right, out[y,x] = in[y-1,x+1].
  Tensor<double> in({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> k({1, 1, 3, 3});
  k(0, 0, 0, 2) = 1.0;
  const auto out = nowcast::conv2d_forward(in, ConvSpec::make(1, 1, 3, 3), k, Tensor<double>({1}));
  const std::vector<double> want{0, 0, 0, 2, 3, 0, 5, 6, 0};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(out[i], want[i]) << i;
}

TEST(Conv2d, SamePaddingKeepsSpatialSize) {
  std::mt19937_64 rng(3);
  auto in = oracle::random({2, 3, 5, 7}, 0, 1, rng);
  auto spec = ConvSpec::make(3, 4, 5, 3);
  auto out = nowcast::conv2d_forward(in, spec, Tensor<double>(spec.kernel_shape()), Tensor<double>({4}));
  EXPECT_EQ(out.shape(), (Shape{2, 4, 5, 7}));
}

TEST(Conv2d, RejectsEvenKernelsAndShapeMismatch) {
  EXPECT_THROW(ConvSpec::make(1, 1, 2, 3), ShapeError);
  auto spec = ConvSpec::make(2, 1, 3, 3);
  Tensor<double> in({1, 3, 4, 4});
  EXPECT_THROW(nowcast::conv2d_forward(in, spec, Tensor<double>(spec.kernel_shape()), Tensor<double>({1})),
               ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_case(rng, 6);
    const auto out = nowcast::conv2d_forward(c.input, c.spec, c.kernels, c.bias);
    const auto w = oracle::random(out.shape(), -1, 1, rng);
    const auto g = nowcast::conv2d_backward(c.input, c.spec, c.kernels, w);
    auto loss_in = [&](const Tensor<double>& x) {
      return oracle::project(nowcast::conv2d_forward(x, c.spec, c.kernels, c.bias), w);
    };
    auto loss_k = [&](const Tensor<double>& k) {
      return oracle::project(nowcast::conv2d_forward(c.input, c.spec, k, c.bias), w);
    };
    auto loss_b = [&](const Tensor<double>& b) {
      return oracle::project(nowcast::conv2d_forward(c.input, c.spec, c.kernels, b), w);
    };
    EXPECT_LE(oracle::fd_error(loss_in, c.input, g.d_input), 1e-6);
    EXPECT_LE(oracle::fd_error(loss_k, c.kernels, g.d_kernels), 1e-6);
    EXPECT_LE(oracle::fd_error(loss_b, c.bias, g.d_bias), 1e-6);
  }
}

}  // namespace
