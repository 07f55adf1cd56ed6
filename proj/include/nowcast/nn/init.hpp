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

#ifndef NOWCAST_NN_INIT_HPP
#define NOWCAST_NN_INIT_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "nowcast/tensor.hpp"

namespace nowcast::nn {

using Rng = std::mt19937_64;

/// Fills `t` uniformly in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
void uniform_fill(Tensor<T>& t, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
Tensor<T> random_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor<T> t(std::move(shape));
  uniform_fill(t, lo, hi, rng);
  return t;
}

}  // namespace nowcast::nn

#endif  // NOWCAST_NN_INIT_HPP
