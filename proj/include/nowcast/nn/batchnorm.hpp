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

#ifndef NOWCAST_NN_BATCHNORM_HPP
#define NOWCAST_NN_BATCHNORM_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::nn {

enum class Mode { Train, Infer };

/**
 * Per-channel batch normalization parameters. The running statistics start
 * at mean 0 / variance 1, so Infer mode before any Train step is an affine
 * map of the raw input.
 */
template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double epsilon = 1e-3;
  double momentum = 0.99;

  static BatchNormParams make(std::size_t channels, double epsilon = 1e-3,
                              double momentum = 0.99) {
    if (!(epsilon > 0.0)) throw ValueError("batchnorm: epsilon must be > 0");
    if (!(momentum > 0.0 && momentum < 1.0)) {
      throw ValueError("batchnorm: momentum must lie in (0,1)");
    }
    return {Tensor<T>::full({channels}, T(1)), Tensor<T>({channels}), Tensor<T>({channels}),
            Tensor<T>::full({channels}, T(1)), epsilon, momentum};
  }

  std::size_t channels() const { return gamma.size(); }
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Infer;
  Shape shape;
  Tensor<T> x_hat;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
  std::vector<double> inv_std;
};

template <typename T>
struct BatchNormResult {
  Tensor<T> y;
  BatchNormCache<T> cache;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx;
  Tensor<T> dgamma;
  Tensor<T> dbeta;
};

namespace detail {

// [outer, C, inner] view of a rank-4 [N,C,h,w] or rank-5 [N,T,C,h,w] tensor.
struct ChannelView {
  std::size_t outer, channels, inner;
};

inline ChannelView channel_view(const Shape& shape, std::size_t expected_channels) {
  if (shape.size() != 4 && shape.size() != 5) {
    throw ShapeError("batchnorm: expected [N,C,h,w] or [N,T,C,h,w], got " + to_string(shape));
  }
  const std::size_t axis = shape.size() - 3;
  if (shape[axis] != expected_channels) {
    throw ShapeError("batchnorm: channel axis has " + std::to_string(shape[axis]) +
                     " entries, parameters have " + std::to_string(expected_channels));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  return {outer, shape[axis], shape[axis + 1] * shape[axis + 2]};
}

}  // namespace detail

/**
 * Train mode normalizes every channel with the statistics over all other
 * axes (biased variance) and records them in the cache; Infer mode uses the
 * running statistics. Parameters are never modified here, see
 * update_running_stats.
 */
template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, const BatchNormParams<T>& params,
                                     Mode mode) {
  const auto v = detail::channel_view(x.shape(), params.channels());
  BatchNormResult<T> r;
  r.y = Tensor<T>(x.shape());
  r.cache.mode = mode;
  r.cache.shape = x.shape();
  const double count = static_cast<double>(v.outer * v.inner);

  std::vector<double> mean(v.channels), var(v.channels);
  if (mode == Mode::Train) {
    for (std::size_t c = 0; c < v.channels; ++c) {
      double s = 0.0;
      for (std::size_t o = 0; o < v.outer; ++o) {
        const T* p = x.raw() + (o * v.channels + c) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) s += p[i];
      }
      mean[c] = s / count;
      double q = 0.0;
      for (std::size_t o = 0; o < v.outer; ++o) {
        const T* p = x.raw() + (o * v.channels + c) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) {
          const double d = p[i] - mean[c];
          q += d * d;
        }
      }
      var[c] = q / count;
    }
  } else {
    for (std::size_t c = 0; c < v.channels; ++c) {
      mean[c] = params.running_mean[c];
      var[c] = params.running_var[c];
    }
  }

  std::vector<double> inv_std(v.channels);
  for (std::size_t c = 0; c < v.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + params.epsilon);

  if (mode == Mode::Train) r.cache.x_hat = Tensor<T>(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t c = 0; c < v.channels; ++c) {
      const std::size_t base = (o * v.channels + c) * v.inner;
      const double g = params.gamma[c], b = params.beta[c];
      for (std::size_t i = 0; i < v.inner; ++i) {
        const double xh = (x[base + i] - mean[c]) * inv_std[c];
        r.y[base + i] = static_cast<T>(g * xh + b);
        if (mode == Mode::Train) r.cache.x_hat[base + i] = static_cast<T>(xh);
      }
    }
  }
  if (mode == Mode::Train) {
    r.cache.batch_mean = std::move(mean);
    r.cache.batch_var = std::move(var);
    r.cache.inv_std = std::move(inv_std);
  }
  return r;
}

/// running <- momentum * running + (1 - momentum) * batch, from a Train cache.
template <typename T>
void update_running_stats(BatchNormParams<T>& params, const BatchNormCache<T>& cache) {
  if (cache.mode != Mode::Train) return;
  const double m = params.momentum;
  for (std::size_t c = 0; c < params.channels(); ++c) {
    params.running_mean[c] =
        static_cast<T>(m * params.running_mean[c] + (1.0 - m) * cache.batch_mean[c]);
    params.running_var[c] =
        static_cast<T>(m * params.running_var[c] + (1.0 - m) * cache.batch_var[c]);
  }
}

/// Forward that also folds the batch statistics into the running averages.
template <typename T>
BatchNormResult<T> batchnorm_forward(const Tensor<T>& x, BatchNormParams<T>& params, Mode mode) {
  auto r = batchnorm_forward(x, static_cast<const BatchNormParams<T>&>(params), mode);
  update_running_stats(params, r.cache);
  return r;
}

/// Exact gradients including the dependence of the batch mean and variance
/// on x. Refuses Infer-mode caches.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                     const BatchNormParams<T>& params, const Tensor<T>& dy) {
  if (cache.mode != Mode::Train) {
    throw CacheError("batchnorm backward: cache comes from an Infer-mode forward");
  }
  if (dy.shape() != cache.shape) {
    throw ShapeError("batchnorm backward: gradient shape " + to_string(dy.shape()) +
                     " expected " + to_string(cache.shape));
  }
  const auto v = detail::channel_view(dy.shape(), params.channels());
  const double count = static_cast<double>(v.outer * v.inner);
  BatchNormGrads<T> g{Tensor<T>(dy.shape()), Tensor<T>({v.channels}), Tensor<T>({v.channels})};

  for (std::size_t c = 0; c < v.channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const std::size_t base = (o * v.channels + c) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        sum_dy += dy[base + i];
        sum_dy_xhat += static_cast<double>(dy[base + i]) * cache.x_hat[base + i];
      }
    }
    g.dbeta[c] = static_cast<T>(sum_dy);
    g.dgamma[c] = static_cast<T>(sum_dy_xhat);
    const double gamma = params.gamma[c];
    const double scale = gamma * cache.inv_std[c] / count;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const std::size_t base = (o * v.channels + c) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        g.dx[base + i] = static_cast<T>(
            scale * (count * dy[base + i] - sum_dy - cache.x_hat[base + i] * sum_dy_xhat));
      }
    }
  }
  return g;
}

}  // namespace nowcast::nn

#endif  // NOWCAST_NN_BATCHNORM_HPP
