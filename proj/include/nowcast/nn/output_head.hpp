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

#ifndef NOWCAST_NN_OUTPUT_HEAD_HPP
#define NOWCAST_NN_OUTPUT_HEAD_HPP

#include <cstddef>

#include "nowcast/conv.hpp"
#include "nowcast/nn/init.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::nn {

/// Per-timestep F -> 1 convolution followed by a sigmoid.
template <typename T>
struct OutputHead {
  ConvSpec spec;
  Tensor<T> kernels;  // [1, F, k, k]
  Tensor<T> bias;     // [1]

  static OutputHead zeros(std::size_t filters, std::size_t kernel) {
    OutputHead h{ConvSpec::make(filters, 1, kernel, kernel), {}, Tensor<T>({1})};
    h.kernels = Tensor<T>(h.spec.kernel_shape());
    return h;
  }

  static OutputHead init(std::size_t filters, std::size_t kernel, Rng& rng) {
    auto h = zeros(filters, kernel);
    glorot_uniform(h.kernels, filters * kernel * kernel, kernel * kernel, rng);
    return h;
  }
};

template <typename T>
struct OutputHeadCache {
  Tensor<T> input;   // [N*T, F, h, w]
  Tensor<T> output;  // [N*T, 1, h, w]
  Shape seq_shape;
};

template <typename T>
struct OutputHeadResult {
  Tensor<T> y;  // [N, T, 1, h, w]
  OutputHeadCache<T> cache;
};

template <typename T>
struct OutputHeadGrads {
  Tensor<T> d_seq;
  Tensor<T> d_kernels;
  Tensor<T> d_bias;
};

template <typename T>
OutputHeadResult<T> output_head_forward(const Tensor<T>& hidden_seq, const OutputHead<T>& head,
                                        bool keep_cache = true) {
  if (head.spec.out_channels != 1) throw ShapeError("output head must map to one channel");
  if (hidden_seq.rank() != 5 || hidden_seq.dim(2) != head.spec.in_channels) {
    throw ShapeError("output head: input " + to_string(hidden_seq.shape()) + " expected [N,T," +
                     std::to_string(head.spec.in_channels) + ",h,w]");
  }
  const std::size_t n = hidden_seq.dim(0), steps = hidden_seq.dim(1);
  const std::size_t hh = hidden_seq.dim(3), ww = hidden_seq.dim(4);
  Tensor<T> flat = hidden_seq.reshaped({n * steps, head.spec.in_channels, hh, ww});
  Tensor<T> z = conv2d_forward(flat, head.spec, head.kernels, head.bias);
  for (T& v : z.data()) v = sigmoid(v);

  OutputHeadResult<T> r;
  r.y = z.reshaped({n, steps, 1, hh, ww});
  if (keep_cache) {
    r.cache.input = std::move(flat);
    r.cache.output = std::move(z);
    r.cache.seq_shape = hidden_seq.shape();
  }
  return r;
}

template <typename T>
OutputHeadGrads<T> output_head_backward(const OutputHeadCache<T>& cache, const OutputHead<T>& head,
                                        const Tensor<T>& dy) {
  if (cache.seq_shape.empty()) throw CacheError("output head backward: empty cache");
  if (dy.size() != cache.output.size()) {
    throw ShapeError("output head backward: gradient shape " + to_string(dy.shape()));
  }
  Tensor<T> dz(cache.output.shape());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const T s = cache.output[i];
    dz[i] = dy[i] * s * (T(1) - s);
  }
  auto g = conv2d_backward(cache.input, head.spec, head.kernels, dz);
  return {std::move(g.d_input).reshaped(cache.seq_shape), std::move(g.d_kernels),
          std::move(g.d_bias)};
}

// ---------------------------------------------------------------------------
// LeakyReLU stage placed between blocks.

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T alpha) {
  return elementwise_map(x, Pointwise::leaky_relu(alpha));
}

/// dx = dy where x > 0, alpha * dy elsewhere.
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, T alpha, const Tensor<T>& dy) {
  require_same_shape(x, dy, "leaky_relu_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : alpha * dy[i];
  return dx;
}

}  // namespace nowcast::nn

#endif  // NOWCAST_NN_OUTPUT_HEAD_HPP
