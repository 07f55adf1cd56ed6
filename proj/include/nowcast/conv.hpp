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

#ifndef NOWCAST_CONV_HPP
#define NOWCAST_CONV_HPP

#include <algorithm>
#include <cstddef>
#include <string>

#include "nowcast/tensor.hpp"

namespace nowcast {

/// The only padding the library knows: zero borders that keep H and W.
enum class Padding { Same };

/**
 * Shape contract of a 2-D convolution. Stride is always 1 and padding is
 * always Same, so kernel sides must be odd.
 */
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  Padding padding = Padding::Same;
  static constexpr std::size_t stride = 1;

  static ConvSpec make(std::size_t in, std::size_t out, std::size_t kh,
                       std::size_t kw) {
    ConvSpec spec{in, out, kh, kw};
    spec.validate();
    return spec;
  }

  void validate() const {
    if (in_channels == 0 || out_channels == 0) {
      throw ShapeError("ConvSpec: channel counts must be >= 1");
    }
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
      throw ShapeError("ConvSpec: kernel sides must be odd for Same padding, got " +
                       std::to_string(kernel_h) + "x" + std::to_string(kernel_w));
    }
  }

  Shape kernel_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }

  bool operator==(const ConvSpec&) const = default;
};

template <typename T>
struct ConvGrads {
  Tensor<T> d_input;
  Tensor<T> d_kernels;
  Tensor<T> d_bias;
};

namespace detail {

template <typename T>
void check_conv_input(const Tensor<T>& input, const ConvSpec& spec,
                      const Tensor<T>& kernels) {
  spec.validate();
  if (input.rank() != 4) {
    throw ShapeError("conv2d: input must be [N,C,H,W], got " + to_string(input.shape()));
  }
  if (input.dim(1) != spec.in_channels) {
    throw ShapeError("conv2d: input channel dimension is " + std::to_string(input.dim(1)) +
                     " but spec expects " + std::to_string(spec.in_channels));
  }
  if (kernels.shape() != spec.kernel_shape()) {
    throw ShapeError("conv2d: kernel shape " + to_string(kernels.shape()) +
                     " does not match spec " + to_string(spec.kernel_shape()));
  }
}

// Valid output range [lo, hi) along one axis for a tap offset `d`.
inline void tap_range(std::ptrdiff_t d, std::size_t extent, std::size_t& lo,
                      std::size_t& hi) {
  const auto n = static_cast<std::ptrdiff_t>(extent);
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -d));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(n - d, 0, n));
}

/// out[N,C_out,H,W] += kernels (cross-correlation) input. No bias.
template <typename T>
void conv2d_accumulate(const Tensor<T>& input, const ConvSpec& spec,
                       const Tensor<T>& kernels, Tensor<T>& out) {
  const std::size_t n = input.dim(0), cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t h = input.dim(2), w = input.dim(3);
  const std::size_t kh = spec.kernel_h, kw = spec.kernel_w;
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t plane = h * w;

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      T* dst = out.raw() + (b * cout + co) * plane;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* src = input.raw() + (b * cin + ci) * plane;
        const T* k = kernels.raw() + (co * cin + ci) * kh * kw;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
          std::size_t y0, y1;
          tap_range(dy, h, y0, y1);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const T wt = k[ky * kw + kx];
            if (wt == T(0)) continue;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
            std::size_t x0, x1;
            tap_range(dx, w, x0, x1);
            const std::size_t len = x1 > x0 ? x1 - x0 : 0;
            for (std::size_t y = y0; y < y1; ++y) {
              T* row = dst + y * w + x0;
              const T* srow = src + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * w +
                              static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx);
              for (std::size_t x = 0; x < len; ++x) row[x] += wt * srow[x];
            }
          }
        }
      }
    }
  }
}

/// Accumulates d_input and d_kernels for `upstream` flowing back through
/// conv2d_accumulate. Either output may be null to skip it.
template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& input, const ConvSpec& spec,
                                const Tensor<T>& kernels, const Tensor<T>& upstream,
                                Tensor<T>* d_input, Tensor<T>* d_kernels) {
  const std::size_t n = input.dim(0), cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t h = input.dim(2), w = input.dim(3);
  const std::size_t kh = spec.kernel_h, kw = spec.kernel_w;
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t plane = h * w;

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      const T* g = upstream.raw() + (b * cout + co) * plane;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* src = input.raw() + (b * cin + ci) * plane;
        T* dsrc = d_input ? d_input->raw() + (b * cin + ci) * plane : nullptr;
        const T* k = kernels.raw() + (co * cin + ci) * kh * kw;
        T* dk = d_kernels ? d_kernels->raw() + (co * cin + ci) * kh * kw : nullptr;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
          std::size_t y0, y1;
          tap_range(dy, h, y0, y1);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
            std::size_t x0, x1;
            tap_range(dx, w, x0, x1);
            const T wt = k[ky * kw + kx];
            const std::size_t len = x1 > x0 ? x1 - x0 : 0;
            T acc = T(0);
            for (std::size_t y = y0; y < y1; ++y) {
              const T* grow = g + y * w + x0;
              const std::size_t soff =
                  static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy) * w +
                  static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx);
              if (dk) {
                const T* srow = src + soff;
                for (std::size_t x = 0; x < len; ++x) acc += grow[x] * srow[x];
              }
              if (dsrc && wt != T(0)) {
                T* drow = dsrc + soff;
                for (std::size_t x = 0; x < len; ++x) drow[x] += wt * grow[x];
              }
            }
            if (dk) dk[ky * kw + kx] += acc;
          }
        }
      }
    }
  }
}

/// d_bias[c] += sum of upstream over batch and space.
template <typename T>
void bias_backward_accumulate(const Tensor<T>& upstream, Tensor<T>& d_bias) {
  const std::size_t n = upstream.dim(0), c = upstream.dim(1);
  const std::size_t plane = upstream.dim(2) * upstream.dim(3);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* g = upstream.raw() + (b * c + ch) * plane;
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += g[i];
      d_bias[ch] += acc;
    }
  }
}

}  // namespace detail

/**
 * Same-padded, stride-1 cross-correlation (the kernel is not flipped):
 *
 *   out[n,o,y,x] = bias[o] + sum_{c,i,j} kernels[o,c,i,j] * in[n,c,y+i-kh/2,x+j-kw/2]
 *
 * with zero outside the input. Spatial dimensions are preserved.
 */
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvSpec& spec,
                         const Tensor<T>& kernels, const Tensor<T>& bias) {
  detail::check_conv_input(input, spec, kernels);
  if (bias.shape() != Shape{spec.out_channels}) {
    throw ShapeError("conv2d: bias shape " + to_string(bias.shape()) +
                     " does not match out_channels " + std::to_string(spec.out_channels));
  }
  const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
  Tensor<T> out({n, spec.out_channels, h, w});
  const std::size_t plane = h * w;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < spec.out_channels; ++co) {
      std::fill_n(out.raw() + (b * spec.out_channels + co) * plane, plane, bias[co]);
    }
  }
  detail::conv2d_accumulate(input, spec, kernels, out);
  return out;
}

/// Exact gradients of conv2d_forward with respect to input, kernels and bias.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvSpec& spec,
                             const Tensor<T>& kernels, const Tensor<T>& upstream_grad) {
  detail::check_conv_input(input, spec, kernels);
  const Shape expected{input.dim(0), spec.out_channels, input.dim(2), input.dim(3)};
  if (upstream_grad.shape() != expected) {
    throw ShapeError("conv2d_backward: upstream gradient shape " +
                     to_string(upstream_grad.shape()) + " expected " + to_string(expected));
  }
  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernels.shape()),
                     Tensor<T>({spec.out_channels})};
  detail::conv2d_backward_accumulate(input, spec, kernels, upstream_grad,
                                     &grads.d_input, &grads.d_kernels);
  detail::bias_backward_accumulate(upstream_grad, grads.d_bias);
  return grads;
}

}  // namespace nowcast

#endif  // NOWCAST_CONV_HPP
