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

#ifndef NOWCAST_NN_CONVLSTM_HPP
#define NOWCAST_NN_CONVLSTM_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/conv.hpp"
#include "nowcast/nn/init.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::nn {

/**
 * Weights of one convolutional LSTM layer.
 *
 * The packed 4F gate axis is ordered (input i, forget f, candidate c,
 * output o). The optional peephole tensor holds per-pixel Hadamard weights
 * for (i, f, o) in that order and ties the layer to one frame size.
 */
template <typename T>
struct ConvLSTMParams {
  std::size_t filters = 1;
  ConvSpec spec;                       // C_in -> 4F
  Tensor<T> input_kernels;             // [4F, C_in, k, k]
  Tensor<T> recurrent_kernels;         // [4F, F, k, k]
  Tensor<T> bias;                      // [4F]
  std::optional<Tensor<T>> peephole;   // [3F, H, W]

  std::size_t in_channels() const { return spec.in_channels; }
  std::size_t kernel() const { return spec.kernel_h; }

  ConvSpec recurrent_spec() const {
    return ConvSpec::make(filters, 4 * filters, spec.kernel_h, spec.kernel_w);
  }

  void validate(const std::string& name = "convlstm") const {
    spec.validate();
    if (spec.kernel_h != spec.kernel_w) {
      throw ShapeError(name + ": kernels must be square");
    }
    if (spec.out_channels != 4 * filters) {
      throw ShapeError(name + ": spec.out_channels must equal 4*filters");
    }
    if (input_kernels.shape() != spec.kernel_shape()) {
      throw ShapeError(name + ": input_kernels shape " + to_string(input_kernels.shape()));
    }
    if (recurrent_kernels.shape() != recurrent_spec().kernel_shape()) {
      throw ShapeError(name + ": recurrent_kernels shape " +
                       to_string(recurrent_kernels.shape()));
    }
    if (bias.shape() != Shape{4 * filters}) {
      throw ShapeError(name + ": bias shape " + to_string(bias.shape()));
    }
    if (peephole && (peephole->rank() != 3 || peephole->dim(0) != 3 * filters)) {
      throw ShapeError(name + ": peephole shape " + to_string(peephole->shape()));
    }
  }
};

/// Zero-valued parameters; `peephole_hw` switches peepholes on for frames
/// of that size.
template <typename T>
ConvLSTMParams<T> zero_convlstm_params(std::size_t in_channels, std::size_t filters,
                                       std::size_t kernel,
                                       std::optional<std::pair<std::size_t, std::size_t>>
                                           peephole_hw = std::nullopt) {
  ConvLSTMParams<T> p;
  p.filters = filters;
  p.spec = ConvSpec::make(in_channels, 4 * filters, kernel, kernel);
  p.input_kernels = Tensor<T>(p.spec.kernel_shape());
  p.recurrent_kernels = Tensor<T>(p.recurrent_spec().kernel_shape());
  p.bias = Tensor<T>({4 * filters});
  if (peephole_hw) {
    p.peephole = Tensor<T>({3 * filters, peephole_hw->first, peephole_hw->second});
  }
  return p;
}

/// Glorot-uniform kernels, forget-gate bias 1, every other bias and the
/// peephole weights 0.
template <typename T>
ConvLSTMParams<T> init_convlstm_params(std::size_t in_channels, std::size_t filters,
                                       std::size_t kernel, Rng& rng,
                                       std::optional<std::pair<std::size_t, std::size_t>>
                                           peephole_hw = std::nullopt) {
  auto p = zero_convlstm_params<T>(in_channels, filters, kernel, peephole_hw);
  const std::size_t kk = kernel * kernel;
  glorot_uniform(p.input_kernels, in_channels * kk, 4 * filters * kk, rng);
  glorot_uniform(p.recurrent_kernels, filters * kk, 4 * filters * kk, rng);
  for (std::size_t k = filters; k < 2 * filters; ++k) p.bias[k] = T(1);
  return p;
}

template <typename T>
struct ConvLSTMGrads {
  Tensor<T> input_kernels;
  Tensor<T> recurrent_kernels;
  Tensor<T> bias;
  std::optional<Tensor<T>> peephole;

  static ConvLSTMGrads zeros_like(const ConvLSTMParams<T>& p) {
    ConvLSTMGrads g{Tensor<T>(p.input_kernels.shape()), Tensor<T>(p.recurrent_kernels.shape()),
                    Tensor<T>(p.bias.shape()), std::nullopt};
    if (p.peephole) g.peephole = Tensor<T>(p.peephole->shape());
    return g;
  }
};

/// Hidden and cell state, both [N, F, h, w].
template <typename T>
struct ConvLSTMState {
  Tensor<T> h;
  Tensor<T> c;

  static ConvLSTMState zeros(std::size_t n, std::size_t filters, std::size_t height,
                             std::size_t width) {
    return {Tensor<T>({n, filters, height, width}), Tensor<T>({n, filters, height, width})};
  }
};

/// Intermediates of one cell step. Gate tensors are post-activation.
template <typename T>
struct ConvLSTMCellCache {
  Tensor<T> x;  // left as a scalar placeholder when the layer owns the input
  Tensor<T> h_prev, c_prev;
  Tensor<T> i, f, g, o;
  Tensor<T> c, tanh_c;
  std::size_t filters = 0;
  std::size_t in_channels = 0;
  std::size_t kernel = 0;
  bool peephole = false;
};

template <typename T>
struct ConvLSTMCellResult {
  ConvLSTMState<T> state;
  ConvLSTMCellCache<T> cache;
};

template <typename T>
struct ConvLSTMCellGrads {
  Tensor<T> dx;
  ConvLSTMState<T> d_state_prev;
  ConvLSTMGrads<T> d_params;
};

namespace detail {

template <typename T>
void check_state(const ConvLSTMState<T>& state, const ConvLSTMParams<T>& params,
                 std::size_t n, std::size_t height, std::size_t width) {
  const Shape expected{n, params.filters, height, width};
  if (state.h.shape() != expected || state.c.shape() != expected) {
    throw ShapeError("convlstm: state shapes H" + to_string(state.h.shape()) + " C" +
                     to_string(state.c.shape()) + " expected " + to_string(expected));
  }
  if (params.peephole &&
      (params.peephole->dim(1) != height || params.peephole->dim(2) != width)) {
    throw ShapeError("convlstm: peephole weights " + to_string(params.peephole->shape()) +
                     " do not match frame " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

/**
 * One cell step given the input contribution `zx` = W_x * x + b ([N,4F,h,w]).
 * Adds the recurrent contribution, applies the gates and fills `cache` when
 * non-null.
 */
template <typename T>
ConvLSTMState<T> cell_step(Tensor<T> zx, const ConvLSTMState<T>& prev,
                           const ConvLSTMParams<T>& params, ConvLSTMCellCache<T>* cache) {
  const std::size_t n = prev.h.dim(0), nf = params.filters;
  const std::size_t hh = prev.h.dim(2), ww = prev.h.dim(3), plane = hh * ww;
  nowcast::detail::conv2d_accumulate(prev.h, params.recurrent_spec(), params.recurrent_kernels, zx);

  const Shape sshape{n, nf, hh, ww};
  ConvLSTMState<T> next{Tensor<T>(sshape), Tensor<T>(sshape)};
  Tensor<T> gi(sshape), gf(sshape), gg(sshape), go(sshape), tc(sshape);
  const T* peep = params.peephole ? params.peephole->raw() : nullptr;

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < nf; ++k) {
      const T* zi = zx.raw() + (b * 4 * nf + k) * plane;
      const T* zf = zi + nf * plane;
      const T* zg = zi + 2 * nf * plane;
      const T* zo = zi + 3 * nf * plane;
      const std::size_t so = (b * nf + k) * plane;
      const T* cp = prev.c.raw() + so;
      for (std::size_t p = 0; p < plane; ++p) {
        T ai = zi[p], af = zf[p], ao = zo[p];
        if (peep) {
          ai += peep[k * plane + p] * cp[p];
          af += peep[(nf + k) * plane + p] * cp[p];
        }
        const T i = sigmoid(ai), f = sigmoid(af), g = tanh_open(zg[p]);
        const T c = f * cp[p] + i * g;
        if (peep) ao += peep[(2 * nf + k) * plane + p] * c;
        const T o = sigmoid(ao);
        const T t = tanh_open(c);
        next.c[so + p] = c;
        next.h[so + p] = o * t;
        gi[so + p] = i;
        gf[so + p] = f;
        gg[so + p] = g;
        go[so + p] = o;
        tc[so + p] = t;
      }
    }
  }

  if (cache) {
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->c = next.c;
    cache->tanh_c = std::move(tc);
    cache->filters = nf;
    cache->in_channels = params.in_channels();
    cache->kernel = params.kernel();
    cache->peephole = params.peephole.has_value();
  }
  return next;
}

template <typename T>
void check_cache(const ConvLSTMCellCache<T>& cache, const ConvLSTMParams<T>& params,
                 const Tensor<T>& dh, const Tensor<T>& dc) {
  if (cache.filters == 0) throw CacheError("convlstm backward: empty cache");
  if (cache.filters != params.filters || cache.in_channels != params.in_channels() ||
      cache.kernel != params.kernel() || cache.peephole != params.peephole.has_value()) {
    throw CacheError("convlstm backward: cache was produced by a different layer");
  }
  if (dh.shape() != cache.c.shape() || dc.shape() != cache.c.shape()) {
    throw CacheError("convlstm backward: gradient shape " + to_string(dh.shape()) +
                     " does not match cached state " + to_string(cache.c.shape()));
  }
}

/**
 * Backward through the gate arithmetic of one step. Writes the pre-activation
 * gate gradient into `dz` ([N,4F,h,w]), returns dC_{t-1} (excluding the
 * recurrent convolution path, which only touches H) and accumulates peephole
 * gradients.
 */
template <typename T>
Tensor<T> gates_backward(const ConvLSTMCellCache<T>& cache, const ConvLSTMParams<T>& params,
                         const Tensor<T>& dh, const Tensor<T>& dc, Tensor<T>& dz,
                         ConvLSTMGrads<T>& grads) {
  const std::size_t n = dh.dim(0), nf = params.filters;
  const std::size_t plane = dh.dim(2) * dh.dim(3);
  Tensor<T> dc_prev(dh.shape());
  const T* peep = params.peephole ? params.peephole->raw() : nullptr;
  T* dpeep = grads.peephole ? grads.peephole->raw() : nullptr;

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t so = (b * nf + k) * plane;
      T* dzi = dz.raw() + (b * 4 * nf + k) * plane;
      T* dzf = dzi + nf * plane;
      T* dzg = dzi + 2 * nf * plane;
      T* dzo = dzi + 3 * nf * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t e = so + p;
        const T i = cache.i[e], f = cache.f[e], g = cache.g[e], o = cache.o[e];
        const T t = cache.tanh_c[e], cp = cache.c_prev[e];
        const T dho = dh[e];
        const T d_ao = dho * t * o * (T(1) - o);
        T dct = dc[e] + dho * o * (T(1) - t * t);
        if (peep) dct += d_ao * peep[(2 * nf + k) * plane + p];
        const T d_ai = dct * g * i * (T(1) - i);
        const T d_af = dct * cp * f * (T(1) - f);
        const T d_ag = dct * i * (T(1) - g * g);
        T dcp = dct * f;
        if (peep) {
          dcp += d_ai * peep[k * plane + p] + d_af * peep[(nf + k) * plane + p];
          dpeep[k * plane + p] += d_ai * cp;
          dpeep[(nf + k) * plane + p] += d_af * cp;
          dpeep[(2 * nf + k) * plane + p] += d_ao * cache.c[e];
        }
        dzi[p] = d_ai;
        dzf[p] = d_af;
        dzg[p] = d_ag;
        dzo[p] = d_ao;
        dc_prev[e] = dcp;
      }
    }
  }
  return dc_prev;
}

}  // namespace detail

/**
 * One ConvLSTM step:
 *
 *   i = sigmoid(W_xi*x + W_hi*H + b_i)      f = sigmoid(W_xf*x + W_hf*H + b_f)
 *   C' = f o C + i o tanh(W_xc*x + W_hc*H + b_c)
 *   o = sigmoid(W_xo*x + W_ho*H + b_o)      H' = o o tanh(C')
 *
 * With peepholes, W_ci o C and W_cf o C join the i/f pre-activations and
 * W_co o C' joins the o pre-activation.
 */
template <typename T>
ConvLSTMCellResult<T> convlstm_cell_forward(const Tensor<T>& x, const ConvLSTMState<T>& state,
                                            const ConvLSTMParams<T>& params) {
  params.validate();
  if (x.rank() != 4 || x.dim(1) != params.in_channels()) {
    throw ShapeError("convlstm cell: input x " + to_string(x.shape()) + " expected [N," +
                     std::to_string(params.in_channels()) + ",h,w]");
  }
  detail::check_state(state, params, x.dim(0), x.dim(2), x.dim(3));
  ConvLSTMCellResult<T> result;
  Tensor<T> zx = conv2d_forward(x, params.spec, params.input_kernels, params.bias);
  result.state = detail::cell_step(std::move(zx), state, params, &result.cache);
  result.cache.x = x;
  return result;
}

/// Exact gradients of one cell step. dH and dC are the gradients arriving
/// at H_t and C_t; where both reach C_t they are summed.
template <typename T>
ConvLSTMCellGrads<T> convlstm_cell_backward(const ConvLSTMCellCache<T>& cache,
                                            const ConvLSTMParams<T>& params,
                                            const Tensor<T>& dh, const Tensor<T>& dc) {
  detail::check_cache(cache, params, dh, dc);
  if (cache.x.rank() != 4) {
    throw CacheError("convlstm cell backward: cache holds no input (layer-owned cache)");
  }
  const std::size_t n = dh.dim(0);
  ConvLSTMCellGrads<T> out;
  out.d_params = ConvLSTMGrads<T>::zeros_like(params);
  Tensor<T> dz({n, 4 * params.filters, dh.dim(2), dh.dim(3)});
  out.d_state_prev.c = detail::gates_backward(cache, params, dh, dc, dz, out.d_params);
  out.d_state_prev.h = Tensor<T>(dh.shape());
  nowcast::detail::conv2d_backward_accumulate(cache.h_prev, params.recurrent_spec(),
                                     params.recurrent_kernels, dz, &out.d_state_prev.h,
                                     &out.d_params.recurrent_kernels);
  out.dx = Tensor<T>(cache.x.shape());
  nowcast::detail::conv2d_backward_accumulate(cache.x, params.spec, params.input_kernels, dz, &out.dx,
                                     &out.d_params.input_kernels);
  nowcast::detail::bias_backward_accumulate(dz, out.d_params.bias);
  return out;
}

// ---------------------------------------------------------------------------
// Layer: the cell unrolled over a [N,T,C,h,w] sequence.

template <typename T>
struct ConvLSTMLayerCache {
  Tensor<T> input;  // [N*T, C, h, w]
  std::size_t batch = 0, steps = 0;
  std::vector<ConvLSTMCellCache<T>> steps_cache;
};

template <typename T>
struct ConvLSTMLayerResult {
  Tensor<T> hidden_seq;  // [N,T,F,h,w]
  ConvLSTMState<T> final_state;
  std::optional<ConvLSTMLayerCache<T>> cache;
};

template <typename T>
struct ConvLSTMLayerGrads {
  Tensor<T> d_seq;
  ConvLSTMState<T> d_initial_state;
  ConvLSTMGrads<T> d_params;
};

/**
 * Runs the cell over t = 0..T-1 and emits every hidden state
 * (return-sequences). The initial state defaults to zeros. Caches are only
 * kept when `keep_cache` is set.
 */
template <typename T>
ConvLSTMLayerResult<T> convlstm_layer_forward(const Tensor<T>& seq,
                                              const ConvLSTMParams<T>& params,
                                              const std::optional<ConvLSTMState<T>>& initial = {},
                                              bool keep_cache = true) {
  params.validate();
  if (seq.rank() != 5 || seq.dim(2) != params.in_channels()) {
    throw ShapeError("convlstm layer: input " + to_string(seq.shape()) + " expected [N,T," +
                     std::to_string(params.in_channels()) + ",h,w]");
  }
  const std::size_t n = seq.dim(0), steps = seq.dim(1);
  const std::size_t hh = seq.dim(3), ww = seq.dim(4), nf = params.filters;
  ConvLSTMState<T> state = initial ? *initial : ConvLSTMState<T>::zeros(n, nf, hh, ww);
  detail::check_state(state, params, n, hh, ww);

  // Input contributions of all timesteps in one batched convolution.
  Tensor<T> flat = seq.reshaped({n * steps, seq.dim(2), hh, ww});
  Tensor<T> zx_all = conv2d_forward(flat, params.spec, params.input_kernels, params.bias);
  zx_all.reshape({n, steps, 4 * nf, hh, ww});

  ConvLSTMLayerResult<T> result;
  result.hidden_seq = Tensor<T>({n, steps, nf, hh, ww});
  if (keep_cache) {
    result.cache.emplace();
    result.cache->batch = n;
    result.cache->steps = steps;
    result.cache->steps_cache.resize(steps);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    ConvLSTMCellCache<T>* cache = keep_cache ? &result.cache->steps_cache[t] : nullptr;
    state = detail::cell_step(slice_time(zx_all, t), state, params, cache);
    assign_time(result.hidden_seq, t, state.h);
  }
  if (keep_cache) result.cache->input = std::move(flat);
  result.final_state = std::move(state);
  return result;
}

/**
 * Backpropagation through time. `d_hidden_seq` is the gradient on every
 * emitted hidden state; `d_final` optionally adds gradients on the final
 * (H, C).
 */
template <typename T>
ConvLSTMLayerGrads<T> convlstm_layer_backward(const ConvLSTMLayerCache<T>& cache,
                                              const ConvLSTMParams<T>& params,
                                              const Tensor<T>& d_hidden_seq,
                                              const std::optional<ConvLSTMState<T>>& d_final = {}) {
  const std::size_t n = cache.batch, steps = cache.steps, nf = params.filters;
  if (steps == 0 || cache.steps_cache.size() != steps) {
    throw CacheError("convlstm layer backward: empty cache");
  }
  const std::size_t hh = cache.input.dim(2), ww = cache.input.dim(3);
  if (d_hidden_seq.shape() != Shape{n, steps, nf, hh, ww}) {
    throw ShapeError("convlstm layer backward: gradient shape " +
                     to_string(d_hidden_seq.shape()));
  }
  ConvLSTMLayerGrads<T> out;
  out.d_params = ConvLSTMGrads<T>::zeros_like(params);
  ConvLSTMState<T> carry = d_final ? *d_final : ConvLSTMState<T>::zeros(n, nf, hh, ww);
  Tensor<T> dz_all({n, steps, 4 * nf, hh, ww});
  const ConvSpec rspec = params.recurrent_spec();

  for (std::size_t t = steps; t-- > 0;) {
    const auto& step = cache.steps_cache[t];
    Tensor<T> dh = slice_time(d_hidden_seq, t);
    add_into(dh, carry.h);
    detail::check_cache(step, params, dh, carry.c);
    Tensor<T> dz({n, 4 * nf, hh, ww});
    carry.c = detail::gates_backward(step, params, dh, carry.c, dz, out.d_params);
    carry.h = Tensor<T>(dh.shape());
    nowcast::detail::conv2d_backward_accumulate(step.h_prev, rspec, params.recurrent_kernels, dz,
                                       &carry.h, &out.d_params.recurrent_kernels);
    assign_time(dz_all, t, dz);
  }

  dz_all.reshape({n * steps, 4 * nf, hh, ww});
  out.d_seq = Tensor<T>(cache.input.shape());
  nowcast::detail::conv2d_backward_accumulate(cache.input, params.spec, params.input_kernels, dz_all,
                                     &out.d_seq, &out.d_params.input_kernels);
  nowcast::detail::bias_backward_accumulate(dz_all, out.d_params.bias);
  out.d_seq.reshape({n, steps, params.in_channels(), hh, ww});
  out.d_initial_state = std::move(carry);
  return out;
}

}  // namespace nowcast::nn

#endif  // NOWCAST_NN_CONVLSTM_HPP
