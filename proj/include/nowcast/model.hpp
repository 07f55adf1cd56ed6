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

#ifndef NOWCAST_MODEL_HPP
#define NOWCAST_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/config.hpp"
#include "nowcast/nn/batchnorm.hpp"
#include "nowcast/nn/convlstm.hpp"
#include "nowcast/nn/output_head.hpp"
#include "nowcast/optim.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::model {

using nn::Mode;

struct BlockSpec {
  std::size_t filters = 64;
  std::size_t kernel = 3;
  bool operator==(const BlockSpec&) const = default;
};

/**
 * DirectMapped: the head output at input step t is the forecast of future
 * frame t (input step t + input_frames). Autoregressive: the stack is a
 * next-frame predictor and forecasts are rolled out by feeding predictions
 * back in.
 */
enum class InferenceMode { DirectMapped, Autoregressive };

enum class LayerKind { Input, ConvLSTM, BatchNorm, OutputHead };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::ConvLSTM: return "convlstm";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::OutputHead: return "output_head";
  }
  return "?";
}

using nowcast::to_string;

struct ArchitectureConfig {
  /// Block count of the nine-layer stack: 1 input + 4 ConvLSTM + 3 BatchNorm + 1 head.
  static constexpr std::size_t kStrictBlocks = 4;

  std::size_t input_frames = 18;
  std::size_t output_frames = 18;
  std::size_t frame_h = 344;
  std::size_t frame_w = 315;
  std::vector<BlockSpec> blocks{{64, 5}, {64, 3}, {64, 3}, {64, 1}};
  double leaky_relu_alpha = 0.3;
  bool leaky_relu_after_batchnorm = true;
  std::size_t head_kernel_size = 3;
  InferenceMode inference_mode = InferenceMode::DirectMapped;
  bool strict = true;
  bool peephole = false;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;

  bool operator==(const ArchitectureConfig&) const = default;

  void validate() const {
    if (blocks.empty()) throw ConfigError("arch: at least one ConvLSTM block is required");
    if (strict && blocks.size() != kStrictBlocks) {
      throw ConfigError("arch: " + std::to_string(blocks.size()) +
                        " ConvLSTM blocks break the nine-layer stack (expected " +
                        std::to_string(kStrictBlocks) + "); disable strict mode to allow it");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i].filters == 0) throw ConfigError("arch: block " + std::to_string(i) + " has 0 filters");
      if (blocks[i].kernel % 2 == 0) {
        throw ConfigError("arch: block " + std::to_string(i) + " kernel must be odd");
      }
    }
    if (head_kernel_size % 2 == 0) throw ConfigError("arch: head kernel must be odd");
    if (input_frames == 0 || output_frames == 0) throw ConfigError("arch: frame counts must be >= 1");
    if (frame_h == 0 || frame_w == 0) throw ConfigError("arch: frame size must be >= 1");
    if (inference_mode == InferenceMode::DirectMapped && input_frames != output_frames) {
      throw ConfigError("arch: DirectMapped mode needs input_frames == output_frames");
    }
    if (!(leaky_relu_alpha >= 0.0)) throw ConfigError("arch: leaky_relu_alpha must be >= 0");
    if (!(bn_epsilon > 0.0)) throw ConfigError("arch: bn_epsilon must be > 0");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("arch: bn_momentum in (0,1)");
  }

  /// input, then ConvLSTM and BatchNorm alternating, then the head.
  std::vector<LayerKind> layers() const {
    std::vector<LayerKind> out{LayerKind::Input};
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      out.push_back(LayerKind::ConvLSTM);
      if (i + 1 < blocks.size()) out.push_back(LayerKind::BatchNorm);
    }
    out.push_back(LayerKind::OutputHead);
    return out;
  }

  void write(KeyValueConfig& kv) const {
    kv.set_number("arch.input_frames", input_frames);
    kv.set_number("arch.output_frames", output_frames);
    kv.set_number("arch.frame_h", frame_h);
    kv.set_number("arch.frame_w", frame_w);
    std::string b;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (i) b += ",";
      b += std::to_string(blocks[i].filters) + "x" + std::to_string(blocks[i].kernel);
    }
    kv.set("arch.blocks", b);
    kv.set_number("arch.leaky_relu_alpha", leaky_relu_alpha);
    kv.set("arch.leaky_relu_after_batchnorm", leaky_relu_after_batchnorm ? "true" : "false");
    kv.set_number("arch.head_kernel_size", head_kernel_size);
    kv.set("arch.inference_mode",
           inference_mode == InferenceMode::DirectMapped ? "direct" : "autoregressive");
    kv.set("arch.strict", strict ? "true" : "false");
    kv.set("arch.peephole", peephole ? "true" : "false");
    kv.set_number("arch.bn_epsilon", bn_epsilon);
    kv.set_number("arch.bn_momentum", bn_momentum);
  }

  /// Reads `arch.*` keys; missing keys keep their defaults.
  static ArchitectureConfig read(const KeyValueConfig& kv) {
    ArchitectureConfig a;
    a.input_frames = kv.get_number("arch.input_frames", a.input_frames);
    a.output_frames = kv.get_number("arch.output_frames", a.output_frames);
    a.frame_h = kv.get_number("arch.frame_h", a.frame_h);
    a.frame_w = kv.get_number("arch.frame_w", a.frame_w);
    if (auto b = kv.get("arch.blocks")) a.blocks = parse_blocks(*b);
    a.leaky_relu_alpha = kv.get_number("arch.leaky_relu_alpha", a.leaky_relu_alpha);
    a.leaky_relu_after_batchnorm =
        kv.get_bool("arch.leaky_relu_after_batchnorm", a.leaky_relu_after_batchnorm);
    a.head_kernel_size = kv.get_number("arch.head_kernel_size", a.head_kernel_size);
    if (auto m = kv.get("arch.inference_mode")) {
      if (*m == "direct") {
        a.inference_mode = InferenceMode::DirectMapped;
      } else if (*m == "autoregressive") {
        a.inference_mode = InferenceMode::Autoregressive;
      } else {
        throw ConfigError("arch.inference_mode must be direct or autoregressive");
      }
    }
    a.strict = kv.get_bool("arch.strict", a.strict);
    a.peephole = kv.get_bool("arch.peephole", a.peephole);
    a.bn_epsilon = kv.get_number("arch.bn_epsilon", a.bn_epsilon);
    a.bn_momentum = kv.get_number("arch.bn_momentum", a.bn_momentum);
    return a;
  }

  /// "64x5,64x3" -> blocks.
  static std::vector<BlockSpec> parse_blocks(const std::string& text) {
    std::vector<BlockSpec> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string::npos) end = text.size();
      const std::string item = text.substr(pos, end - pos);
      const std::size_t x = item.find('x');
      if (x == std::string::npos) throw ConfigError("arch.blocks entry '" + item + "' is not FxK");
      BlockSpec b;
      b.filters = KeyValueConfig::parse_number<std::size_t>(item.substr(0, x), "arch.blocks");
      b.kernel = KeyValueConfig::parse_number<std::size_t>(item.substr(x + 1), "arch.blocks");
      out.push_back(b);
      pos = end + 1;
    }
    return out;
  }

  std::string fingerprint() const {
    KeyValueConfig kv;
    write(kv);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(kv.to_text())));
    return buf;
  }
};

/// The full ordered parameter set of the stack.
template <typename T>
struct ModelParams {
  ArchitectureConfig arch;
  std::vector<nn::ConvLSTMParams<T>> lstm;
  std::vector<nn::BatchNormParams<T>> bn;
  nn::OutputHead<T> head;

  /// Visits every learnable tensor in a fixed order with a stable name.
  template <typename F>
  void for_each_trainable(F&& f) {
    visit(*this, f, false);
  }
  template <typename F>
  void for_each_trainable(F&& f) const {
    visit(*this, f, false);
  }
  /// Trainable tensors plus the BatchNorm running statistics.
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f, true);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f, true);
  }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> names;
    for_each_trainable([&](const std::string& n, const Tensor<T>&) { names.push_back(n); });
    return names;
  }

  std::size_t parameter_count() const {
    std::size_t count = 0;
    for_each_trainable([&](const std::string&, const Tensor<T>& t) { count += t.size(); });
    return count;
  }

  bool operator==(const ModelParams& other) const {
    if (!(arch == other.arch)) return false;
    std::vector<const Tensor<T>*> mine, theirs;
    for_each_tensor([&](const std::string&, const Tensor<T>& t) { mine.push_back(&t); });
    other.for_each_tensor([&](const std::string&, const Tensor<T>& t) { theirs.push_back(&t); });
    if (mine.size() != theirs.size()) return false;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (!(*mine[i] == *theirs[i])) return false;
    }
    return true;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f, bool with_stats) {
    for (std::size_t i = 0; i < self.lstm.size(); ++i) {
      const std::string p = "convlstm" + std::to_string(i) + "/";
      f(p + "input_kernels", self.lstm[i].input_kernels);
      f(p + "recurrent_kernels", self.lstm[i].recurrent_kernels);
      f(p + "bias", self.lstm[i].bias);
      if (self.lstm[i].peephole) f(p + "peephole", *self.lstm[i].peephole);
      if (i < self.bn.size()) {
        const std::string q = "batchnorm" + std::to_string(i) + "/";
        f(q + "gamma", self.bn[i].gamma);
        f(q + "beta", self.bn[i].beta);
        if (with_stats) {
          f(q + "running_mean", self.bn[i].running_mean);
          f(q + "running_var", self.bn[i].running_var);
        }
      }
    }
    f(std::string("head/kernels"), self.head.kernels);
    f(std::string("head/bias"), self.head.bias);
  }
};

/// Gradients in for_each_trainable order.
template <typename T>
struct Gradients {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;

  const Tensor<T>& operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return tensors[i];
    }
    throw Error("no gradient named " + name);
  }
};

/**
 * Deterministic initialization from `seed`. The arch is validated before
 * anything is allocated.
 */
template <typename T>
ModelParams<T> build_model(const ArchitectureConfig& arch, std::uint64_t seed) {
  arch.validate();
  nn::Rng rng(seed);
  ModelParams<T> m;
  m.arch = arch;
  std::optional<std::pair<std::size_t, std::size_t>> peep;
  if (arch.peephole) peep = std::make_pair(arch.frame_h, arch.frame_w);
  std::size_t channels = 1;
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    const auto& b = arch.blocks[i];
    m.lstm.push_back(nn::init_convlstm_params<T>(channels, b.filters, b.kernel, rng, peep));
    if (i + 1 < arch.blocks.size()) {
      m.bn.push_back(nn::BatchNormParams<T>::make(b.filters, arch.bn_epsilon, arch.bn_momentum));
    }
    channels = b.filters;
  }
  m.head = nn::OutputHead<T>::init(channels, arch.head_kernel_size, rng);
  return m;
}

template <typename T>
struct ModelCaches {
  Mode mode = Mode::Infer;
  std::vector<nn::ConvLSTMLayerCache<T>> lstm;
  std::vector<nn::BatchNormCache<T>> bn;
  std::vector<Tensor<T>> bn_out;  // LeakyReLU inputs
  nn::OutputHeadCache<T> head;
};

template <typename T>
struct ForwardResult {
  Tensor<T> y_hat;
  ModelCaches<T> caches;
};

namespace detail {

template <typename T>
void check_input(const ModelParams<T>& params, const Tensor<T>& x) {
  const auto& a = params.arch;
  const Shape expected{x.rank() == 5 ? x.dim(0) : 1, a.input_frames, 1, a.frame_h, a.frame_w};
  if (x.shape() != expected) {
    throw ShapeError("model input " + to_string(x.shape()) + " expected " + to_string(expected));
  }
  for (T v : x.data()) {
    if (!(v >= T(0) && v <= T(1))) {
      throw ValueError("model input must be normalized to [0,1]");
    }
  }
}

template <typename T>
void check_structure(const ModelParams<T>& params) {
  if (params.lstm.size() != params.arch.blocks.size() ||
      params.bn.size() + 1 != params.lstm.size()) {
    throw ShapeError("model parameters do not match the architecture");
  }
}

}  // namespace detail

/**
 * Runs the stack over every input step. Train mode uses batch statistics
 * and keeps caches for backward; Infer mode uses running statistics and
 * keeps none. Parameters are not modified.
 */
template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const Tensor<T>& x, Mode mode) {
  detail::check_structure(params);
  detail::check_input(params, x);
  const bool keep = mode == Mode::Train;
  const T alpha = static_cast<T>(params.arch.leaky_relu_alpha);
  ForwardResult<T> r;
  r.caches.mode = mode;
  Tensor<T> h = x;
  for (std::size_t i = 0; i < params.lstm.size(); ++i) {
    auto layer = nn::convlstm_layer_forward(h, params.lstm[i], {}, keep);
    h = std::move(layer.hidden_seq);
    if (keep) r.caches.lstm.push_back(std::move(*layer.cache));
    if (i < params.bn.size()) {
      auto bn = nn::batchnorm_forward(h, params.bn[i], mode);
      h = std::move(bn.y);
      if (keep) r.caches.bn.push_back(std::move(bn.cache));
      if (params.arch.leaky_relu_after_batchnorm) {
        Tensor<T> act = nn::leaky_relu_forward(h, alpha);
        if (keep) r.caches.bn_out.push_back(std::move(h));
        h = std::move(act);
      }
    }
  }
  auto head = nn::output_head_forward(h, params.head, keep);
  r.y_hat = std::move(head.y);
  if (keep) r.caches.head = std::move(head.cache);
  return r;
}

/// Backpropagation through the whole time-unrolled stack.
template <typename T>
Gradients<T> backward(const ModelParams<T>& params, const ModelCaches<T>& caches,
                      const Tensor<T>& d_y_hat) {
  if (caches.mode != Mode::Train) {
    throw CacheError("model backward needs caches from a Train-mode forward");
  }
  detail::check_structure(params);
  if (caches.lstm.size() != params.lstm.size()) throw CacheError("model backward: cache mismatch");
  const T alpha = static_cast<T>(params.arch.leaky_relu_alpha);

  const std::size_t blocks = params.lstm.size();
  std::vector<nn::ConvLSTMGrads<T>> lstm_grads(blocks);
  std::vector<nn::BatchNormGrads<T>> bn_grads(params.bn.size());

  auto hg = nn::output_head_backward(caches.head, params.head, d_y_hat);
  Tensor<T> d = std::move(hg.d_seq);
  for (std::size_t i = blocks; i-- > 0;) {
    if (i < params.bn.size()) {
      if (params.arch.leaky_relu_after_batchnorm) {
        d = nn::leaky_relu_backward(caches.bn_out[i], alpha, d);
      }
      bn_grads[i] = nn::batchnorm_backward(caches.bn[i], params.bn[i], d);
      d = std::move(bn_grads[i].dx);
    }
    auto lg = nn::convlstm_layer_backward(caches.lstm[i], params.lstm[i], d);
    lstm_grads[i] = std::move(lg.d_params);
    d = std::move(lg.d_seq);
  }

  Gradients<T> g;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string p = "convlstm" + std::to_string(i) + "/";
    g.names.push_back(p + "input_kernels");
    g.tensors.push_back(std::move(lstm_grads[i].input_kernels));
    g.names.push_back(p + "recurrent_kernels");
    g.tensors.push_back(std::move(lstm_grads[i].recurrent_kernels));
    g.names.push_back(p + "bias");
    g.tensors.push_back(std::move(lstm_grads[i].bias));
    if (lstm_grads[i].peephole) {
      g.names.push_back(p + "peephole");
      g.tensors.push_back(std::move(*lstm_grads[i].peephole));
    }
    if (i < bn_grads.size()) {
      const std::string q = "batchnorm" + std::to_string(i) + "/";
      g.names.push_back(q + "gamma");
      g.tensors.push_back(std::move(bn_grads[i].dgamma));
      g.names.push_back(q + "beta");
      g.tensors.push_back(std::move(bn_grads[i].dbeta));
    }
  }
  g.names.push_back("head/kernels");
  g.tensors.push_back(std::move(hg.d_kernels));
  g.names.push_back("head/bias");
  g.tensors.push_back(std::move(hg.d_bias));
  return g;
}

/// Folds the batch statistics of a Train forward into the running stats.
template <typename T>
void apply_running_stats(ModelParams<T>& params, const ModelCaches<T>& caches) {
  for (std::size_t i = 0; i < caches.bn.size() && i < params.bn.size(); ++i) {
    nn::update_running_stats(params.bn[i], caches.bn[i]);
  }
}

template <typename T>
optim::OptimState<T> init_optim_state(const ModelParams<T>& params,
                                      const optim::AdadeltaConfig& cfg = {}) {
  cfg.validate();
  optim::OptimState<T> s;
  s.config = cfg;
  params.for_each_trainable([&](const std::string& name, const Tensor<T>& t) {
    s.names.push_back(name);
    s.slots.push_back(optim::AdadeltaSlot<T>::zeros_like(t));
  });
  return s;
}

/**
 * Supervision targets for a batch. DirectMapped trains against the future
 * frames directly; Autoregressive trains the next-frame objective
 * (X[1..T-1], y[0]).
 */
template <typename T>
Tensor<T> training_targets(const ArchitectureConfig& arch, const Tensor<T>& x,
                           const Tensor<T>& y) {
  if (arch.inference_mode == InferenceMode::DirectMapped) return y;
  if (x.rank() != 5 || y.rank() != 5 || x.dim(0) != y.dim(0)) {
    throw ShapeError("autoregressive targets: inconsistent batch shapes");
  }
  Tensor<T> target(x.shape());
  for (std::size_t t = 0; t + 1 < x.dim(1); ++t) assign_time(target, t, slice_time(x, t + 1));
  assign_time(target, x.dim(1) - 1, slice_time(y, 0));
  return target;
}

struct StepReport {
  double loss = 0.0;
};

/**
 * One optimization step on a batch: mean BCE over all pixels, frames and
 * batch items (measured before the update), then one Adadelta update of
 * every trainable tensor. A non-finite loss or gradient throws
 * TrainingError and leaves parameters and optimizer state untouched.
 */
template <typename T>
StepReport train_step(ModelParams<T>& params, optim::OptimState<T>& state, const Tensor<T>& x,
                      const Tensor<T>& y) {
  const Tensor<T> target = training_targets(params.arch, x, y);
  for (T v : target.data()) {
    if (!(v >= T(0) && v <= T(1))) throw ValueError("training targets must lie in [0,1]");
  }
  auto fwd = forward(params, x, Mode::Train);
  if (fwd.y_hat.shape() != target.shape()) {
    throw ShapeError("targets " + to_string(target.shape()) + " do not match predictions " +
                     to_string(fwd.y_hat.shape()));
  }
  auto loss = optim::bce_loss(fwd.y_hat, target);
  if (!std::isfinite(loss.value)) throw TrainingError("non-finite loss; step aborted");
  auto grads = backward(params, fwd.caches, loss.gradient);
  for (const auto& g : grads.tensors) {
    if (!all_finite(g)) throw TrainingError("non-finite gradient; step aborted");
  }
  if (state.names != grads.names) {
    throw TrainingError("optimizer state does not match the model parameters");
  }
  apply_running_stats(params, fwd.caches);
  std::size_t k = 0;
  params.for_each_trainable([&](const std::string&, Tensor<T>& p) {
    optim::adadelta_step(p, grads.tensors[k], state.slots[k], state.config);
    ++k;
  });
  return {loss.value};
}

/// One stack step on a single frame [N,1,h,w], carrying per-layer state.
template <typename T>
Tensor<T> rollout_step(const ModelParams<T>& params, const Tensor<T>& frame,
                       std::vector<nn::ConvLSTMState<T>>& states) {
  const T alpha = static_cast<T>(params.arch.leaky_relu_alpha);
  Tensor<T> h = frame;
  for (std::size_t i = 0; i < params.lstm.size(); ++i) {
    const auto& p = params.lstm[i];
    Tensor<T> zx = conv2d_forward(h, p.spec, p.input_kernels, p.bias);
    states[i] = nn::detail::cell_step(std::move(zx), states[i], p, static_cast<nn::ConvLSTMCellCache<T>*>(nullptr));
    h = states[i].h;
    if (i < params.bn.size()) {
      h = nn::batchnorm_forward(h, params.bn[i], Mode::Infer).y;
      if (params.arch.leaky_relu_after_batchnorm) h = nn::leaky_relu_forward(h, alpha);
    }
  }
  const std::size_t n = h.dim(0);
  Tensor<T> seq = h.reshaped({n, 1, h.dim(1), h.dim(2), h.dim(3)});
  return nn::output_head_forward(seq, params.head, false).y.reshaped({n, 1, h.dim(2), h.dim(3)});
}

/**
 * Forecast of `output_frames` future frames, shape [N, output_frames, 1, h, w].
 * DirectMapped is the Infer-mode forward. Autoregressive feeds the inputs
 * through the stack and then feeds each prediction back as the next input.
 */
template <typename T>
Tensor<T> predict(const ModelParams<T>& params, const Tensor<T>& x) {
  if (params.arch.inference_mode == InferenceMode::DirectMapped) {
    return forward(params, x, Mode::Infer).y_hat;
  }
  detail::check_structure(params);
  detail::check_input(params, x);
  const std::size_t n = x.dim(0), hh = x.dim(3), ww = x.dim(4);
  std::vector<nn::ConvLSTMState<T>> states;
  for (const auto& p : params.lstm) states.push_back(nn::ConvLSTMState<T>::zeros(n, p.filters, hh, ww));
  Tensor<T> next;
  for (std::size_t t = 0; t < x.dim(1); ++t) next = rollout_step(params, slice_time(x, t), states);
  Tensor<T> out({n, params.arch.output_frames, 1, hh, ww});
  for (std::size_t k = 0; k < params.arch.output_frames; ++k) {
    assign_time(out, k, next);
    if (k + 1 < params.arch.output_frames) next = rollout_step(params, next, states);
  }
  return out;
}

}  // namespace nowcast::model

#endif  // NOWCAST_MODEL_HPP
