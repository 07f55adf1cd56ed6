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

// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/nowcast.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace nowcast;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects the individual checks of one criterion.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::ostringstream out;
    const auto& items = failures_.empty() ? notes_ : failures_;
    for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "; " : "") << items[i];
    return out.str();
  }

 private:
  std::vector<std::string> failures_, notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Random instances (spatial <= 8x8, channels <= 4, 64-bit)

struct ConvCase {
  ConvSpec spec;
  Tensor<double> input, kernels, bias;
};

ConvCase random_conv(std::mt19937_64& rng, std::size_t max_hw) {
  std::uniform_int_distribution<std::size_t> dim(1, max_hw), ch(1, 4), k(0, 2), n(1, 2);
  ConvCase c{ConvSpec::make(ch(rng), ch(rng), 2 * k(rng) + 1, 2 * k(rng) + 1), {}, {}, {}};
  c.input = oracle::random({n(rng), c.spec.in_channels, dim(rng), dim(rng)}, -1, 1, rng);
  c.kernels = oracle::random(c.spec.kernel_shape(), -1, 1, rng);
  c.bias = oracle::random({c.spec.out_channels}, -1, 1, rng);
  return c;
}

struct CellCase {
  nn::ConvLSTMParams<double> params;
  Tensor<double> x;
  nn::ConvLSTMState<double> state;
};

CellCase random_cell(std::mt19937_64& rng, bool peephole, std::size_t max_hw) {
  std::uniform_int_distribution<std::size_t> dim(1, max_hw), ch(1, 4), k(0, 1), n(1, 2);
  const std::size_t cin = ch(rng), f = ch(rng), kernel = 2 * k(rng) + 1, hh = dim(rng), ww = dim(rng), b = n(rng);
  std::optional<std::pair<std::size_t, std::size_t>> peep;
  if (peephole) peep = std::make_pair(hh, ww);
  CellCase c;
  c.params = nn::zero_convlstm_params<double>(cin, f, kernel, peep);
  c.params.input_kernels = oracle::random(c.params.input_kernels.shape(), -0.5, 0.5, rng);
  c.params.recurrent_kernels = oracle::random(c.params.recurrent_kernels.shape(), -0.5, 0.5, rng);
  c.params.bias = oracle::random(c.params.bias.shape(), -0.5, 0.5, rng);
  if (peephole) c.params.peephole = oracle::random(c.params.peephole->shape(), -0.5, 0.5, rng);
  c.x = oracle::random({b, cin, hh, ww}, -1, 1, rng);
  c.state.h = oracle::random({b, f, hh, ww}, -1, 1, rng);
  c.state.c = oracle::random({b, f, hh, ww}, -1, 1, rng);
  return c;
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity

double fd_conv(std::mt19937_64& rng) {
  const auto c = random_conv(rng, 8);
  const auto w = oracle::random(conv2d_forward(c.input, c.spec, c.kernels, c.bias).shape(), -1, 1, rng);
  const auto g = conv2d_backward(c.input, c.spec, c.kernels, w);
  double worst = 0.0;
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    return oracle::project(conv2d_forward(v, c.spec, c.kernels, c.bias), w);
  }, c.input, g.d_input));
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    return oracle::project(conv2d_forward(c.input, c.spec, v, c.bias), w);
  }, c.kernels, g.d_kernels));
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    return oracle::project(conv2d_forward(c.input, c.spec, c.kernels, v), w);
  }, c.bias, g.d_bias));
  return worst;
}

double fd_cell(std::mt19937_64& rng, bool peephole) {
  const auto base = random_cell(rng, peephole, 8);
  const auto fwd = nn::convlstm_cell_forward(base.x, base.state, base.params);
  const auto dh = oracle::random(fwd.state.h.shape(), -1, 1, rng);
  const auto dc = oracle::random(fwd.state.c.shape(), -1, 1, rng);
  const auto g = nn::convlstm_cell_backward(fwd.cache, base.params, dh, dc);
  auto check = [&](auto get, const Tensor<double>& analytic) {
    auto loss = [&](const Tensor<double>& v) {
      CellCase c = base;
      get(c) = v;
      const auto r = nn::convlstm_cell_forward(c.x, c.state, c.params);
      return oracle::project(r.state.h, dh) + oracle::project(r.state.c, dc);
    };
    CellCase c = base;
    return oracle::fd_error(loss, get(c), analytic);
  };
  double worst = 0.0;
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.x; }, g.dx));
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.state.h; }, g.d_state_prev.h));
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.state.c; }, g.d_state_prev.c));
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.params.input_kernels; },
                                g.d_params.input_kernels));
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.params.recurrent_kernels; },
                                g.d_params.recurrent_kernels));
  worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return k.params.bias; }, g.d_params.bias));
  if (peephole) {
    worst = std::max(worst, check([](CellCase& k) -> Tensor<double>& { return *k.params.peephole; },
                                  *g.d_params.peephole));
  }
  return worst;
}

double fd_batchnorm(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(2, 8), ch(1, 4), n(2, 3);
  const std::size_t c = ch(rng);
  const Shape shape{n(rng), c, dim(rng), dim(rng)};
  auto p = nn::BatchNormParams<double>::make(c);
  p.gamma = oracle::random({c}, 0.5, 1.5, rng);
  p.beta = oracle::random({c}, -0.5, 0.5, rng);
  const auto x = oracle::random(shape, -1, 1, rng);
  const auto w = oracle::random(shape, -1, 1, rng);
  const auto fwd = nn::batchnorm_forward(x, static_cast<const nn::BatchNormParams<double>&>(p), nn::Mode::Train);
  const auto g = nn::batchnorm_backward(fwd.cache, p, w);
  auto run = [&](const Tensor<double>& xv, const nn::BatchNormParams<double>& q) {
    return oracle::project(nn::batchnorm_forward(xv, q, nn::Mode::Train).y, w);
  };
  double worst = oracle::fd_error([&](const Tensor<double>& v) { return run(v, p); }, x, g.dx);
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    auto q = p;
    q.gamma = v;
    return run(x, q);
  }, p.gamma, g.dgamma));
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    auto q = p;
    q.beta = v;
    return run(x, q);
  }, p.beta, g.dbeta));
  return worst;
}

double fd_head(std::mt19937_64& rng, std::uint64_t seed) {
  std::uniform_int_distribution<std::size_t> dim(1, 8), ch(1, 4), k(0, 1), t(1, 3);
  nn::Rng init(seed);
  const std::size_t in = ch(rng);
  const auto head = nn::OutputHead<double>::init(in, 2 * k(rng) + 1, init);
  const auto seq = oracle::random({1, t(rng), in, dim(rng), dim(rng)}, -1, 1, rng);
  const auto fwd = nn::output_head_forward(seq, head, true);
  const auto w = oracle::random(fwd.y.shape(), -1, 1, rng);
  const auto g = nn::output_head_backward(fwd.cache, head, w);
  auto run = [&](const Tensor<double>& s, const nn::OutputHead<double>& h) {
    return oracle::project(nn::output_head_forward(s, h, false).y, w);
  };
  double worst = oracle::fd_error([&](const Tensor<double>& v) { return run(v, head); }, seq, g.d_seq);
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    auto h = head;
    h.kernels = v;
    return run(seq, h);
  }, head.kernels, g.d_kernels));
  worst = std::max(worst, oracle::fd_error([&](const Tensor<double>& v) {
    auto h = head;
    h.bias = v;
    return run(seq, h);
  }, head.bias, g.d_bias));
  return worst;
}

double fd_bce(std::mt19937_64& rng) {
  const auto p = oracle::random({2, 3, 4, 4}, 0.05, 0.95, rng);
  const auto y = oracle::random({2, 3, 4, 4}, 0.0, 1.0, rng);
  const auto r = optim::bce_loss(p, y);
  return oracle::fd_error([&](const Tensor<double>& v) { return optim::bce_loss(v, y).value; }, p, r.gradient);
}

double fd_tiny_model(std::size_t samples, std::uint64_t seed) {
  model::ArchitectureConfig arch;
  arch.input_frames = 3;
  arch.output_frames = 3;
  arch.frame_h = 5;
  arch.frame_w = 5;
  arch.blocks = {{2, 3}, {2, 3}};
  arch.strict = false;
  std::mt19937_64 rng(seed);
  auto p = model::build_model<double>(arch, seed);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng);
  const auto y = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng);
  const auto fwd = model::forward(p, x, nn::Mode::Train);
  const auto grads = model::backward(p, fwd.caches, optim::bce_loss(fwd.y_hat, y).gradient);
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
    const double fp = optim::bce_loss(model::forward(p, x, nn::Mode::Train).y_hat, y).value;
    *slot = saved - h;
    const double fm = optim::bce_loss(model::forward(p, x, nn::Mode::Train).y_hat, y).value;
    *slot = saved;
    const double num = (fp - fm) / (2 * h);
    const double ana = grads[name][idx];
    worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
  }
  return worst;
}

Checks criterion1() {
  Checks c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double conv = 0, cell = 0, bn = 0, head = 0, bce = 0;
  for (int i = 0; i < 5; ++i) {
    conv = std::max(conv, fd_conv(rng));
    cell = std::max({cell, fd_cell(rng, false), fd_cell(rng, true)});
    bn = std::max(bn, fd_batchnorm(rng));
    head = std::max(head, fd_head(rng, 200 + i));
    bce = std::max(bce, fd_bce(rng));
  }
  const double tiny = fd_tiny_model(25, 3);
  const double secs = seconds_since(t0);
  c.require(conv <= 1e-4, "conv2d rel err " + fmt("%.2e", conv));
  c.require(cell <= 1e-4, "convlstm cell rel err " + fmt("%.2e", cell));
  c.require(bn <= 1e-4, "batchnorm rel err " + fmt("%.2e", bn));
  c.require(head <= 1e-4, "output head rel err " + fmt("%.2e", head));
  c.require(bce <= 1e-4, "bce rel err " + fmt("%.2e", bce));
  c.require(tiny <= 1e-3, "tiny model rel err " + fmt("%.2e", tiny));
  c.require(secs <= 120.0, "runtime " + fmt("%.1f s", secs));
  c.note("worst layer rel err " + fmt("%.2e", std::max({conv, cell, bn, head, bce})) + ", tiny model " +
         fmt("%.2e", tiny) + ", " + fmt("%.1f s", secs));
  return c;
}

// ---------------------------------------------------------------------------
// 2. Convolution oracle

Checks criterion2() {
  Checks c;
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto k = random_conv(rng, 8);
    worst = std::max(worst, oracle::max_abs_diff(conv2d_forward(k.input, k.spec, k.kernels, k.bias),
                                                 oracle::conv2d(k.input, k.kernels, k.bias)));
  }
  c.require(worst <= 1e-6, "max abs diff " + fmt("%.2e", worst));
  c.note("100 cases, max abs diff " + fmt("%.2e", worst));
  return c;
}

// ---------------------------------------------------------------------------
// 3. ConvLSTM cell oracle

Checks criterion3() {
  Checks c;
  std::mt19937_64 rng(303);
  for (bool peephole : {false, true}) {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto k = random_cell(rng, peephole, 8);
      const auto got = nn::convlstm_cell_forward(k.x, k.state, k.params);
      const auto want = oracle::convlstm_cell(k.x, k.state.h, k.state.c, k.params.input_kernels,
                                              k.params.recurrent_kernels, k.params.bias,
                                              peephole ? &*k.params.peephole : nullptr);
      worst = std::max({worst, oracle::max_abs_diff(got.state.h, want.h), oracle::max_abs_diff(got.state.c, want.c)});
    }
    const std::string mode = peephole ? "peephole" : "plain";
    c.require(worst <= 1e-6, mode + " max abs diff " + fmt("%.2e", worst));
    c.note(mode + " 50 cases " + fmt("%.2e", worst));
  }
  return c;
}

// ---------------------------------------------------------------------------
// 4. Structural fidelity

Checks criterion4() {
  Checks c;
  const model::ArchitectureConfig arch;
  const auto layers = arch.layers();
  auto count = [&](model::LayerKind k) { return std::count(layers.begin(), layers.end(), k); };
  c.require(layers.size() == 9, "layer count " + std::to_string(layers.size()));
  c.require(count(model::LayerKind::Input) == 1 && count(model::LayerKind::ConvLSTM) == 4 &&
                count(model::LayerKind::BatchNorm) == 3 && count(model::LayerKind::OutputHead) == 1,
            "layer mix is not 1 input + 4 ConvLSTM + 3 BatchNorm + 1 head");
  const auto p = model::build_model<float>(arch, 0);
  c.require(p.lstm.size() == 4 && p.bn.size() == 3, "instantiated stack is not 4 ConvLSTM + 3 BatchNorm");
  const data::SequenceConfig seq;
  c.require(seq.input_frames == 18 && seq.output_frames == 18, "default sequence is not 18/18");
  c.require(seq.cadence == std::chrono::minutes{5}, "default cadence is not 5 min");
  c.require(seq.span() == std::chrono::minutes{180}, "default window does not span 3 h");
  c.require(arch.input_frames == 18 && arch.output_frames == 18, "default arch frames are not 18/18");
  c.require(train::TrainConfig{}.epochs == 25, "default epochs != 25");
  c.require(arch.frame_h == 344 && arch.frame_w == 315, "default frame size is not 344x315");
  c.note("9 layers, 18/18 at 5 min over 180 min, 25 epochs, 344x315");
  return c;
}

// ---------------------------------------------------------------------------
// 5 and 6. Desk-scale learning and motion capture

struct DeskRun {
  model::ModelParams<float> params;
  double first_loss = 0, last_epoch_loss = 0, train_rmse = 0, seconds = 0;
  std::size_t steps = 0;
};

data::SynthConfig desk_synth(std::uint64_t seed) {
  data::SynthConfig sc;
  sc.height = 16;
  sc.width = 16;
  sc.blobs = 1;
  sc.velocity_x = 1.0;
  sc.velocity_y = 0.0;
  sc.sequence.input_frames = 6;
  sc.sequence.output_frames = 6;
  sc.seed = seed;
  return sc;
}

DeskRun desk_run() {
  const auto samples = data::synth_advection(desk_synth(1), 16);
  model::ArchitectureConfig a;
  a.input_frames = 6;
  a.output_frames = 6;
  a.frame_h = 16;
  a.frame_w = 16;
  a.blocks = {{8, 5}, {8, 5}};
  a.strict = false;
  a.bn_momentum = 0.9;
  DeskRun r{model::build_model<float>(a, 3)};
  train::TrainConfig tc;
  tc.epochs = 75;
  tc.batch_size = 4;
  tc.shuffle = false;
  tc.seed = 3;
  auto state = model::init_optim_state(r.params, tc.optimizer);
  train::FitHooks hooks;
  hooks.on_step = [&](std::size_t, double loss) {
    if (r.steps == 0) r.first_loss = loss;
    ++r.steps;
  };
  const auto t0 = Clock::now();
  const auto meta = train::fit(r.params, state, samples, tc, {}, hooks);
  r.seconds = seconds_since(t0);
  r.last_epoch_loss = meta.loss_history.back();
  r.train_rmse = eval::evaluate(r.params, samples).rmse_overall;
  return r;
}

Checks criterion5(const DeskRun& r) {
  Checks c;
  const double ratio = r.last_epoch_loss / r.first_loss;
  c.require(r.steps == 300, "ran " + std::to_string(r.steps) + " steps");
  c.require(ratio <= 0.5, "BCE ratio " + fmt("%.3f", ratio));
  c.require(r.train_rmse <= 0.05, "train RMSE " + fmt("%.4f", r.train_rmse));
  c.require(r.seconds <= 600.0, "runtime " + fmt("%.1f s", r.seconds));
  c.note("300 steps, BCE " + fmt("%.4f", r.first_loss) + " -> " + fmt("%.4f", r.last_epoch_loss) + " (ratio " +
         fmt("%.3f", ratio) + "), train RMSE " + fmt("%.4f", r.train_rmse) + ", " + fmt("%.1f s", r.seconds));
  return c;
}

Checks criterion6(const DeskRun& r) {
  Checks c;
  const auto held = data::synth_advection(desk_synth(1000), 20);
  const std::size_t plane = 16 * 16, last_in = 5, lead6 = 5;
  int ok = 0;
  for (const auto& s : held) {
    const auto batch = data::stack_samples(std::span(&s, 1));
    const auto pred = model::predict(r.params, batch.x);
    const auto c0 = oracle::center_of_mass(batch.x.raw() + last_in * plane, 16, 16);
    const auto cp = oracle::center_of_mass(pred.raw() + lead6 * plane, 16, 16);
    const auto ct = oracle::center_of_mass(batch.y.raw() + lead6 * plane, 16, 16);
    const double ap = std::atan2(cp.second - c0.second, cp.first - c0.first);
    const double at = std::atan2(ct.second - c0.second, ct.first - c0.first);
    const double diff = std::abs(std::remainder(ap - at, 2 * std::numbers::pi)) * 180.0 / std::numbers::pi;
    ok += diff <= 45.0;
  }
  c.require(ok >= 16, std::to_string(ok) + "/20 within 45 deg");
  c.note(std::to_string(ok) + "/20 held-out sequences within 45 deg");
  return c;
}

// ---------------------------------------------------------------------------
// 7. Optimizer correctness

Checks criterion7() {
  Checks c;
  Tensor<double> x({1}, 0.0);
  auto slot = optim::AdadeltaSlot<double>::zeros_like(x);
  optim::adadelta_step(x, Tensor<double>({1}, 1.0), slot, optim::AdadeltaConfig{});
  c.require(std::abs(x[0] - (-0.0044721)) <= 1e-7, "first step " + fmt("%.8f", x[0]));
  Tensor<double> q({1}, 1.0);
  auto qs = optim::AdadeltaSlot<double>::zeros_like(q);
  int steps = 0;
  while (std::abs(q[0]) >= 1e-2 && steps < 500) {
    optim::adadelta_step(q, Tensor<double>({1}, 2.0 * q[0]), qs, optim::AdadeltaConfig{});
    ++steps;
  }
  c.require(std::abs(q[0]) < 1e-2, "x^2 not minimized in 500 steps, |x| = " + fmt("%.4f", std::abs(q[0])));
  c.note("first step " + fmt("%.7f", x[0]) + ", |x| < 1e-2 after " + std::to_string(steps) + " steps");
  return c;
}

// ---------------------------------------------------------------------------
// 8. Metric and loss anchors

Checks criterion8() {
  Checks c;
  std::mt19937_64 rng(808);
  const auto a = oracle::random({2, 3, 1, 4, 4}, 0.2, 0.7, rng);
  auto b = a;
  for (double& v : b.data()) v += 0.125;
  const double same = eval::rmse(a, a), offset = eval::rmse(b, a);
  const auto y = oracle::random({2, 3, 1, 4, 4}, 0.0, 1.0, rng);
  const double half = optim::bce_loss(Tensor<double>(y.shape(), 0.5), y).value;
  c.require(same == 0.0, "rmse(a,a) = " + fmt("%.3e", same));
  c.require(std::abs(offset - 0.125) <= 1e-12, "offset rmse " + fmt("%.12f", offset));
  c.require(std::abs(half - std::log(2.0)) <= 1e-6, "BCE(0.5) " + fmt("%.9f", half));
  c.note("rmse(a,a)=0, offset 0.125 -> " + fmt("%.6f", offset) + ", BCE(0.5)=" + fmt("%.6f", half));
  return c;
}

// ---------------------------------------------------------------------------
// 9. Pipeline integrity

std::vector<data::RadarFrame> gapless(std::size_t n) {
  std::vector<data::RadarFrame> out;
  const data::Instant start = data::make_utc(2022, 6, 1);
  for (std::size_t i = 0; i < n; ++i) {
    data::RadarFrame f;
    f.timestamp = start + std::chrono::minutes{5} * static_cast<int>(i);
    f.values = Tensor<float>({1, 2, 2}, static_cast<float>(i) / static_cast<float>(n));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> loss_trace() {
  data::SynthConfig sc = desk_synth(5);
  sc.height = 8;
  sc.width = 8;
  sc.sequence.input_frames = 3;
  sc.sequence.output_frames = 3;
  const auto samples = data::synth_advection(sc, 6);
  model::ArchitectureConfig a;
  a.input_frames = 3;
  a.output_frames = 3;
  a.frame_h = 8;
  a.frame_w = 8;
  a.blocks = {{3, 3}, {3, 3}};
  a.strict = false;
  auto p = model::build_model<float>(a, 11);
  train::TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;
  tc.seed = 11;
  auto st = model::init_optim_state(p, tc.optimizer);
  std::vector<double> trace;
  train::FitHooks hooks;
  hooks.on_step = [&](std::size_t, double loss) { trace.push_back(loss); };
  train::fit(p, st, samples, tc, {}, hooks);
  return trace;
}

Checks criterion9() {
  Checks c;
  const auto frames = gapless(36);
  const auto seqs = data::build_sequences(frames, data::SequenceConfig{});
  c.require(seqs.size() == 1, "36 frames gave " + std::to_string(seqs.size()) + " samples");
  if (seqs.size() == 1) {
    c.require(seqs[0].x.size() == 18 && seqs[0].y.size() == 18, "sample is not 18/18");
  }

  data::SynthConfig sc;
  sc.height = 4;
  sc.width = 4;
  const auto many = data::synth_advection(sc, 450);
  const auto split = data::split_train_val(many, 50.0 / 450.0, data::SplitPolicy::ByTimeRange);
  c.require(split.train.size() == 400 && split.val.size() == 50,
            "split " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()));
  std::set<std::int64_t> train_times;
  for (const auto& s : split.train) {
    for (const auto* part : {&s.x, &s.y}) {
      for (const auto& f : *part) train_times.insert(f.timestamp.time_since_epoch().count());
    }
  }
  bool disjoint = true;
  for (const auto& s : split.val) {
    for (const auto* part : {&s.x, &s.y}) {
      for (const auto& f : *part) disjoint = disjoint && !train_times.count(f.timestamp.time_since_epoch().count());
    }
  }
  c.require(disjoint, "train and validation share frames");

  const auto& frame = many[7].y[3];
  const auto rfrm = data::encode_rfrm(frame);
  const auto back = data::decode_rfrm(rfrm);
  c.require(back.values == frame.values && back.timestamp == frame.timestamp && data::encode_rfrm(back) == rfrm,
            "RFRM round trip is not bit-exact");

  model::ArchitectureConfig a;
  a.input_frames = 3;
  a.output_frames = 3;
  a.frame_h = 5;
  a.frame_w = 5;
  a.blocks = {{2, 3}, {2, 3}};
  a.strict = false;
  auto p = model::build_model<float>(a, 9);
  auto st = model::init_optim_state(p);
  std::mt19937_64 rng(9);
  const auto x = oracle::random({2, 3, 1, 5, 5}, 0, 1, rng).cast<float>();
  model::train_step(p, st, x, x);
  const model::TrainingMeta meta{1, 1, 9, {0.5}};
  const auto ck = model::encode_checkpoint(p, &st, meta);
  const auto dec = model::decode_checkpoint(ck);
  c.require(dec.params == p && dec.optimizer && *dec.optimizer == st && dec.meta == meta &&
                model::encode_checkpoint(dec.params, &*dec.optimizer, dec.meta) == ck,
            "checkpoint round trip is not bit-exact");

  test_util::TempDir d1, d2;
  data::SynthConfig ds = desk_synth(42);
  data::write_dataset(d1.path(), data::synth_advection(ds, 4), ds.sequence);
  data::write_dataset(d2.path(), data::synth_advection(ds, 4), ds.sequence);
  c.require(test_util::same_tree(d1.path(), d2.path()), "same seed gave different dataset bytes");

  const auto t1 = loss_trace(), t2 = loss_trace();
  c.require(!t1.empty() && t1 == t2, "loss traces differ");
  c.note("36 -> 1 (18/18), 400/50 disjoint, RFRM and NCKP bit-exact, datasets byte-identical, " +
         std::to_string(t1.size()) + "-step loss traces identical");
  return c;
}

// ---------------------------------------------------------------------------
// 10. Rendering anchors

/// Image descriptors in a GIF stream, skipping extensions and sub-blocks.
std::size_t gif_frame_count(const io::Bytes& b) {
  if (b.size() < 13 || std::string(b.begin(), b.begin() + 6) != "GIF89a") return 0;
  std::size_t pos = 13;
  if (b[10] & 0x80) pos += 3u * (1u << ((b[10] & 0x07) + 1));
  auto skip_blocks = [&] {
    while (pos < b.size() && b[pos] != 0) pos += b[pos] + 1u;
    ++pos;
  };
  std::size_t frames = 0;
  while (pos < b.size()) {
    const std::uint8_t tag = b[pos++];
    if (tag == 0x3B) return frames;
    if (tag == 0x21) {
      ++pos;
      skip_blocks();
    } else if (tag == 0x2C) {
      const std::uint8_t flags = b[pos + 8];
      pos += 9;
      if (flags & 0x80) pos += 3u * (1u << ((flags & 0x07) + 1));
      ++pos;
      skip_blocks();
      ++frames;
    } else {
      return 0;
    }
  }
  return 0;
}

Checks criterion10() {
  Checks c;
  const auto lo = eval::viridis(0.0f), hi = eval::viridis(1.0f);
  c.require(lo.r == 68 && lo.g == 1 && lo.b == 84, "viridis(0) is not (68,1,84)");
  c.require(hi.r == 253 && hi.g == 231 && hi.b == 37, "viridis(1) is not (253,231,37)");

  std::vector<data::RadarFrame> truth, pred;
  for (std::size_t k = 0; k < 18; ++k) {
    data::RadarFrame t, p;
    t.values = Tensor<float>({1, 16, 16}, static_cast<float>(k) / 17.0f);
    p.values = Tensor<float>({1, 16, 16}, 1.0f - static_cast<float>(k) / 17.0f);
    truth.push_back(std::move(t));
    pred.push_back(std::move(p));
  }
  test_util::TempDir dir;
  const auto out = eval::render_comparison(pred, truth, dir.path());
  std::size_t panels = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    const auto name = e.path().filename().string();
    panels += name.rfind("panel_", 0) == 0 && e.path().extension() == ".png";
  }
  c.require(panels == 18 && out.panels.size() == 18, std::to_string(panels) + " panel files");
  const auto gif = io::read_file(out.gif);
  const std::size_t gif_frames = gif_frame_count(gif);
  c.require(gif_frames == 18, "GIF has " + std::to_string(gif_frames) + " frames");

  const eval::RenderOptions opts;
  const auto layout = eval::PanelLayout::make(16, 16, opts);
  const auto strip = data::decode_rgb_png8(io::read_file(out.strip));
  c.require(strip.width == layout.width() && strip.height == 4 * layout.height(),
            "strip is " + std::to_string(strip.width) + "x" + std::to_string(strip.height));
  bool rows_match = strip.height == 4 * layout.height();
  for (std::size_t r = 0; rows_match && r < 4; ++r) {
    const auto panel = data::decode_rgb_png8(io::read_file(out.panels[r]));
    const std::size_t row_bytes = panel.width * panel.channels;
    rows_match = panel.width == strip.width && panel.height == layout.height() &&
                 std::equal(panel.pixels.begin(), panel.pixels.end(), strip.pixels.begin() + r * panel.height * row_bytes);
    const std::size_t y = r * layout.height() + layout.band + layout.body_height / 2;
    const auto want_t = eval::viridis(truth[r].values[0]), want_p = eval::viridis(pred[r].values[0]);
    const auto* left = strip.at(layout.left_x() + layout.half_width / 2, y);
    const auto* right = strip.at(layout.right_x() + layout.half_width / 2, y);
    rows_match = rows_match && left[0] == want_t.r && left[1] == want_t.g && left[2] == want_t.b &&
                 right[0] == want_p.r && right[1] == want_p.g && right[2] == want_p.b;
  }
  c.require(rows_match, "strip rows are not panels 1-4 with truth left and prediction right");
  c.note("viridis endpoints exact, 18 panels + GIF with " + std::to_string(gif_frames) +
         " frames, strip 4 x " + std::to_string(layout.height()) + " rows");
  return c;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const char* title, const std::function<Checks()>& run) {
    Checks c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d (%s): %s\n", c.ok() ? "PASS" : "FAIL", n, title, c.summary().c_str());
    std::fflush(stdout);
    failed += !c.ok();
  };
  report(1, "gradient integrity", criterion1);
  report(2, "convolution oracle", criterion2);
  report(3, "ConvLSTM cell oracle", criterion3);
  report(4, "structural fidelity", criterion4);
  std::optional<DeskRun> desk;
  std::string desk_error;
  try {
    desk = desk_run();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto needs_desk = [&](Checks (*f)(const DeskRun&)) {
    return [&, f] {
      if (!desk) throw std::runtime_error("desk-scale training failed: " + desk_error);
      return f(*desk);
    };
  };
  report(5, "desk-scale learning", needs_desk(criterion5));
  report(6, "motion capture", needs_desk(criterion6));
  report(7, "optimizer correctness", criterion7);
  report(8, "metric and loss anchors", criterion8);
  report(9, "pipeline integrity", criterion9);
  report(10, "rendering anchors", criterion10);
  return failed == 0 ? 0 : 1;
}
