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

#ifndef NOWCAST_OPTIM_HPP
#define NOWCAST_OPTIM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::optim {

/// Predictions are clamped to [kBceClamp, 1 - kBceClamp] before the logs.
inline constexpr double kBceClamp = 1e-7;

template <typename T>
struct LossReport {
  double value = 0.0;
  Tensor<T> gradient;
};

/**
 * Mean binary cross-entropy over every element:
 *
 *   value = -mean(y ln p + (1 - y) ln(1 - p))
 *
 * The gradient is d value / d pred and is zero wherever the clamp is active.
 */
template <typename T>
LossReport<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "bce_loss");
  const double lo = kBceClamp, hi = 1.0 - kBceClamp;
  const double n = static_cast<double>(pred.size());
  LossReport<T> r{0.0, Tensor<T>(pred.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, lo, hi);
    const double y = target[i];
    // An exact hit on a hard 0/1 target costs nothing (the clamp alone would
    // charge -ln(1 - 1e-7)).
    if (raw != y || (y != 0.0 && y != 1.0)) {
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    if (raw > lo && raw < hi) {
      r.gradient[i] = static_cast<T>((-y / p + (1.0 - y) / (1.0 - p)) / n);
    }
  }
  r.value = std::max(0.0, total / n);
  return r;
}

// ---------------------------------------------------------------------------
// Adadelta

struct AdadeltaConfig {
  double rho = 0.95;
  double eps = 1e-6;
  double lr_scale = 1.0;

  void validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw ValueError("adadelta: rho must lie in (0,1)");
    if (!(eps > 0.0)) throw ValueError("adadelta: eps must be > 0");
    if (!(lr_scale > 0.0)) throw ValueError("adadelta: lr_scale must be > 0");
  }
};

/// E[g^2] and E[dx^2] for one parameter tensor.
template <typename T>
struct AdadeltaSlot {
  Tensor<T> sq_grad;
  Tensor<T> sq_update;

  static AdadeltaSlot zeros_like(const Tensor<T>& param) {
    return {Tensor<T>(param.shape()), Tensor<T>(param.shape())};
  }
};

/**
 * One Adadelta update:
 *
 *   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
 *   dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
 *   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
 *   x       <- x + lr_scale * dx
 *
 * Refuses non-finite gradients without touching anything.
 */
template <typename T>
void adadelta_step(Tensor<T>& param, const Tensor<T>& grad, AdadeltaSlot<T>& slot,
                   const AdadeltaConfig& cfg) {
  require_same_shape(param, grad, "adadelta_step");
  require_same_shape(param, slot.sq_grad, "adadelta_step");
  require_same_shape(param, slot.sq_update, "adadelta_step");
  if (!all_finite(grad)) throw ValueError("adadelta_step: non-finite gradient");
  const double rho = cfg.rho, eps = cfg.eps;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double eg2 = rho * slot.sq_grad[i] + (1.0 - rho) * g * g;
    const double dx = -std::sqrt(slot.sq_update[i] + eps) / std::sqrt(eg2 + eps) * g;
    slot.sq_grad[i] = static_cast<T>(eg2);
    slot.sq_update[i] = static_cast<T>(rho * slot.sq_update[i] + (1.0 - rho) * dx * dx);
    param[i] = static_cast<T>(param[i] + cfg.lr_scale * dx);
  }
}

/// Accumulators for an ordered list of named parameters.
template <typename T>
struct OptimState {
  AdadeltaConfig config;
  std::vector<std::string> names;
  std::vector<AdadeltaSlot<T>> slots;

  bool operator==(const OptimState& other) const {
    if (names != other.names || slots.size() != other.slots.size()) return false;
    if (config.rho != other.config.rho || config.eps != other.config.eps ||
        config.lr_scale != other.config.lr_scale) {
      return false;
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!(slots[i].sq_grad == other.slots[i].sq_grad) ||
          !(slots[i].sq_update == other.slots[i].sq_update)) {
        return false;
      }
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Finite-difference gradient check

/**
 * Central differences (f(x + h e_i) - f(x - h e_i)) / 2h against
 * `analytic_grad`, elementwise. Returns the maximum relative error
 * |a - b| / max(|a|, |b|, 1e-8). `f` must be pure; `x` is restored.
 */
template <typename T>
double finite_diff_check(const std::function<double(const Tensor<T>&)>& f, Tensor<T> x,
                         const Tensor<T>& analytic_grad, double h) {
  require_same_shape(x, analytic_grad, "finite_diff_check");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = static_cast<T>(saved + h);
    const double fp = f(x);
    x[i] = static_cast<T>(saved - h);
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw ValueError("finite_diff_check: non-finite function value at element " +
                       std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  }
  return worst;
}

}  // namespace nowcast::optim

#endif  // NOWCAST_OPTIM_HPP
