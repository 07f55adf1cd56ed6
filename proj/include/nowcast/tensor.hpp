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

#ifndef NOWCAST_TENSOR_HPP
#define NOWCAST_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "nowcast/error.hpp"

namespace nowcast {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

/**
 * Dense row-major array. The innermost (last) dimension is contiguous.
 *
 * Every dimension is at least 1; a rank-0 tensor holds a single scalar.
 * Tensors are plain values: copying copies the data.
 */
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor holds real numbers");

 public:
  using value_type = T;

  Tensor() : data_(1, T(0)) {}

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value) {
    return Tensor(std::move(shape), value);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  /// Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const& {
    Tensor out(*this);
    out.reshape(std::move(shape));
    return out;
  }
  Tensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }

  void reshape(Shape shape) {
    if (element_count(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " +
                       to_string(shape));
    }
    shape_ = std::move(shape);
    check_dims();
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) {
        throw ShapeError("tensor dimensions must be >= 1, got " +
                         to_string(shape_));
      }
    }
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t i = 0; i < sizeof...(Idx); ++i) {
      off = off * shape_[i] + index[i];
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// ---------------------------------------------------------------------------
// Scalar activations. Outputs are clamped to the open ranges (0,1) and (-1,1)
// so the range invariants hold even where the underlying function rounds to
// the endpoint.

template <typename T>
T sigmoid(T x) {
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  T s;
  if (x >= T(0)) {
    s = T(1) / (T(1) + std::exp(-x));
  } else {
    const T e = std::exp(x);
    s = e / (T(1) + e);
  }
  return std::clamp(s, lo, hi);
}

template <typename T>
T tanh_open(T x) {
  const T hi = std::nextafter(T(1), T(0));
  return std::clamp(std::tanh(x), -hi, hi);
}

template <typename T>
T leaky_relu(T x, T alpha) {
  return x > T(0) ? x : alpha * x;
}

// ---------------------------------------------------------------------------
// elementwise_map

enum class UnaryOp { Sigmoid, Tanh, LeakyRelu, Scale };
enum class BinaryOp { Add, Sub, Mul };

/// A pointwise function id plus its parameter (slope for LeakyRelu, factor
/// for Scale).
struct Pointwise {
  UnaryOp op;
  double param = 0.0;

  static Pointwise sigmoid() { return {UnaryOp::Sigmoid}; }
  static Pointwise tanh() { return {UnaryOp::Tanh}; }
  static Pointwise leaky_relu(double alpha) { return {UnaryOp::LeakyRelu, alpha}; }
  static Pointwise scale(double factor) { return {UnaryOp::Scale, factor}; }
};

template <typename T>
Tensor<T> elementwise_map(const Tensor<T>& t, Pointwise f) {
  Tensor<T> out(t.shape());
  const T p = static_cast<T>(f.param);
  auto in = t.data();
  auto dst = out.data();
  switch (f.op) {
    case UnaryOp::Sigmoid:
      std::transform(in.begin(), in.end(), dst.begin(), [](T v) { return sigmoid(v); });
      break;
    case UnaryOp::Tanh:
      std::transform(in.begin(), in.end(), dst.begin(), [](T v) { return tanh_open(v); });
      break;
    case UnaryOp::LeakyRelu:
      std::transform(in.begin(), in.end(), dst.begin(), [p](T v) { return leaky_relu(v, p); });
      break;
    case UnaryOp::Scale:
      std::transform(in.begin(), in.end(), dst.begin(), [p](T v) { return p * v; });
      break;
  }
  return out;
}

template <typename T>
Tensor<T> elementwise_map(const Tensor<T>& a, const Tensor<T>& b, BinaryOp op) {
  require_same_shape(a, b, "elementwise_map");
  Tensor<T> out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  switch (op) {
    case BinaryOp::Add:
      std::transform(x.begin(), x.end(), y.begin(), dst.begin(), std::plus<T>());
      break;
    case BinaryOp::Sub:
      std::transform(x.begin(), x.end(), y.begin(), dst.begin(), std::minus<T>());
      break;
    case BinaryOp::Mul:
      std::transform(x.begin(), x.end(), y.begin(), dst.begin(), std::multiplies<T>());
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// reduce

enum class Reduction { Mean, Variance, Sum };

/**
 * Reduces over the given axes. Reduced axes are removed from the result
 * (reducing every axis yields a rank-0 tensor). Variance is the biased
 * population variance. An empty axis set returns the input unchanged.
 * Accumulation is carried out in double precision.
 */
template <typename T>
Tensor<T> reduce(const Tensor<T>& t, const std::vector<std::size_t>& axes,
                 Reduction kind) {
  if (axes.empty()) return t;
  const std::size_t rank = t.rank();
  std::vector<bool> reduced(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank) {
      throw ShapeError("reduce: axis " + std::to_string(a) +
                       " out of range for rank " + std::to_string(rank));
    }
    reduced[a] = true;
  }

  Shape out_shape;
  std::size_t group = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (reduced[i]) {
      group *= t.dim(i);
    } else {
      out_shape.push_back(t.dim(i));
    }
  }
  const std::size_t out_size = element_count(out_shape);

  // Map every input element to its output slot.
  std::vector<std::size_t> slot(t.size());
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      std::size_t o = 0;
      for (std::size_t i = 0; i < rank; ++i) {
        if (!reduced[i]) o = o * t.dim(i) + idx[i];
      }
      slot[flat] = o;
      for (std::size_t i = rank; i-- > 0;) {
        if (++idx[i] < t.dim(i)) break;
        idx[i] = 0;
      }
    }
  }

  std::vector<double> sum(out_size, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) sum[slot[i]] += t[i];

  Tensor<T> out(out_shape);
  const double n = static_cast<double>(group);
  if (kind == Reduction::Sum) {
    for (std::size_t o = 0; o < out_size; ++o) out[o] = static_cast<T>(sum[o]);
  } else if (kind == Reduction::Mean) {
    for (std::size_t o = 0; o < out_size; ++o) out[o] = static_cast<T>(sum[o] / n);
  } else {
    std::vector<double> sq(out_size, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = t[i] - sum[slot[i]] / n;
      sq[slot[i]] += d * d;
    }
    for (std::size_t o = 0; o < out_size; ++o) out[o] = static_cast<T>(sq[o] / n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helpers for the [N, T, C, H, W] sequence layout.

/// Copies timestep `t` of a [N,T,C,H,W] tensor into a [N,C,H,W] tensor.
template <typename T>
Tensor<T> slice_time(const Tensor<T>& seq, std::size_t t) {
  if (seq.rank() != 5) throw ShapeError("slice_time expects a rank-5 sequence");
  const std::size_t n = seq.dim(0), steps = seq.dim(1);
  const std::size_t frame = seq.dim(2) * seq.dim(3) * seq.dim(4);
  Tensor<T> out({n, seq.dim(2), seq.dim(3), seq.dim(4)});
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(seq.raw() + (b * steps + t) * frame, frame, out.raw() + b * frame);
  }
  return out;
}

/// Writes a [N,C,H,W] tensor into timestep `t` of a [N,T,C,H,W] tensor.
template <typename T>
void assign_time(Tensor<T>& seq, std::size_t t, const Tensor<T>& step) {
  const std::size_t n = seq.dim(0), steps = seq.dim(1);
  const std::size_t frame = seq.dim(2) * seq.dim(3) * seq.dim(4);
  if (step.size() != n * frame) {
    throw ShapeError("assign_time: step " + to_string(step.shape()) +
                     " does not fit sequence " + to_string(seq.shape()));
  }
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(step.raw() + b * frame, frame, seq.raw() + (b * steps + t) * frame);
  }
}

/// In-place a += b.
template <typename T>
void add_into(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add_into");
  T* x = a.raw();
  const T* y = b.raw();
  for (std::size_t i = 0; i < a.size(); ++i) x[i] += y[i];
}

}  // namespace nowcast

#endif  // NOWCAST_TENSOR_HPP
