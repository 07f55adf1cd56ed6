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

#ifndef NOWCAST_EVAL_METRICS_HPP
#define NOWCAST_EVAL_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/data/frame.hpp"
#include "nowcast/model.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast::eval {

namespace detail {

template <typename T>
void check_unit_range(const Tensor<T>& t, const char* what) {
  for (T v : t.data()) {
    if (!(v >= T(0) && v <= T(1))) throw ValueError(std::string(what) + " values must lie in [0,1]");
  }
}

}  // namespace detail

/// Root of the mean squared difference over every element.
template <typename T>
double rmse(const Tensor<T>& pred, const Tensor<T>& truth) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("rmse: prediction " + to_string(pred.shape()) + " vs truth " +
                     to_string(truth.shape()));
  }
  detail::check_unit_range(pred, "prediction");
  detail::check_unit_range(truth, "truth");
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(pred.size()));
}

inline double rmse(std::span<const data::RadarFrame> pred, std::span<const data::RadarFrame> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("rmse: " + std::to_string(pred.size()) + " predicted frames vs " +
                     std::to_string(truth.size()) + " true frames");
  }
  return rmse(data::stack_frames(pred), data::stack_frames(truth));
}

/**
 * Validation summary in normalized [0,1] units.
 *
 * rmse_overall pools squared residuals over every pixel, lead time and
 * sample before taking the root. rmse_sample_mean is the plain mean of the
 * per-sample RMSEs. rmse_per_leadtime[k] pools over lead position k only.
 */
struct EvalReport {
  double rmse_overall = 0.0;
  double rmse_sample_mean = 0.0;
  std::vector<double> rmse_per_leadtime;
  std::size_t n_samples = 0;
  std::string fingerprint;

  nlohmann::json to_json() const {
    return {{"rmse_overall", rmse_overall},
            {"rmse_sample_mean", rmse_sample_mean},
            {"rmse_per_leadtime", rmse_per_leadtime},
            {"n_samples", n_samples},
            {"config_fingerprint", fingerprint}};
  }

  static EvalReport from_json(const nlohmann::json& j) {
    EvalReport r;
    r.rmse_overall = j.at("rmse_overall").get<double>();
    r.rmse_sample_mean = j.at("rmse_sample_mean").get<double>();
    r.rmse_per_leadtime = j.at("rmse_per_leadtime").get<std::vector<double>>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.fingerprint = j.at("config_fingerprint").get<std::string>();
    return r;
  }

  /// Human-readable table, one row per lead time.
  std::string table(std::chrono::minutes cadence = std::chrono::minutes{5}) const {
    std::ostringstream os;
    char line[96];
    std::snprintf(line, sizeof(line), "samples            %zu\n", n_samples);
    os << line;
    std::snprintf(line, sizeof(line), "rmse (pooled)      %.5f\n", rmse_overall);
    os << line;
    std::snprintf(line, sizeof(line), "rmse (sample mean) %.5f\n", rmse_sample_mean);
    os << line;
    os << "lead  minutes  rmse\n";
    for (std::size_t k = 0; k < rmse_per_leadtime.size(); ++k) {
      std::snprintf(line, sizeof(line), "%4zu  %7lld  %.5f\n", k + 1,
                    static_cast<long long>(cadence.count()) * static_cast<long long>(k + 1),
                    rmse_per_leadtime[k]);
      os << line;
    }
    return os.str();
  }
};

/// Maps a batch of inputs [N,T_in,1,h,w] to forecasts [N,T_out,1,h,w].
using Predictor = std::function<Tensor<float>(const Tensor<float>&)>;

/**
 * Runs `predict` over the samples in batches and accumulates the report.
 * A sample whose frames or forecast do not match the first sample's shape
 * aborts with that sample's id (its index when `ids` is empty).
 */
inline EvalReport evaluate(const Predictor& predict, std::span<const data::SequenceSample> samples,
                           std::string fingerprint = {}, std::span<const std::string> ids = {},
                           std::size_t batch_size = 8) {
  if (samples.empty()) throw ValueError("evaluate: empty dataset");
  if (batch_size == 0) throw ValueError("evaluate: batch_size must be >= 1");
  auto sample_id = [&](std::size_t i) { return i < ids.size() ? ids[i] : "#" + std::to_string(i); };

  Shape x_shape, y_shape;
  std::vector<double> lead_sse;
  double total_sse = 0.0, rmse_sum = 0.0;
  std::size_t total_count = 0, lead_count = 0;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const Shape ys = data::stack_frames(samples[i].y).shape();
        const Shape xs = data::stack_frames(samples[i].x).shape();
        if (y_shape.empty()) {
          x_shape = xs;
          y_shape = ys;
        }
        if (xs != x_shape || ys != y_shape || xs[2] != ys[2] || xs[3] != ys[3]) {
          throw ShapeError("frames " + to_string(xs) + " / " + to_string(ys) +
                           " do not match the dataset shape " + to_string(x_shape) + " / " +
                           to_string(y_shape));
        }
      } catch (const ShapeError& e) {
        throw ShapeError("sample " + sample_id(i) + ": " + e.what());
      }
    }
    const auto batch = data::stack_samples(samples.subspan(begin, end - begin));
    const Tensor<float> pred = predict(batch.x);
    if (pred.shape() != batch.y.shape()) {
      throw ShapeError("sample " + sample_id(begin) + ": forecast " + to_string(pred.shape()) +
                       " does not match truth " + to_string(batch.y.shape()));
    }
    detail::check_unit_range(pred, "prediction");
    const std::size_t steps = y_shape[0], frame = y_shape[1] * y_shape[2] * y_shape[3];
    if (lead_sse.empty()) lead_sse.assign(steps, 0.0);
    for (std::size_t n = 0; n < end - begin; ++n) {
      double sample_sse = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t off = (n * steps + k) * frame;
        double sse = 0.0;
        for (std::size_t p = 0; p < frame; ++p) {
          const double d = static_cast<double>(pred[off + p]) - static_cast<double>(batch.y[off + p]);
          sse += d * d;
        }
        lead_sse[k] += sse;
        sample_sse += sse;
      }
      total_sse += sample_sse;
      total_count += steps * frame;
      lead_count += frame;
      rmse_sum += std::sqrt(sample_sse / static_cast<double>(steps * frame));
    }
  }

  EvalReport r;
  r.n_samples = samples.size();
  r.fingerprint = std::move(fingerprint);
  r.rmse_overall = std::sqrt(total_sse / static_cast<double>(total_count));
  r.rmse_sample_mean = rmse_sum / static_cast<double>(samples.size());
  for (double sse : lead_sse) r.rmse_per_leadtime.push_back(std::sqrt(sse / static_cast<double>(lead_count)));
  return r;
}

/// Model forecasts in inference mode, tagged with the architecture fingerprint.
inline EvalReport evaluate(const model::ModelParams<float>& params,
                           std::span<const data::SequenceSample> samples,
                           std::span<const std::string> ids = {}, std::size_t batch_size = 8) {
  return evaluate([&](const Tensor<float>& x) { return model::predict(params, x); }, samples,
                  params.arch.fingerprint(), ids, batch_size);
}

/// The last input frame repeated `output_frames` times.
inline Tensor<float> persistence_forecast(const Tensor<float>& x, std::size_t output_frames) {
  if (x.rank() != 5) throw ShapeError("persistence_forecast expects [N,T,C,h,w], got " + to_string(x.shape()));
  const Tensor<float> last = slice_time(x, x.dim(1) - 1);
  Tensor<float> out({x.dim(0), output_frames, x.dim(2), x.dim(3), x.dim(4)});
  for (std::size_t k = 0; k < output_frames; ++k) assign_time(out, k, last);
  return out;
}

inline Predictor persistence_predictor(std::size_t output_frames) {
  return [output_frames](const Tensor<float>& x) { return persistence_forecast(x, output_frames); };
}

}  // namespace nowcast::eval

#endif  // NOWCAST_EVAL_METRICS_HPP
