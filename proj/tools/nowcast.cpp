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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/nowcast.hpp"

namespace {

namespace fs = std::filesystem;
using namespace nowcast;

struct Options {
  std::string config;

  std::string out;
  std::string data;
  std::string checkpoint;
  std::string input;
  std::string frames;
  std::string json;
  std::string sample;
  std::string format = "both";
  std::string baseline;
  std::string from, to;
  std::string size;
  std::optional<std::size_t> count, epochs, batch_size, stride;
  std::optional<std::uint64_t> seed;
  std::optional<double> val_fraction;
  bool resume = false;
};

RunConfig load_config(const Options& o) {
  RunConfig rc = o.config.empty() ? RunConfig::read(KeyValueConfig{}) : RunConfig::load(o.config);
  rc.validate();
  return rc;
}

data::Instant parse_time(const std::string& text, const char* flag) {
  const auto t = data::parse_utc(text);
  if (!t) throw ConfigError(std::string(flag) + ": cannot parse time '" + text + "' (use YYYY-MM-DDTHH:MM)");
  return *t;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw ConfigError("--size expects HxW, got '" + text + "'");
  return {KeyValueConfig::parse_number<std::size_t>(text.substr(0, x), "--size"),
          KeyValueConfig::parse_number<std::size_t>(text.substr(x + 1), "--size")};
}

/// Architecture from the config with the window and frame size taken from the data.
model::ArchitectureConfig arch_for(model::ArchitectureConfig arch, const data::Dataset& ds) {
  if (ds.samples.empty()) throw ValueError("dataset has no samples");
  arch.input_frames = ds.sequence.input_frames;
  arch.output_frames = ds.sequence.output_frames;
  arch.frame_h = ds.samples[0].x[0].height();
  arch.frame_w = ds.samples[0].x[0].width();
  arch.validate();
  return arch;
}

eval::Predictor predictor_for(const Options& o, const RunConfig& rc, std::optional<model::Checkpoint>& ck,
                              std::size_t output_frames, std::string& fingerprint) {
  if (o.baseline == "persistence") {
    fingerprint = "persistence";
    return eval::persistence_predictor(output_frames);
  }
  if (!o.baseline.empty()) throw ConfigError("--baseline: only 'persistence' is available");
  ck = model::load_checkpoint(o.checkpoint.empty() ? rc.checkpoint : fs::path(o.checkpoint));
  fingerprint = ck->params.arch.fingerprint();
  const auto* params = &ck->params;
  return [params](const Tensor<float>& x) { return model::predict(*params, x); };
}

// ---------------------------------------------------------------------------

int run_synth(const Options& o) {
  auto rc = load_config(o);
  if (o.seed) rc.synth.seed = *o.seed;
  const std::size_t count = o.count.value_or(rc.synth_count);
  const fs::path out = o.out.empty() ? rc.data_dir : fs::path(o.out);
  const auto samples = data::synth_advection(rc.synth, count);
  data::write_dataset(out, samples, rc.synth.sequence);
  std::size_t warned = 0;
  for (const auto& s : samples) warned += s.warning ? 1 : 0;
  std::printf("wrote %zu synthetic sequences (%zux%zu, %zu+%zu frames, seed %llu) to %s\n", samples.size(),
              rc.synth.height, rc.synth.width, rc.synth.sequence.input_frames, rc.synth.sequence.output_frames,
              static_cast<unsigned long long>(rc.synth.seed), out.string().c_str());
  if (warned) std::printf("warning: %zu sequences have a blob leaving the frame\n", warned);
  return 0;
}

int run_fetch(const Options& o) {
  auto rc = load_config(o);
  if (!o.out.empty()) rc.fetch.cache_dir = o.out;
  const auto r = data::fetch_frames(rc.fetch, parse_time(o.from, "--from"), parse_time(o.to, "--to"));
  std::printf("%zu files in %s (%zu cached, %zu requests), %zu missing on the server\n", r.files.size(),
              rc.fetch.cache_dir.string().c_str(), r.cache_hits, r.network_requests, r.missing.size());
  for (auto t : r.missing) std::printf("missing %s\n", data::format_utc(t).c_str());
  if (r.budget_exhausted) {
    std::printf("PARTIAL: hourly request budget of %zu exhausted; rerun later to continue\n",
                rc.fetch.requests_per_hour);
  }
  return 0;
}

int run_build_seq(const Options& o) {
  const auto rc = load_config(o);
  const fs::path in = o.frames.empty() ? rc.cache_dir : fs::path(o.frames);
  const fs::path out = o.out.empty() ? rc.data_dir : fs::path(o.out);
  auto frames = data::load_frames_dir(in);
  if (!o.size.empty()) {
    const auto [h, w] = parse_size(o.size);
    for (auto& f : frames) f = data::resize_area(f, h, w);
  }
  data::SequenceConfig seq{rc.arch.input_frames, rc.arch.output_frames, rc.fetch.cadence};
  const auto samples = data::build_sequences(frames, seq, o.stride.value_or(1));
  if (samples.empty()) {
    throw ValueError("no gapless run of " + std::to_string(seq.window()) + " frames among the " +
                     std::to_string(frames.size()) + " frames in " + in.string());
  }
  data::write_dataset(out, samples, seq);
  std::printf("wrote %zu sequences from %zu frames to %s\n", samples.size(), frames.size(), out.string().c_str());
  return 0;
}

int run_train(const Options& o) {
  auto rc = load_config(o);
  if (o.epochs) rc.train.epochs = *o.epochs;
  if (o.batch_size) rc.train.batch_size = *o.batch_size;
  if (o.seed) rc.train.seed = *o.seed;
  rc.train.validate();
  const fs::path data_dir = o.data.empty() ? rc.data_dir : fs::path(o.data);
  const fs::path ckpt = o.checkpoint.empty() ? rc.checkpoint : fs::path(o.checkpoint);
  if (ckpt.has_parent_path()) RunConfig::ensure_dir(ckpt.parent_path(), "paths.checkpoint");

  const auto ds = data::read_dataset(data_dir);
  std::vector<data::SequenceSample> train_set = ds.samples, val_set;
  if (o.val_fraction) {
    auto split = data::split_train_val(ds.samples, *o.val_fraction, data::SplitPolicy::ByTimeRange);
    train_set = std::move(split.train);
    val_set = std::move(split.val);
    std::printf("split: %zu train, %zu validation, %zu dropped at the boundary\n", train_set.size(),
                val_set.size(), split.dropped);
  }

  model::ModelParams<float> params;
  optim::OptimState<float> state;
  model::TrainingMeta meta;
  if (o.resume && fs::exists(ckpt)) {
    auto ck = model::load_checkpoint(ckpt);
    if (!ck.optimizer) throw FormatError(FormatErrorKind::Malformed, "checkpoint has no optimizer state to resume");
    params = std::move(ck.params);
    state = std::move(*ck.optimizer);
    meta = ck.meta;
    std::printf("resuming %s after epoch %zu\n", ckpt.string().c_str(), meta.epoch);
  } else {
    params = model::build_model<float>(arch_for(rc.arch, ds), rc.train.seed);
    state = model::init_optim_state(params, rc.train.optimizer);
  }
  std::printf("training %zu parameters on %zu sequences for %zu epochs (batch %zu)\n", params.parameter_count(),
              train_set.size(), rc.train.epochs, rc.train.batch_size);

  train::FitHooks hooks;
  hooks.on_epoch = [&](const train::EpochReport& r, const model::ModelParams<float>& p,
                       const optim::OptimState<float>& s, const model::TrainingMeta& m) {
    model::save_checkpoint(p, &s, m, ckpt);
    std::printf("epoch %zu/%zu  loss %.6f", r.epoch, rc.train.epochs, r.mean_loss);
    if (!val_set.empty()) {
      std::printf("  val rmse %.5f", eval::evaluate(p, val_set, {}, rc.eval.batch_size).rmse_overall);
    }
    std::printf("\n");
    std::fflush(stdout);
  };
  train::fit(params, state, train_set, rc.train, meta, hooks);
  std::printf("checkpoint: %s\n", ckpt.string().c_str());
  return 0;
}

int run_predict(const Options& o) {
  const auto rc = load_config(o);
  const auto ck = model::load_checkpoint(o.checkpoint.empty() ? rc.checkpoint : fs::path(o.checkpoint));
  const auto& arch = ck.params.arch;
  if (o.input.empty()) throw ConfigError("--input is required");
  const fs::path out = o.out.empty() ? rc.out_dir / "predict" : fs::path(o.out);
  if (o.format != "rfrm" && o.format != "png" && o.format != "both") {
    throw ConfigError("--format must be rfrm, png or both");
  }

  std::vector<data::RadarFrame> inputs;
  data::minutes cadence = rc.fetch.cadence;
  if (fs::exists(fs::path(o.input) / "manifest.json")) {
    const auto ds = data::read_dataset(o.input);
    std::size_t idx = 0;
    if (!o.sample.empty()) {
      auto it = std::find(ds.ids.begin(), ds.ids.end(), o.sample);
      idx = it != ds.ids.end() ? static_cast<std::size_t>(it - ds.ids.begin())
                               : KeyValueConfig::parse_number<std::size_t>(o.sample, "--sample");
    }
    if (idx >= ds.samples.size()) throw ValueError("--sample " + o.sample + " is not in " + o.input);
    inputs = ds.samples[idx].x;
    cadence = ds.sequence.cadence;
  } else {
    inputs = data::load_frames_dir(o.input);
    if (inputs.size() < arch.input_frames) {
      throw ValueError(o.input + " holds " + std::to_string(inputs.size()) + " frames, the model needs " +
                       std::to_string(arch.input_frames));
    }
    inputs.erase(inputs.begin(), inputs.end() - static_cast<std::ptrdiff_t>(arch.input_frames));
  }
  const auto x = data::stack_frames(inputs);
  const auto y = model::predict(ck.params, x.reshaped({1, x.dim(0), x.dim(1), x.dim(2), x.dim(3)}));
  std::vector<data::Instant> times;
  for (std::size_t k = 1; k <= arch.output_frames; ++k) {
    times.push_back(inputs.back().timestamp + cadence * static_cast<int>(k));
  }
  const auto frames =
      data::unstack_frames(y.reshaped({y.dim(1), y.dim(2), y.dim(3), y.dim(4)}), times, data::FrameSource::Predicted);
  RunConfig::ensure_dir(out, "--out");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "pred_%02zu", k + 1);
    if (o.format != "png") io::write_file(out / (std::string(name) + ".rfrm"), data::encode_rfrm(frames[k]));
    if (o.format != "rfrm") eval::render_frame(frames[k], out / (std::string(name) + ".png"));
  }
  std::printf("wrote %zu predicted frames (%s .. %s) to %s\n", frames.size(),
              data::format_utc(times.front()).c_str(), data::format_utc(times.back()).c_str(), out.string().c_str());
  return 0;
}

int run_eval(const Options& o) {
  const auto rc = load_config(o);
  const auto ds = data::read_dataset(o.data.empty() ? rc.data_dir : fs::path(o.data));
  std::optional<model::Checkpoint> ck;
  std::string fingerprint;
  const auto predict = predictor_for(o, rc, ck, ds.sequence.output_frames, fingerprint);
  const auto report = eval::evaluate(predict, ds.samples, fingerprint, ds.ids, rc.eval.batch_size);
  std::cout << report.table(ds.sequence.cadence);
  const fs::path json_path = o.json.empty() ? rc.out_dir / "eval.json" : fs::path(o.json);
  if (json_path.has_parent_path()) RunConfig::ensure_dir(json_path.parent_path(), "--json");
  const std::string text = report.to_json().dump(2) + "\n";
  io::write_file(json_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::printf("report: %s\n", json_path.string().c_str());
  return 0;
}

int run_render(const Options& o) {
  auto rc = load_config(o);
  const auto ds = data::read_dataset(o.data.empty() ? rc.data_dir : fs::path(o.data));
  std::size_t idx = 0;
  if (!o.sample.empty()) {
    auto it = std::find(ds.ids.begin(), ds.ids.end(), o.sample);
    idx = it != ds.ids.end() ? static_cast<std::size_t>(it - ds.ids.begin())
                             : KeyValueConfig::parse_number<std::size_t>(o.sample, "--sample");
  }
  if (idx >= ds.samples.size()) throw ValueError("--sample " + o.sample + " is not in the dataset");
  std::optional<model::Checkpoint> ck;
  std::string fingerprint;
  const auto predict = predictor_for(o, rc, ck, ds.sequence.output_frames, fingerprint);
  const auto& s = ds.samples[idx];
  const auto batch = data::stack_samples(std::span(&s, 1));
  const auto y = predict(batch.x);
  std::vector<data::Instant> times;
  for (const auto& f : s.y) times.push_back(f.timestamp);
  const auto pred =
      data::unstack_frames(y.reshaped({y.dim(1), y.dim(2), y.dim(3), y.dim(4)}), times, data::FrameSource::Predicted);
  rc.eval.render.cadence = ds.sequence.cadence;
  const fs::path out = o.out.empty() ? rc.out_dir / "render" : fs::path(o.out);
  const auto r = eval::render_comparison(pred, s.y, out, rc.eval.render);
  std::printf("sample %s: %zu panels, %s, %s (rmse %.5f)\n", ds.ids[idx].c_str(), r.panels.size(),
              r.gif.string().c_str(), r.strip.string().c_str(), eval::rmse(pred, s.y));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar precipitation nowcasting with a ConvLSTM autoencoder", "nowcast"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "generate a synthetic advection dataset");
  synth->add_option("--out", o.out, "dataset directory (default paths.data_dir)");
  synth->add_option("--count", o.count, "number of sequences (default synth.count)");
  synth->add_option("--seed", o.seed, "generator seed (default synth.seed)");

  auto* fetch = app.add_subcommand("fetch", "download radar frames into the cache");
  fetch->add_option("--from", o.from, "window start, UTC (inclusive)")->required();
  fetch->add_option("--to", o.to, "window end, UTC (exclusive)")->required();
  fetch->add_option("--out", o.out, "cache directory (default paths.cache_dir)");

  auto* build = app.add_subcommand("build-seq", "cut gapless frame runs into input/output sequences");
  build->add_option("--frames", o.frames, "directory of .png/.rfrm frames (default paths.cache_dir)");
  build->add_option("--out", o.out, "dataset directory (default paths.data_dir)");
  build->add_option("--size", o.size, "resize frames to HxW by area averaging");
  build->add_option("--stride", o.stride, "window stride in frames (default 1)");

  auto* train = app.add_subcommand("train", "train a model, checkpointing after every epoch");
  train->add_option("--data", o.data, "dataset directory (default paths.data_dir)");
  train->add_option("--checkpoint", o.checkpoint, "checkpoint path (default paths.checkpoint)");
  train->add_option("--epochs", o.epochs, "epochs (default train.epochs = 25)");
  train->add_option("--batch-size", o.batch_size, "mini-batch size (default train.batch_size = 1)");
  train->add_option("--seed", o.seed, "initialization and shuffling seed (default train.seed)");
  train->add_option("--val-fraction", o.val_fraction, "hold out the latest fraction and report its RMSE");
  train->add_flag("--resume", o.resume, "continue from the checkpoint if it exists");

  auto* predict = app.add_subcommand("predict", "forecast the frames following an input sequence");
  predict->add_option("--checkpoint", o.checkpoint, "checkpoint path (default paths.checkpoint)");
  predict->add_option("--input", o.input, "frame directory, or dataset directory with --sample")->required();
  predict->add_option("--sample", o.sample, "dataset sample id or index (default 0)");
  predict->add_option("--out", o.out, "output directory (default paths.out_dir/predict)");
  predict->add_option("--format", o.format, "rfrm, png or both (default both)");

  auto* evaluate = app.add_subcommand("eval", "RMSE report as a table and as JSON");
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint path (default paths.checkpoint)");
  evaluate->add_option("--data", o.data, "dataset directory (default paths.data_dir)");
  evaluate->add_option("--json", o.json, "JSON report path (default paths.out_dir/eval.json)");
  evaluate->add_option("--baseline", o.baseline, "evaluate a baseline instead of a model: persistence");

  auto* render = app.add_subcommand("render", "truth/prediction panels, strip and GIF for one sample");
  render->add_option("--checkpoint", o.checkpoint, "checkpoint path (default paths.checkpoint)");
  render->add_option("--data", o.data, "dataset directory (default paths.data_dir)");
  render->add_option("--sample", o.sample, "sample id or index (default 0)");
  render->add_option("--out", o.out, "output directory (default paths.out_dir/render)");
  render->add_option("--baseline", o.baseline, "render a baseline instead of a model: persistence");

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      ++i;
    } else if (!arg.empty() && arg[0] != '-') {
      if (app.get_subcommand_no_throw(arg) == nullptr) {
        std::cerr << "nowcast: unknown subcommand '" << arg << "'\n\n" << app.help();
        return 2;
      }
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "nowcast: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(o);
    if (fetch->parsed()) return run_fetch(o);
    if (build->parsed()) return run_build_seq(o);
    if (train->parsed()) return run_train(o);
    if (predict->parsed()) return run_predict(o);
    if (evaluate->parsed()) return run_eval(o);
    if (render->parsed()) return run_render(o);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "nowcast: error: " << msg << "\n";
    return 1;
  }
  return 2;
}
