// Copyright 2026 The sadet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: dataset synthesis, training, inference, evaluation,
// gradient checking, benchmarking and scale-map rendering.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sadet/config.hpp"
#include "sadet/error.hpp"
#include "sadet/evalmetrics.hpp"
#include "sadet/gradcheck.hpp"
#include "sadet/synthdata.hpp"
#include "sadet/training.hpp"

namespace fs = std::filesystem;
namespace net = sadet::net;
namespace eval = sadet::eval;
namespace synth = sadet::synth;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kConfig = 3, kIo = 4, kNumeric = 5 };

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string data_dir;
  std::string resume;
  std::vector<std::string> images;
  int count = 0;
  bool held_out = false;
  double tolerance = 1e-4;
  std::vector<int> sizes = {16, 32, 64};
  int channels = 16;
  int repetitions = 20;
  int upscale = 4;
};

// Config from --config, else from the checkpoint, else defaults; then
// --set overrides, then --seed.
sadet::TrainConfig resolve_config(const Options& o) {
  sadet::TrainConfig c;
  if (!o.config_path.empty()) {
    c = sadet::load_config(o.config_path);
  } else if (!o.checkpoint.empty()) {
    c = net::checkpoint_config(o.checkpoint);
  } else if (!o.resume.empty()) {
    c = net::checkpoint_config(o.resume);
  }
  sadet::apply_overrides(c, o.overrides);
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

fs::path out_path(const Options& o, const std::string& name) {
  if (o.out_dir.empty()) throw sadet::InvalidArgument("--out is required for this command");
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw sadet::IoError("cannot create " + o.out_dir + ": " + ec.message());
  return fs::path(o.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw sadet::IoError("cannot write " + path.string());
}

std::vector<synth::Scene> eval_scenes(const Options& o, const sadet::TrainConfig& c) {
  return o.data_dir.empty() ? eval::held_out_scenes(c) : synth::read_dataset(o.data_dir);
}

int cmd_synth(const Options& o) {
  const auto c = resolve_config(o);
  const std::uint64_t seed = o.held_out ? c.test_seed : c.seed;
  int n = o.count;
  if (n <= 0) n = o.held_out ? c.test_scenes : (c.train_scenes > 0 ? c.train_scenes : 1000);
  const auto spec = synth::SceneSpec::from_config(c, seed);
  std::vector<synth::Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) scenes.push_back(synth::generate_scene(spec, static_cast<std::uint64_t>(i)));
  const auto dir = out_path(o, "");
  synth::write_dataset(dir.string(), scenes);
  std::printf("wrote %d scenes to %s\n", n, o.out_dir.c_str());
  return kOk;
}

template <typename T>
int train(const Options& o, const sadet::TrainConfig& c) {
  auto source = o.data_dir.empty() ? net::SceneSource::from_config(c)
                                   : net::SceneSource::dataset(synth::read_dataset(o.data_dir));
  out_path(o, "");
  std::optional<net::Trainer<T>> trainer;
  if (o.resume.empty()) {
    trainer.emplace(c, std::move(source));
  } else {
    auto ck = net::load_checkpoint<T>(o.resume);
    ck.config = c;
    trainer.emplace(ck, std::move(source));
  }
  trainer->dump_dir = o.out_dir;
  write_text(fs::path(o.out_dir) / "config.txt", c.to_text());
  net::RunOptions run{o.out_dir, [](const net::LossRecord& r) {
                        std::printf("iter %d loss %.5f conf %.5f loc %.5f matched %lld\n", r.iteration, r.total,
                                    r.conf, r.loc, static_cast<long long>(r.n_matched));
                        std::fflush(stdout);
                      }};
  (void)net::run_training(*trainer, run);
  return kOk;
}

int cmd_train(const Options& o) {
  const auto c = resolve_config(o);
  return c.precision == sadet::Precision::kF64 ? train<double>(o, c) : train<float>(o, c);
}

template <typename T>
net::Model<T> load_model(const Options& o, const sadet::TrainConfig& c) {
  if (o.checkpoint.empty()) throw sadet::InvalidArgument("--checkpoint is required for this command");
  const auto ck = net::load_checkpoint<T>(o.checkpoint);
  net::Model<T> model(c);
  net::load_params(model, ck.params);
  return model;
}

std::vector<std::pair<std::string, synth::Image>> input_images(const Options& o) {
  std::vector<std::pair<std::string, synth::Image>> out;
  for (const auto& path : o.images) out.emplace_back(fs::path(path).stem().string(), synth::read_ppm(path));
  if (!o.data_dir.empty()) {
    const auto scenes = synth::read_dataset(o.data_dir);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "scene_%06zu", i);
      out.emplace_back(stem, scenes[i].image);
    }
  }
  if (out.empty()) throw sadet::InvalidArgument("no input images: pass image paths or --data DIR");
  return out;
}

template <typename T>
int infer(const Options& o, const sadet::TrainConfig& c) {
  auto model = load_model<T>(o, c);
  for (const auto& [stem, image] : input_images(o)) {
    const auto dets = net::infer(model, c, image.template to_tensor<T>());
    std::ofstream txt(out_path(o, stem + ".txt"));
    sadet::geometry::write_detections(txt, dets);
    if (!txt) throw sadet::IoError("cannot write " + (fs::path(o.out_dir) / (stem + ".txt")).string());
    std::vector<sadet::geometry::Box> boxes;
    for (const auto& d : dets) boxes.push_back(d.box);
    synth::write_ppm(out_path(o, stem + "_boxes.ppm").string(), eval::draw_boxes(image, boxes));
    std::printf("%s: %zu detections\n", stem.c_str(), dets.size());
  }
  return kOk;
}

template <typename T>
int evaluate(const Options& o, const sadet::TrainConfig& c) {
  auto model = load_model<T>(o, c);
  const auto scenes = eval_scenes(o, c);
  std::vector<std::vector<sadet::geometry::Box>> gts;
  for (const auto& s : scenes) gts.push_back(s.gts);
  const auto dets = eval::detect_all(model, c, scenes);
  const auto report = eval::evaluate(dets, gts, c.eval_iou);
  const auto corr = eval::scale_correlation(model, c, scenes);
  std::string summary = eval::report_summary(report);
  if (std::any_of(gts.begin(), gts.end(), [](const auto& g) { return !g.empty(); })) {
    const double q = eval::diagonal_quantile(gts, 0.25);
    const auto small = eval::evaluate(dets, gts, c.eval_iou, {0, q});
    char line[160];
    std::snprintf(line, sizeof line, "small_diagonal_max %.4g\nsmall_precision %.4g\nsmall_recall %.4g\nsmall_f_measure %.4g\n",
                  q, small.precision, small.recall, small.f_measure);
    summary += line;
  }
  summary += eval::correlation_summary(corr);
  std::cout << summary;
  if (!o.out_dir.empty()) {
    write_text(out_path(o, "eval.csv"), eval::report_csv(report));
    write_text(out_path(o, "eval.txt"), summary);
  }
  return kOk;
}

template <typename T>
int scalemap(const Options& o, const sadet::TrainConfig& c) {
  auto model = load_model<T>(o, c);
  for (const auto& [stem, image] : input_images(o)) {
    const auto map = net::predict_scale_map(model, c, image.template to_tensor<T>()).template cast<double>();
    const auto [lo, hi] = eval::write_heatmap(out_path(o, stem + "_scale.ppm").string(), map, o.upscale);
    std::printf("%s: scale min %.4g max %.4g\n", stem.c_str(), lo, hi);
  }
  return kOk;
}

template <template <typename> class F>
int dispatch(const Options& o) {
  const auto c = resolve_config(o);
  return c.precision == sadet::Precision::kF64 ? F<double>{}(o, c) : F<float>{}(o, c);
}

template <typename T>
struct InferCmd {
  int operator()(const Options& o, const sadet::TrainConfig& c) { return infer<T>(o, c); }
};
template <typename T>
struct EvalCmd {
  int operator()(const Options& o, const sadet::TrainConfig& c) { return evaluate<T>(o, c); }
};
template <typename T>
struct ScaleMapCmd {
  int operator()(const Options& o, const sadet::TrainConfig& c) { return scalemap<T>(o, c); }
};

int cmd_gradcheck(const Options& o) {
  const auto c = resolve_config(o);
  std::string csv = "suite,class,rel_error,max_abs_diff,checked\n";
  bool ok = true;
  for (const auto& [suite, result] : {std::pair{"anchorconv", sadet::gradcheck::anchorconv_suite(c.seed)},
                                      std::pair{"whole_graph", sadet::gradcheck::whole_graph_suite(c.seed)}}) {
    for (const auto& k : result.classes) {
      std::printf("%-40s %.3e\n", k.name.c_str(), k.rel_error);
      char row[256];
      std::snprintf(row, sizeof row, "%s,%s,%.6e,%.6e,%zu\n", suite, k.name.c_str(), k.rel_error, k.max_abs_diff,
                    k.checked);
      csv += row;
    }
    std::printf("%-12s worst %.3e (tolerance %.1e)\n", suite, result.worst(), o.tolerance);
    ok = ok && result.passed(o.tolerance);
  }
  if (!o.out_dir.empty()) write_text(out_path(o, "gradcheck.csv"), csv);
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? kOk : kFailed;
}

int cmd_bench(const Options& o) {
  const std::vector<eval::BenchOp> ops = {eval::BenchOp::kAnchorConvForward, eval::BenchOp::kAnchorConvBackward,
                                          eval::BenchOp::kStandardConv};
  const auto rows = eval::bench(ops, o.sizes, o.channels, o.repetitions);
  const auto csv = eval::bench_csv(rows);
  std::cout << csv;
  if (!o.out_dir.empty()) write_text(out_path(o, "bench.csv"), csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sadet: single-shot text detection with scale-adaptive anchors"};
  app.require_subcommand(1, 1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Config file (key = value lines)");
    sub->add_option("--out", o.out_dir, "Output directory");
    sub->add_option("--set", o.overrides, "Override a config key, KEY=VALUE (repeatable)");
    sub->add_option("--seed", o.seed, "Override the seed");
  };

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  common(synth_cmd);
  synth_cmd->add_option("--count", o.count, "Number of scenes");
  synth_cmd->add_flag("--held-out", o.held_out, "Use the held-out test seed and count");

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes loss.csv and checkpoints");
  common(train_cmd);
  train_cmd->add_option("--data", o.data_dir, "Train on a dataset directory instead of fresh scenes");
  train_cmd->add_option("--resume", o.resume, "Resume from a checkpoint");

  auto* infer_cmd = app.add_subcommand("infer", "Detect text; writes boxes and overlay images");
  common(infer_cmd);
  infer_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  infer_cmd->add_option("--data", o.data_dir, "Dataset directory of input images");
  infer_cmd->add_option("images", o.images, "Input PPM images");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on held-out scenes or a dataset");
  common(eval_cmd);
  eval_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--data", o.data_dir, "Dataset directory (default: held-out scenes)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  common(grad_cmd);
  grad_cmd->add_option("--tolerance", o.tolerance, "Maximum relative error");

  auto* bench_cmd = app.add_subcommand("bench", "Time anchor convolution against a standard convolution");
  common(bench_cmd);
  bench_cmd->add_option("--sizes", o.sizes, "Square map sides");
  bench_cmd->add_option("--channels", o.channels, "Channels");
  bench_cmd->add_option("--reps", o.repetitions, "Timed repetitions");

  auto* scale_cmd = app.add_subcommand("scalemap", "Render predicted scale maps as heatmaps");
  common(scale_cmd);
  scale_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  scale_cmd->add_option("--data", o.data_dir, "Dataset directory of input images");
  scale_cmd->add_option("images", o.images, "Input PPM images");
  scale_cmd->add_option("--upscale", o.upscale, "Pixels per scale-map cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(o);
    if (*train_cmd) return cmd_train(o);
    if (*infer_cmd) return dispatch<InferCmd>(o);
    if (*eval_cmd) return dispatch<EvalCmd>(o);
    if (*grad_cmd) return cmd_gradcheck(o);
    if (*bench_cmd) return cmd_bench(o);
    if (*scale_cmd) return dispatch<ScaleMapCmd>(o);
  } catch (const sadet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const sadet::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const sadet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const sadet::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
