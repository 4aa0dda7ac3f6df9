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

#pragma once

// Detection quality (precision/recall/F at an IoU threshold), the
// correlation between object size and learned scale, operator timing, and
// scale-map heatmaps.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sadet/config.hpp"
#include "sadet/geometry.hpp"
#include "sadet/network.hpp"
#include "sadet/synthdata.hpp"
#include "sadet/tensor.hpp"

namespace sadet::eval {

struct SceneCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f_measure = 0;
  double iou_threshold = 0.5;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::vector<SceneCounts> per_scene;
};

// Restricts evaluation to ground truths whose diagonal lies in [lo, hi].
// Detections matched to other ground truths, and unmatched detections whose
// diagonal is outside the range, are ignored rather than counted.
struct SizeRange {
  double lo = 0;
  double hi = 1e300;
  bool contains(const geometry::Box& b) const;
};

// 2PR/(P+R), or 0 when P+R == 0.
double f_measure(double precision, double recall);

// Greedy one-to-one matching per scene: detections in descending score
// (ties: input order) take the unmatched gt of highest IoU >= threshold.
// With no detections P = 1; with no ground truths R = 1.
EvalReport evaluate(std::span<const std::vector<geometry::Detection>> dets,
                    std::span<const std::vector<geometry::Box>> gts, double iou_threshold,
                    const SizeRange& range = {});

// gt index matched by each detection (input order), for one scene.
std::vector<std::optional<std::size_t>> greedy_match(std::span<const geometry::Detection> dets,
                                                     std::span<const geometry::Box> gts, double iou_threshold);

// Diagonal below which a quarter of the given boxes fall.
double diagonal_quantile(std::span<const std::vector<geometry::Box>> gts, double q);

struct SizeBin {
  double lo = 0;
  double hi = 0;
  double mean_scale = 0;
  std::int64_t count = 0;
};

struct ScaleCorrelationReport {
  std::vector<std::pair<double, double>> pairs;  // (gt diagonal, scale at its centre cell)
  std::optional<double> pearson_r;              // empty when degenerate
  bool degenerate = false;                       // a variable has zero variance
  std::int64_t skipped = 0;                      // gt centres outside the map
  std::vector<SizeBin> bins;
};

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// scale_maps[i] is the H x W map of scene i; cells are `stride` pixels.
ScaleCorrelationReport scale_correlation(std::span<const Tensor<double>> scale_maps,
                                         std::span<const std::vector<geometry::Box>> gts, int stride,
                                         int n_bins = 4);

template <typename T>
ScaleCorrelationReport scale_correlation(net::Model<T>& model, const TrainConfig& config,
                                         std::span<const synth::Scene> scenes, int n_bins = 4);

// Runs inference on every scene.
template <typename T>
std::vector<std::vector<geometry::Detection>> detect_all(net::Model<T>& model, const TrainConfig& config,
                                                         std::span<const synth::Scene> scenes);

std::vector<synth::Scene> held_out_scenes(const TrainConfig& config);

std::string report_csv(const EvalReport& report);
std::string report_summary(const EvalReport& report);
std::string correlation_summary(const ScaleCorrelationReport& report);

enum class BenchOp { kAnchorConvForward, kAnchorConvBackward, kStandardConv };

struct BenchRow {
  BenchOp op = BenchOp::kStandardConv;
  int channels = 0;
  int size = 0;  // square map side
  int repetitions = 0;
  double median_ms = 0;
  double p10_ms = 0;
  double p90_ms = 0;
  std::string simd_level;
};

struct BenchStats {
  double median = 0;
  double p10 = 0;
  double p90 = 0;
};

// Nearest-rank style linear interpolation; one sample gives that sample.
BenchStats summarize(std::vector<double> samples);

// Times each op on a channels x size x size input with a 1x5 kernel and
// s = 1, after `warmup` untimed calls.
std::vector<BenchRow> bench(std::span<const BenchOp> ops, std::span<const int> sizes, int channels,
                            int repetitions, int warmup = 1);

std::string bench_op_name(BenchOp op);
std::string bench_csv(std::span<const BenchRow> rows);

// Grayscale PPM of the map, min..max stretched to 0..255, each cell drawn as
// an upscale x upscale block. Returns the (min, max) used.
std::pair<double, double> write_heatmap(const std::string& path, const Tensor<double>& map, int upscale = 4);

// Copy of the image with each box drawn as a 1-pixel green rectangle.
synth::Image draw_boxes(const synth::Image& image, std::span<const geometry::Box> boxes);

}  // namespace sadet::eval
