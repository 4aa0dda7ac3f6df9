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

#include "sadet/evalmetrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sadet/anchorconv.hpp"
#include "sadet/error.hpp"
#include "sadet/layers.hpp"
#include "sadet/simd.hpp"
#include "sadet/training.hpp"

namespace sadet::eval {
namespace {

using geometry::Box;
using geometry::Detection;

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

// Best unmatched gt with IoU >= threshold among those passing `eligible`.
template <typename Pred>
std::optional<std::size_t> best_gt(const Box& box, std::span<const Box> gts, const std::vector<bool>& taken,
                                   double threshold, Pred eligible) {
  std::optional<std::size_t> best;
  double best_iou = 0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (taken[g] || !eligible(g)) continue;
    const double v = geometry::iou(box, gts[g]);
    if (v >= threshold && (!best || v > best_iou)) {
      best = g;
      best_iou = v;
    }
  }
  return best;
}

}  // namespace

bool SizeRange::contains(const Box& b) const {
  const double d = b.diagonal();
  return d >= lo && d <= hi;
}

double f_measure(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::vector<std::optional<std::size_t>> greedy_match(std::span<const Detection> dets, std::span<const Box> gts,
                                                     double iou_threshold) {
  std::vector<std::optional<std::size_t>> out(dets.size());
  std::vector<bool> taken(gts.size());
  for (std::size_t d : score_order(dets)) {
    out[d] = best_gt(dets[d].box, gts, taken, iou_threshold, [](std::size_t) { return true; });
    if (out[d]) taken[*out[d]] = true;
  }
  return out;
}

EvalReport evaluate(std::span<const std::vector<Detection>> dets, std::span<const std::vector<Box>> gts,
                    double iou_threshold, const SizeRange& range) {
  SADET_CHECK(dets.size() == gts.size(), "evaluate: detection and ground-truth scene counts differ");
  SADET_CHECK(iou_threshold > 0 && iou_threshold < 1, "evaluate: IoU threshold must be in (0, 1)");
  EvalReport rep;
  rep.iou_threshold = iou_threshold;
  for (std::size_t s = 0; s < dets.size(); ++s) {
    const auto& sg = gts[s];
    std::vector<bool> in_range(sg.size()), taken(sg.size());
    for (std::size_t g = 0; g < sg.size(); ++g) in_range[g] = range.contains(sg[g]);
    SceneCounts c;
    for (std::size_t d : score_order(dets[s])) {
      const Box& box = dets[s][d].box;
      if (auto g = best_gt(box, sg, taken, iou_threshold, [&](std::size_t i) { return in_range[i]; })) {
        taken[*g] = true;
        ++c.tp;
      } else if (auto o = best_gt(box, sg, taken, iou_threshold, [&](std::size_t i) { return !in_range[i]; })) {
        taken[*o] = true;  // matched an out-of-range object: ignored
      } else if (range.contains(box)) {
        ++c.fp;
      }
    }
    for (std::size_t g = 0; g < sg.size(); ++g) c.fn += in_range[g] && !taken[g];
    rep.tp += c.tp;
    rep.fp += c.fp;
    rep.fn += c.fn;
    rep.per_scene.push_back(c);
  }
  rep.precision = rep.tp + rep.fp > 0 ? static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fp) : 1.0;
  rep.recall = rep.tp + rep.fn > 0 ? static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fn) : 1.0;
  rep.f_measure = f_measure(rep.precision, rep.recall);
  return rep;
}

double diagonal_quantile(std::span<const std::vector<Box>> gts, double q) {
  std::vector<double> d;
  for (const auto& scene : gts) {
    for (const auto& b : scene) d.push_back(b.diagonal());
  }
  SADET_CHECK(!d.empty(), "diagonal_quantile: no boxes");
  std::sort(d.begin(), d.end());
  const double pos = q * static_cast<double>(d.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  return i + 1 < d.size() ? d[i] + (pos - i) * (d[i + 1] - d[i]) : d.back();
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  SADET_CHECK(x.size() == y.size(), "pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  // Relative test so that rounding noise on a constant input reads as zero.
  const double tiny = 1e-24 * n;
  if (sxx <= tiny * (mx * mx + 1) || syy <= tiny * (my * my + 1)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScaleCorrelationReport scale_correlation(std::span<const Tensor<double>> scale_maps,
                                         std::span<const std::vector<Box>> gts, int stride, int n_bins) {
  SADET_CHECK(scale_maps.size() == gts.size(), "scale_correlation: map and scene counts differ");
  SADET_CHECK(stride >= 1 && n_bins >= 1, "scale_correlation: stride and bin count must be positive");
  ScaleCorrelationReport rep;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    const auto& map = scale_maps[s];
    SADET_CHECK(map.rank() == 2, "scale_correlation: scale maps must be H x W");
    for (const auto& g : gts[s]) {
      const auto row = static_cast<std::int64_t>(std::floor(g.y / stride));
      const auto col = static_cast<std::int64_t>(std::floor(g.x / stride));
      if (row < 0 || col < 0 || row >= map.dim(0) || col >= map.dim(1)) {
        ++rep.skipped;
        continue;
      }
      rep.pairs.emplace_back(g.diagonal(), map(row, col));
    }
  }
  std::vector<double> x, y;
  for (const auto& [d, s] : rep.pairs) {
    x.push_back(d);
    y.push_back(s);
  }
  rep.pearson_r = pearson(x, y);
  rep.degenerate = !rep.pearson_r.has_value();
  if (!x.empty()) {
    const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
    const double width = (hi - lo) / n_bins;
    for (int b = 0; b < n_bins; ++b) rep.bins.push_back({lo + b * width, lo + (b + 1) * width, 0, 0});
    for (const auto& [d, s] : rep.pairs) {
      const int b = width > 0 ? std::min(n_bins - 1, static_cast<int>((d - lo) / width)) : 0;
      rep.bins[b].mean_scale += s;
      ++rep.bins[b].count;
    }
    for (auto& bin : rep.bins) {
      if (bin.count > 0) bin.mean_scale /= static_cast<double>(bin.count);
    }
  }
  return rep;
}

template <typename T>
ScaleCorrelationReport scale_correlation(net::Model<T>& model, const TrainConfig& config,
                                         std::span<const synth::Scene> scenes, int n_bins) {
  std::vector<Tensor<double>> maps;
  std::vector<std::vector<Box>> gts;
  for (const auto& s : scenes) {
    maps.push_back(net::predict_scale_map(model, config, s.image.to_tensor<T>()).template cast<double>());
    gts.push_back(s.gts);
  }
  return scale_correlation(maps, gts, net::kStride, n_bins);
}

template <typename T>
std::vector<std::vector<Detection>> detect_all(net::Model<T>& model, const TrainConfig& config,
                                               std::span<const synth::Scene> scenes) {
  std::vector<std::vector<Detection>> out;
  for (const auto& s : scenes) out.push_back(net::infer(model, config, s.image.to_tensor<T>()));
  return out;
}

std::vector<synth::Scene> held_out_scenes(const TrainConfig& config) {
  const auto spec = synth::SceneSpec::from_config(config, config.test_seed);
  std::vector<synth::Scene> out;
  for (int i = 0; i < config.test_scenes; ++i) out.push_back(synth::generate_scene(spec, i));
  return out;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "scene,tp,fp,fn\n";
  for (std::size_t i = 0; i < r.per_scene.size(); ++i) {
    ss << i << ',' << r.per_scene[i].tp << ',' << r.per_scene[i].fp << ',' << r.per_scene[i].fn << '\n';
  }
  ss << "total," << r.tp << ',' << r.fp << ',' << r.fn << '\n';
  return ss.str();
}

std::string report_summary(const EvalReport& r) {
  std::ostringstream ss;
  ss.precision(4);
  ss << "# P = 1 when there are no detections, R = 1 when there are no ground truths\n"
     << "iou_threshold " << r.iou_threshold << "\nprecision " << r.precision << "\nrecall " << r.recall
     << "\nf_measure " << r.f_measure << "\ntp " << r.tp << "\nfp " << r.fp << "\nfn " << r.fn << '\n';
  return ss.str();
}

std::string correlation_summary(const ScaleCorrelationReport& r) {
  std::ostringstream ss;
  ss.precision(4);
  ss << "pairs " << r.pairs.size() << "\nskipped " << r.skipped << "\npearson_r ";
  if (r.pearson_r) {
    ss << *r.pearson_r;
  } else {
    ss << "degenerate";
  }
  ss << "\nbin_lo,bin_hi,mean_scale,count\n";
  for (const auto& b : r.bins) ss << b.lo << ',' << b.hi << ',' << b.mean_scale << ',' << b.count << '\n';
  return ss.str();
}

BenchStats summarize(std::vector<double> samples) {
  SADET_CHECK(!samples.empty(), "summarize: no samples");
  std::sort(samples.begin(), samples.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(samples.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    return i + 1 < samples.size() ? samples[i] + (pos - i) * (samples[i + 1] - samples[i]) : samples.back();
  };
  return {at(0.5), at(0.1), at(0.9)};
}

std::string bench_op_name(BenchOp op) {
  switch (op) {
    case BenchOp::kAnchorConvForward:
      return "anchorconv-forward";
    case BenchOp::kAnchorConvBackward:
      return "anchorconv-backward";
    case BenchOp::kStandardConv:
      return "standard-conv";
  }
  return "?";
}

std::vector<BenchRow> bench(std::span<const BenchOp> ops, std::span<const int> sizes, int channels,
                            int repetitions, int warmup) {
  SADET_CHECK(warmup >= 1, "bench: warmup must be at least 1");
  SADET_CHECK(repetitions >= 1 && channels >= 1, "bench: repetitions and channels must be positive");
  std::mt19937_64 rng(7);
  auto fill = [&](Tensor<float>& t) {
    for (auto& v : t.values()) v = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
  };
  std::vector<BenchRow> rows;
  for (int size : sizes) {
    SADET_CHECK(size >= 1, "bench: sizes must be positive");
    Tensor<float> input({channels, size, size}), kernel({channels, channels, 1, 5}), bias({channels});
    fill(input);
    fill(kernel);
    const Tensor<float> ones({size, size}, 1.0f);
    Tensor<float> grad_out({channels, size, size});
    fill(grad_out);
    for (BenchOp op : ops) {
      anchorconv::AnchorConv<float> ac({1, 5, 1, 1, channels, channels, 0.5});
      layers::Conv2dSpec cs;
      cs.c_in = cs.c_out = channels;
      cs.k_h = 1;
      cs.k_w = 5;
      layers::Conv2d<float> conv(cs);
      auto once = [&] {
        switch (op) {
          case BenchOp::kAnchorConvForward:
            (void)ac.forward(input, {kernel, bias}, ones);
            break;
          case BenchOp::kAnchorConvBackward:
            (void)ac.backward(grad_out);
            break;
          case BenchOp::kStandardConv:
            (void)conv.forward(input, kernel, bias);
            break;
        }
      };
      if (op == BenchOp::kAnchorConvBackward) (void)ac.forward(input, {kernel, bias}, ones);
      for (int i = 0; i < warmup; ++i) once();
      std::vector<double> samples;
      for (int i = 0; i < repetitions; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        once();
        samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      const auto st = summarize(samples);
      rows.push_back({op, channels, size, repetitions, st.median, st.p10, st.p90,
                      std::string(simd::level_name(simd::active_level()))});
    }
  }
  return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::ostringstream ss;
  ss.precision(6);
  ss << "op,channels,size,repetitions,median_ms,p10_ms,p90_ms,simd\n";
  for (const auto& r : rows) {
    ss << bench_op_name(r.op) << ',' << r.channels << ',' << r.size << ',' << r.repetitions << ',' << r.median_ms
       << ',' << r.p10_ms << ',' << r.p90_ms << ',' << r.simd_level << '\n';
  }
  return ss.str();
}

std::pair<double, double> write_heatmap(const std::string& path, const Tensor<double>& map, int upscale) {
  SADET_CHECK(map.rank() == 2, "write_heatmap: map must be H x W");
  SADET_CHECK(upscale >= 1, "write_heatmap: upscale must be positive");
  const auto vals = map.values();
  const double lo = *std::min_element(vals.begin(), vals.end()), hi = *std::max_element(vals.begin(), vals.end());
  synth::Image img;
  img.height = static_cast<int>(map.dim(0)) * upscale;
  img.width = static_cast<int>(map.dim(1)) * upscale;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = map(y / upscale, x / upscale);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      const auto g = static_cast<std::uint8_t>(std::lround(255 * t));
      for (int c = 0; c < 3; ++c) img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = g;
    }
  }
  synth::write_ppm(path, img);
  return {lo, hi};
}

synth::Image draw_boxes(const synth::Image& image, std::span<const Box> boxes) {
  synth::Image out = image;
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    auto* p = &out.rgb[(static_cast<std::size_t>(y) * out.width + x) * 3];
    p[0] = 0;
    p[1] = 255;
    p[2] = 0;
  };
  for (const auto& b : boxes) {
    const int x0 = static_cast<int>(std::lround(b.left())), x1 = static_cast<int>(std::lround(b.right())) - 1;
    const int y0 = static_cast<int>(std::lround(b.top())), y1 = static_cast<int>(std::lround(b.bottom())) - 1;
    for (int x = x0; x <= x1; ++x) {
      put(x, y0);
      put(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
      put(x0, y);
      put(x1, y);
    }
  }
  return out;
}

template ScaleCorrelationReport scale_correlation(net::Model<float>&, const TrainConfig&,
                                                  std::span<const synth::Scene>, int);
template ScaleCorrelationReport scale_correlation(net::Model<double>&, const TrainConfig&,
                                                  std::span<const synth::Scene>, int);
template std::vector<std::vector<Detection>> detect_all(net::Model<float>&, const TrainConfig&,
                                                        std::span<const synth::Scene>);
template std::vector<std::vector<Detection>> detect_all(net::Model<double>&, const TrainConfig&,
                                                        std::span<const synth::Scene>);

}  // namespace sadet::eval
