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

// The detector: a small convolutional backbone, a one-channel scale
// regression layer, and classification/regression heads built on Anchor
// convolution. Training-side pieces (loss, SGD) live here as well.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sadet/anchorconv.hpp"
#include "sadet/config.hpp"
#include "sadet/geometry.hpp"
#include "sadet/layers.hpp"
#include "sadet/tensor.hpp"

namespace sadet::net {

inline constexpr int kStride = 4;

template <typename T>
struct ScaleMap {
  Tensor<T> raw;    // z, H x W
  Tensor<T> value;  // s = clamp(exp(z), 1/s_max, s_max)
  Tensor<T> grad;   // d(loss)/ds from the anchor and convolution paths
};

template <typename T>
struct DetectionHeadOutput {
  Tensor<T> conf;  // 2*N_c x H x W; channel 2r is background, 2r+1 text
  Tensor<T> loc;   // 4*N_c x H x W; channel 4r+k holds dx, dy, dw, dh
};

struct LossBreakdown {
  double total = 0;
  double conf_term = 0;  // weighted cross-entropy sum
  double loc_term = 0;   // smooth-L1 sum over positives
  std::int64_t n_matched = 0;
  double beta = 1;
  double neg_weight = 1;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
};

// Which contributions reach the scale regression layer.
struct ScalePaths {
  bool anchor = true;
  bool conv = true;
  // When non-empty, the convolution path reaches only cells whose entry is
  // nonzero (one entry per scale-map cell).
  std::span<const std::uint8_t> conv_cells;
  // Adds raw_decay * z to d(loss)/dz at every cell.
  double raw_decay = 0;
};

template <typename T>
class Model {
 public:
  // Parameters are zero until initialize() or load_params().
  explicit Model(const TrainConfig& config);

  void initialize(std::uint64_t seed);

  int num_ratios() const { return num_ratios_; }
  int feature_channels() const { return channels_.back(); }

  std::vector<NamedTensor<T>>& params() { return params_; }
  const std::vector<NamedTensor<T>>& params() const { return params_; }
  std::vector<NamedTensor<T>>& grads() { return grads_; }
  Tensor<T>& param(const std::string& name);
  void zero_grad();

  // Stage-wise forward. Each stage keeps what its backward needs.
  Tensor<T> backbone_forward(const Tensor<T>& image);
  ScaleMap<T> scale_regression(const Tensor<T>& features, double s_max, bool freeze);
  // s = clamp(exp(raw), 1/s_max, s_max); exposed for tests and gradient checks.
  static ScaleMap<T> activate(const Tensor<T>& raw, double s_max);
  DetectionHeadOutput<T> detection_head(const Tensor<T>& features, const ScaleMap<T>& scale);

  struct Forward {
    Tensor<T> features;
    ScaleMap<T> scale;
    DetectionHeadOutput<T> head;
  };
  // freeze: s = 1 everywhere and the scale layer is bypassed.
  Forward forward(const Tensor<T>& image, bool freeze);

  // Backpropagates the last forward(), accumulating into grads(). Fills
  // scale.grad with the combined d(loss)/ds and returns d(loss)/d(raw).
  Tensor<T> backward(ScaleMap<T>& scale, const DetectionHeadOutput<T>& grad_head,
                     const Tensor<T>& grad_scale_anchor, ScalePaths paths);

 private:
  enum Slot { kConv1, kConv2 = 2, kConv3 = 4, kConv4 = 6, kScale = 8, kConf = 10, kLoc = 12, kSlots = 14 };

  std::vector<int> channels_;
  double scale_cap_ = 0;
  int num_ratios_ = 0;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> grads_;

  std::vector<layers::Conv2d<T>> convs_;
  std::vector<layers::Relu<T>> relus_;
  std::vector<layers::MaxPool2<T>> pools_;
  layers::Conv2d<T> scale_conv_;
  anchorconv::AnchorConv<T> conf_conv_;
  anchorconv::AnchorConv<T> loc_conv_;
  bool frozen_ = false;
  double s_max_ = 0;
};

struct LossOptions {
  double beta = 1;
  double neg_weight = 0.125;
  double pos_iou = 0.5;

  static LossOptions from_config(const TrainConfig& config);
};

template <typename T>
struct LossResult {
  LossBreakdown breakdown;
  DetectionHeadOutput<T> grad;  // d(total)/d(head)
  Tensor<T> grad_scale;         // anchor-path d(total)/ds, H x W
  std::vector<geometry::MatchAssignment> matches;
};

// Anchors must be in generate_initial_anchors order for the head's map.
// Matching uses the current scales but passes no gradient through the
// assignment. Localization residuals are measured in units of the initial
// anchor size, so at s = 1 they equal the encode_box target differences.
template <typename T>
LossResult<T> compute_loss(const DetectionHeadOutput<T>& head, const ScaleMap<T>& scale,
                           std::span<const geometry::AnchorBox> anchors, std::span<const geometry::Box> gts,
                           const LossOptions& options);

double smooth_l1(double r);

std::vector<geometry::AnchorBox> anchors_for(const TrainConfig& config, int map_h, int map_w);

struct SgdOptions {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// v <- momentum*v + g + weight_decay*w; w <- w - lr*v
template <typename T>
void sgd_step(Tensor<T>& w, const Tensor<T>& g, Tensor<T>& v, const SgdOptions& options);

double learning_rate(const TrainConfig& config, int iteration);

}  // namespace sadet::net
