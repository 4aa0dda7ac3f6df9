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

// Run configuration: flat `key = value` text with `#` comments. Every key
// has a default; unknown keys and malformed values are errors.

#include <cstdint>
#include <string>
#include <vector>

#include "sadet/tensor.hpp"

namespace sadet {

enum class BackgroundStyle { kFlat, kGradient, kNoise, kMixed };
enum class GlyphStyle { kSolid, kStriped, kMixed };

struct TrainConfig {
  std::uint64_t seed = 1;
  Precision precision = Precision::kF32;
  int image_size = 64;
  int iterations = 5000;
  int batch_size = 4;

  double lr_initial = 1e-3;
  double lr_decayed = 1e-4;
  int lr_decay_iteration = 4000;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double grad_clip = 0;  // global L2 norm; 0 disables

  double beta = 1.0;
  double neg_weight = 0.125;
  double pos_iou = 0.5;

  double alpha = 0.5;
  int head_kernel_w = 5;
  double base_size = 16;
  std::vector<double> aspect_ratios{2.0, 3.0, 4.0};
  std::vector<int> backbone_channels{16, 32, 32, 32};

  bool scale_grad_anchor = true;
  bool scale_grad_conv = true;
  // Convolution-path scale gradient only at cells holding a positive anchor.
  bool scale_conv_positive_only = true;
  double scale_raw_decay = 0.01;  // L2 pull of the raw scale z toward 0 (s toward 1)
  bool freeze_scale = false;
  double scale_max = 0;  // upper scale clamp; 0 means the larger image dimension
  double scale_lr_mult = 1.0;  // learning-rate multiplier for the scale layer
  int scale_kernel_h = 3;
  int scale_kernel_w = 3;
  int scale_dilation = 1;

  int scene_min_objects = 1;
  int scene_max_objects = 4;
  double scene_min_width = 8;
  double scene_max_width = 48;
  double scene_min_aspect = 2;
  double scene_max_aspect = 4;
  int scene_min_height = 3;
  int scene_min_gap = 2;
  BackgroundStyle scene_background = BackgroundStyle::kMixed;
  GlyphStyle scene_glyph = GlyphStyle::kMixed;
  double scene_noise = 0.03;

  int train_scenes = 0;  // 0: a fresh scene for every draw
  int test_scenes = 100;
  std::uint64_t test_seed = 1000003;

  double conf_thresh = 0.5;
  double nms_thresh = 0.3;
  std::vector<double> resolutions{1.0, 1.5};
  double eval_iou = 0.5;

  int log_every = 10;
  int checkpoint_every = 1000;

  // Throws ConfigError naming the offending key.
  void validate() const;

  // Sets one key from its textual value; throws ConfigError on unknown keys
  // or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Canonical text form; parse_config(to_text()) reproduces the config.
  std::string to_text() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// `source` names the text in error messages (file path or "<string>").
TrainConfig parse_config(const std::string& text, const std::string& source = "<string>");
TrainConfig load_config(const std::string& path);

// Applies `key=value` overrides in order.
void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides);

}  // namespace sadet
