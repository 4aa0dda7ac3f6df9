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

// Deterministic synthetic scenes of elongated "text-like" bars with tight
// ground-truth boxes, plus PPM and dataset-directory IO.

#include <cstdint>
#include <string>
#include <vector>

#include "sadet/config.hpp"
#include "sadet/geometry.hpp"
#include "sadet/tensor.hpp"

namespace sadet::synth {

struct SceneSpec {
  int width = 64;
  int height = 64;
  int min_objects = 1;
  int max_objects = 4;
  double min_width = 8;  // bar width in pixels, drawn log-uniformly
  double max_width = 48;
  double min_aspect = 2;  // width / height
  double max_aspect = 4;
  int min_height = 3;
  int min_gap = 2;  // free pixels kept between bars
  BackgroundStyle background = BackgroundStyle::kMixed;
  GlyphStyle glyph = GlyphStyle::kMixed;
  double noise = 0.03;
  std::uint64_t seed = 1;
  int max_retries = 200;

  void validate() const;
  std::uint64_t hash() const;

  static SceneSpec from_config(const TrainConfig& config, std::uint64_t seed);
};

// 8-bit interleaved RGB, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  // 3 x H x W tensor of value/255.
  template <typename T>
  Tensor<T> to_tensor() const;

  friend bool operator==(const Image&, const Image&) = default;
};

struct SceneMeta {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  std::uint64_t spec_hash = 0;
  int requested = 0;  // objects asked for
  int placed = 0;     // objects actually placed

  friend bool operator==(const SceneMeta&, const SceneMeta&) = default;
};

struct Scene {
  Image image;
  std::vector<geometry::Box> gts;
  SceneMeta meta;
};

Scene generate_scene(const SceneSpec& spec, std::uint64_t index);

void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);
// Parses PPM bytes; `source` names them in errors.
Image parse_ppm(const std::string& bytes, const std::string& source);

// Writes scene_NNNNNN.ppm / scene_NNNNNN.txt pairs and a manifest.txt.
void write_dataset(const std::string& dir, const std::vector<Scene>& scenes);
// A missing manifest in an existing directory is an empty dataset.
std::vector<Scene> read_dataset(const std::string& dir);

}  // namespace sadet::synth
