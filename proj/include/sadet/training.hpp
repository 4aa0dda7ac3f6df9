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

// Checkpoints, the SGD training loop, and multi-resolution inference.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "sadet/config.hpp"
#include "sadet/geometry.hpp"
#include "sadet/network.hpp"
#include "sadet/synthdata.hpp"

namespace sadet::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  TrainConfig config;
  std::vector<NamedTensor<T>> params;
  std::vector<NamedTensor<T>> momentum;
  std::uint64_t iteration = 0;
  std::string rng_state;  // textual std::mt19937_64 state
};

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt);
template <typename T>
void write_checkpoint(std::ostream& os, const Checkpoint<T>& ckpt);
// Tensors are converted to T if they were stored at another precision.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);
template <typename T>
Checkpoint<T> read_checkpoint(std::istream& is, const std::string& source);
// Reads only the config snapshot, e.g. to pick the precision.
TrainConfig checkpoint_config(const std::string& path);

// Copies checkpoint parameters into a model built from its config.
template <typename T>
void load_params(Model<T>& model, const std::vector<NamedTensor<T>>& params);

// Where training scenes come from: a fixed dataset, or fresh generated
// scenes whose index is drawn from the trainer's generator.
class SceneSource {
 public:
  static SceneSource generated(const synth::SceneSpec& spec);
  static SceneSource dataset(std::vector<synth::Scene> scenes);
  static SceneSource from_config(const TrainConfig& config);

  synth::Scene draw(std::mt19937_64& rng) const;
  bool empty() const { return !generated_ && scenes_.empty(); }

 private:
  bool generated_ = false;
  synth::SceneSpec spec_;
  std::vector<synth::Scene> scenes_;
};

struct LossRecord {
  int iteration = 0;
  double total = 0;  // batch means; total == conf + loc
  double conf = 0;
  double loc = 0;
  std::int64_t n_matched = 0;  // summed over the batch
};

std::string loss_csv_header();
std::string loss_csv_row(const LossRecord& r);

template <typename T>
class Trainer {
 public:
  Trainer(const TrainConfig& config, SceneSource source);
  Trainer(const Checkpoint<T>& ckpt, SceneSource source);

  // One SGD iteration. On a non-finite loss or gradient the offending batch
  // is written under dump_dir (if set) and NumericError is thrown.
  LossRecord step();

  Checkpoint<T> checkpoint() const;
  Model<T>& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  int iteration() const { return iteration_; }

  std::string dump_dir;

 private:
  const std::vector<geometry::AnchorBox>& anchors(int map_h, int map_w);
  [[noreturn]] void abort_batch(const std::vector<synth::Scene>& batch, const std::string& why);

  TrainConfig config_;
  SceneSource source_;
  Model<T> model_;
  std::vector<Tensor<T>> momentum_;
  std::mt19937_64 rng_;
  int iteration_ = 0;
  int anchor_h_ = -1, anchor_w_ = -1;
  std::vector<geometry::AnchorBox> anchors_;
};

struct RunOptions {
  std::string out_dir;  // empty: write nothing
  std::function<void(const LossRecord&)> on_log;
};

// Trains up to config.iterations, logging every log.every iterations and
// checkpointing every checkpoint.every iterations plus at the end. Returns
// the loss of every iteration run.
template <typename T>
std::vector<LossRecord> run_training(Trainer<T>& trainer, const RunOptions& options);


// Detections at one resize factor, in original image pixels, before NMS.
template <typename T>
std::vector<geometry::Detection> detect_at(Model<T>& model, const TrainConfig& config, const Tensor<T>& image,
                                           double factor);

// Union over config.resolutions, then NMS.
template <typename T>
std::vector<geometry::Detection> infer(Model<T>& model, const TrainConfig& config, const Tensor<T>& image);

// Scale map of the native-resolution forward pass.
template <typename T>
Tensor<T> predict_scale_map(Model<T>& model, const TrainConfig& config, const Tensor<T>& image);

}  // namespace sadet::net
