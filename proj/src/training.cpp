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

#include "sadet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sadet/binio.hpp"
#include "sadet/error.hpp"
#include "sadet/layers.hpp"

namespace sadet::net {
namespace fs = std::filesystem;
namespace {

template <typename T>
void write_named(std::ostream& os, const std::vector<NamedTensor<T>>& tensors) {
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    binio::put_string(os, t.name);
    write_tensor(os, t.value);
  }
}

template <typename T>
std::vector<NamedTensor<T>> read_named(std::istream& is, const std::string& source) {
  const auto at = static_cast<std::uint64_t>(is.tellg());
  const auto n = binio::get<std::uint32_t>(is, source);
  if (n > 4096) throw ParseError(source, at, "implausible tensor count " + std::to_string(n));
  std::vector<NamedTensor<T>> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = binio::get_string(is, source, 4096);
    out.push_back({std::move(name), read_tensor<T>(is, source)});
  }
  return out;
}


}  // namespace

template <typename T>
void write_checkpoint(std::ostream& os, const Checkpoint<T>& c) {
  os.write("SADC", 4);
  binio::put<std::uint32_t>(os, kCheckpointVersion);
  binio::put_string(os, c.config.to_text());
  write_named(os, c.params);
  write_named(os, c.momentum);
  binio::put<std::uint64_t>(os, c.iteration);
  binio::put_string(os, c.rng_state);
}

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  write_checkpoint(out, c);
  if (!out) throw IoError("write failed: " + path);
}

namespace {

TrainConfig read_header(std::istream& is, const std::string& source) {
  binio::expect_magic(is, source, "SADC");
  const auto at = static_cast<std::uint64_t>(is.tellg());
  const auto version = binio::get<std::uint32_t>(is, source);
  if (version != kCheckpointVersion) {
    throw ParseError(source, at, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_at = static_cast<std::uint64_t>(is.tellg());
  const auto text = binio::get_string(is, source);
  try {
    return parse_config(text, source + " (config snapshot)");
  } catch (const ConfigError& e) {
    throw ParseError(source, config_at, e.what());
  }
}

}  // namespace

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& is, const std::string& source) {
  Checkpoint<T> c;
  c.config = read_header(is, source);
  c.params = read_named<T>(is, source);
  c.momentum = read_named<T>(is, source);
  c.iteration = binio::get<std::uint64_t>(is, source);
  c.rng_state = binio::get_string(is, source);
  return c;
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint<T>(in, path);
}

TrainConfig checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_header(in, path);
}

template <typename T>
void load_params(Model<T>& model, const std::vector<NamedTensor<T>>& params) {
  auto& dst = model.params();
  if (params.size() != dst.size()) {
    throw InvalidArgument("checkpoint has " + std::to_string(params.size()) + " tensors, model expects " +
                          std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (params[i].name != dst[i].name || !params[i].value.same_shape(dst[i].value)) {
      throw InvalidArgument("checkpoint tensor '" + params[i].name + "' does not match model tensor '" +
                            dst[i].name + "'");
    }
    dst[i].value = params[i].value;
  }
}

SceneSource SceneSource::generated(const synth::SceneSpec& spec) {
  spec.validate();
  SceneSource s;
  s.generated_ = true;
  s.spec_ = spec;
  return s;
}

SceneSource SceneSource::dataset(std::vector<synth::Scene> scenes) {
  SceneSource s;
  s.scenes_ = std::move(scenes);
  return s;
}

SceneSource SceneSource::from_config(const TrainConfig& config) {
  const auto spec = synth::SceneSpec::from_config(config, config.seed);
  if (config.train_scenes == 0) return generated(spec);
  std::vector<synth::Scene> scenes;
  for (int i = 0; i < config.train_scenes; ++i) scenes.push_back(synth::generate_scene(spec, i));
  return dataset(std::move(scenes));
}

synth::Scene SceneSource::draw(std::mt19937_64& rng) const {
  if (generated_) return synth::generate_scene(spec_, rng());
  if (scenes_.empty()) throw InvalidArgument("training dataset is empty");
  return scenes_[rng() % scenes_.size()];
}

std::string loss_csv_header() { return "iteration,total,conf,loc,n_matched"; }

std::string loss_csv_row(const LossRecord& r) {
  std::ostringstream ss;
  ss.precision(17);
  ss << r.iteration << ',' << r.total << ',' << r.conf << ',' << r.loc << ',' << r.n_matched;
  return ss.str();
}

template <typename T>
Trainer<T>::Trainer(const TrainConfig& config, SceneSource source)
    : config_(config), source_(std::move(source)), model_(config), rng_(config.seed) {
  config_.validate();
  if (source_.empty()) throw InvalidArgument("training dataset is empty");
  model_.initialize(config.seed ^ 0x5eed5eed5eedull);
  for (const auto& p : model_.params()) momentum_.emplace_back(p.value.shape());
}

template <typename T>
Trainer<T>::Trainer(const Checkpoint<T>& ckpt, SceneSource source)
    : config_(ckpt.config), source_(std::move(source)), model_(ckpt.config) {
  if (source_.empty()) throw InvalidArgument("training dataset is empty");
  load_params(model_, ckpt.params);
  if (ckpt.momentum.size() != model_.params().size()) throw InvalidArgument("checkpoint optimizer state is incomplete");
  for (std::size_t i = 0; i < ckpt.momentum.size(); ++i) {
    if (!ckpt.momentum[i].value.same_shape(model_.params()[i].value)) {
      throw InvalidArgument("checkpoint momentum '" + ckpt.momentum[i].name + "' has the wrong shape");
    }
    momentum_.push_back(ckpt.momentum[i].value);
  }
  std::istringstream rs(ckpt.rng_state);
  rs >> rng_;
  if (!rs) throw InvalidArgument("checkpoint RNG state is malformed");
  iteration_ = static_cast<int>(ckpt.iteration);
}

template <typename T>
Checkpoint<T> Trainer<T>::checkpoint() const {
  Checkpoint<T> c;
  c.config = config_;
  c.params = model_.params();
  for (std::size_t i = 0; i < momentum_.size(); ++i) c.momentum.push_back({model_.params()[i].name, momentum_[i]});
  c.iteration = static_cast<std::uint64_t>(iteration_);
  std::ostringstream rs;
  rs << rng_;
  c.rng_state = rs.str();
  return c;
}

template <typename T>
const std::vector<geometry::AnchorBox>& Trainer<T>::anchors(int map_h, int map_w) {
  if (map_h != anchor_h_ || map_w != anchor_w_) {
    anchors_ = anchors_for(config_, map_h, map_w);
    anchor_h_ = map_h;
    anchor_w_ = map_w;
  }
  return anchors_;
}

template <typename T>
void Trainer<T>::abort_batch(const std::vector<synth::Scene>& batch, const std::string& why) {
  std::string where;
  if (!dump_dir.empty()) {
    const auto dir = (fs::path(dump_dir) / ("nan_iteration_" + std::to_string(iteration_))).string();
    synth::write_dataset(dir, batch);
    std::ofstream report(fs::path(dir) / "report.txt");
    report << "iteration " << iteration_ << "\nreason: " << why << "\nlr: " << learning_rate(config_, iteration_)
           << "\n";
    for (const auto& s : batch) report << "scene index " << s.meta.index << " gts " << s.gts.size() << "\n";
    where = "; batch written to " + dir;
  }
  throw NumericError("iteration " + std::to_string(iteration_) + ": " + why + where);
}

template <typename T>
LossRecord Trainer<T>::step() {
  model_.zero_grad();
  std::vector<synth::Scene> batch;
  for (int b = 0; b < config_.batch_size; ++b) batch.push_back(source_.draw(rng_));

  LossRecord rec;
  rec.iteration = iteration_;
  const double inv_batch = 1.0 / config_.batch_size;
  const LossOptions options = LossOptions::from_config(config_);
  const ScalePaths paths{config_.scale_grad_anchor, config_.scale_grad_conv, {}, config_.scale_raw_decay};
  try {
    for (const auto& scene : batch) {
      auto fwd = model_.forward(scene.image.to_tensor<T>(), config_.freeze_scale);
      const auto& a = anchors(static_cast<int>(fwd.scale.value.dim(0)), static_cast<int>(fwd.scale.value.dim(1)));
      auto loss = compute_loss(fwd.head, fwd.scale, a, scene.gts, options);
      const auto& br = loss.breakdown;
      const double norm = br.n_matched > 0 ? 1.0 / br.n_matched : 1.0 / a.size();
      rec.total += br.total * inv_batch;
      rec.conf += br.conf_term * norm * inv_batch;
      rec.loc += br.beta * br.loc_term * norm * inv_batch;
      rec.n_matched += br.n_matched;
      if (config_.batch_size > 1) {
        const T k = static_cast<T>(inv_batch);
        loss.grad.conf = scale(loss.grad.conf, k);
        loss.grad.loc = scale(loss.grad.loc, k);
        loss.grad_scale = scale(loss.grad_scale, k);
      }
      std::vector<std::uint8_t> cells;
      ScalePaths p = paths;
      if (config_.scale_conv_positive_only) {
        cells.assign(fwd.scale.value.size(), 0);
        for (const auto& m : loss.matches) {
          if (m.positive) cells[m.anchor_index / config_.aspect_ratios.size()] = 1;
        }
        p.conv_cells = cells;
      }
      model_.backward(fwd.scale, loss.grad, loss.grad_scale, p);
    }
  } catch (const NumericError& e) {
    abort_batch(batch, e.what());
  }

  double sq = 0;
  for (const auto& g : model_.grads()) {
    for (T v : g.value.values()) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  if (!std::isfinite(sq)) abort_batch(batch, "non-finite gradient");
  if (config_.grad_clip > 0 && std::sqrt(sq) > config_.grad_clip) {
    const T k = static_cast<T>(config_.grad_clip / std::sqrt(sq));
    for (auto& g : model_.grads()) g.value = scale(g.value, k);
  }

  const SgdOptions sgd{learning_rate(config_, iteration_), config_.momentum, config_.weight_decay};
  SgdOptions scale_sgd = sgd;
  scale_sgd.lr *= config_.scale_lr_mult;
  for (std::size_t i = 0; i < momentum_.size(); ++i) {
    const bool is_scale = model_.params()[i].name.starts_with("scale.");
    sgd_step(model_.params()[i].value, model_.grads()[i].value, momentum_[i], is_scale ? scale_sgd : sgd);
  }
  ++iteration_;
  return rec;
}

template <typename T>
std::vector<LossRecord> run_training(Trainer<T>& trainer, const RunOptions& options) {
  const auto& config = trainer.config();
  std::ofstream csv;
  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create " + options.out_dir + ": " + ec.message());
    const auto path = fs::path(options.out_dir) / "loss.csv";
    csv.open(path);
    if (!csv) throw IoError("cannot write " + path.string());
    csv << loss_csv_header() << '\n';
    if (trainer.dump_dir.empty()) trainer.dump_dir = options.out_dir;
  }
  auto save = [&](const std::string& name) {
    if (!options.out_dir.empty()) save_checkpoint((fs::path(options.out_dir) / name).string(), trainer.checkpoint());
  };

  std::vector<LossRecord> records;
  while (trainer.iteration() < config.iterations) {
    const auto rec = trainer.step();
    records.push_back(rec);
    if (csv.is_open()) csv << loss_csv_row(rec) << '\n';
    if (options.on_log && (rec.iteration % config.log_every == 0 || trainer.iteration() == config.iterations)) {
      options.on_log(rec);
    }
    if (config.checkpoint_every > 0 && trainer.iteration() % config.checkpoint_every == 0 &&
        trainer.iteration() < config.iterations) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_%06d.sadc", trainer.iteration());
      save(name);
    }
  }
  save("final.sadc");
  if (csv.is_open() && !csv) throw IoError("write failed: loss.csv");
  return records;
}

template <typename T>
std::vector<geometry::Detection> detect_at(Model<T>& model, const TrainConfig& config, const Tensor<T>& image,
                                           double factor) {
  SADET_CHECK(image.rank() == 3 && image.dim(0) == 3, "infer: image must be 3 x H x W");
  SADET_CHECK(factor > 0, "infer: resolution factor must be positive");
  const auto H = image.dim(1), W = image.dim(2);
  const int rh = std::max<int>(kStride, static_cast<int>(std::lround(static_cast<double>(H) * factor)));
  const int rw = std::max<int>(kStride, static_cast<int>(std::lround(static_cast<double>(W) * factor)));
  const auto fwd = model.forward(layers::resize_bilinear(image, rh, rw), config.freeze_scale);
  const auto mh = fwd.scale.value.dim(0), mw = fwd.scale.value.dim(1);
  const auto anchors = anchors_for(config, static_cast<int>(mh), static_cast<int>(mw));
  const double sx = static_cast<double>(W) / rw, sy = static_cast<double>(H) / rh;
  const std::int64_t plane = mh * mw;

  std::vector<geometry::Detection> out;
  for (const auto& a : anchors) {
    const std::int64_t cell = static_cast<std::int64_t>(a.grid_row) * mw + a.grid_col, r = a.ratio_index;
    const double l0 = fwd.head.conf[static_cast<std::size_t>(2 * r * plane + cell)];
    const double l1 = fwd.head.conf[static_cast<std::size_t>((2 * r + 1) * plane + cell)];
    const double score = 1.0 / (1.0 + std::exp(l0 - l1));
    if (!(score > config.conf_thresh)) continue;
    const auto base = static_cast<std::size_t>(4 * r * plane + cell);
    const geometry::Offsets off{fwd.head.loc[base], fwd.head.loc[base + plane], fwd.head.loc[base + 2 * plane],
                                fwd.head.loc[base + 3 * plane]};
    const auto dec = geometry::decode_box(geometry::apply_scale(a, fwd.scale.value[cell]), off);
    const auto box = geometry::clip_box({dec.x * sx, dec.y * sy, dec.w * sx, dec.h * sy}, W, H);
    if (box.w > 0 && box.h > 0) out.push_back({box, score});
  }
  return out;
}

template <typename T>
std::vector<geometry::Detection> infer(Model<T>& model, const TrainConfig& config, const Tensor<T>& image) {
  std::vector<geometry::Detection> all;
  for (double f : config.resolutions) {
    const auto d = detect_at(model, config, image, f);
    all.insert(all.end(), d.begin(), d.end());
  }
  return geometry::nms(all, config.nms_thresh);
}

template <typename T>
Tensor<T> predict_scale_map(Model<T>& model, const TrainConfig& config, const Tensor<T>& image) {
  return model.forward(image, config.freeze_scale).scale.value;
}

#define SADET_INSTANTIATE(T)                                                                                 \
  template void write_checkpoint(std::ostream&, const Checkpoint<T>&);                                      \
  template void save_checkpoint(const std::string&, const Checkpoint<T>&);                                  \
  template Checkpoint<T> read_checkpoint<T>(std::istream&, const std::string&);                             \
  template Checkpoint<T> load_checkpoint<T>(const std::string&);                                            \
  template void load_params(Model<T>&, const std::vector<NamedTensor<T>>&);                                 \
  template class Trainer<T>;                                                                                \
  template std::vector<LossRecord> run_training(Trainer<T>&, const RunOptions&);                            \
  template std::vector<geometry::Detection> detect_at(Model<T>&, const TrainConfig&, const Tensor<T>&, double); \
  template std::vector<geometry::Detection> infer(Model<T>&, const TrainConfig&, const Tensor<T>&);          \
  template Tensor<T> predict_scale_map(Model<T>&, const TrainConfig&, const Tensor<T>&);

SADET_INSTANTIATE(float)
SADET_INSTANTIATE(double)

}  // namespace sadet::net
