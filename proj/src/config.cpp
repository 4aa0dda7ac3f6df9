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

#include "sadet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sadet/error.hpp"

namespace sadet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + want);
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  N out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "a number");
  if constexpr (std::is_floating_point_v<N>) {
    if (!std::isfinite(out)) bad_value(key, value, "a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, "a boolean");
}

template <typename N>
std::vector<N> parse_list(const std::string& key, const std::string& value) {
  std::vector<N> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<N>(key, item));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename N>
std::string fmt_list(const std::vector<N>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<N>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename N>
Field number(N TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<N>(k, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<N>) {
              return fmt(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field boolean(bool TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <typename N>
Field list(std::vector<N> TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_list<N>(k, v); },
          [member](const TrainConfig& c) { return fmt_list(c.*member); }};
}

template <typename E>
Field choice(E TrainConfig::*member, std::vector<std::pair<std::string, E>> names) {
  return {[member, names](TrainConfig& c, const std::string& k, const std::string& v) {
            for (const auto& [name, e] : names) {
              if (name == trim(v)) {
                c.*member = e;
                return;
              }
            }
            bad_value(k, v, "one of the known names");
          },
          [member, names](const TrainConfig& c) {
            for (const auto& [name, e] : names) {
              if (e == c.*member) return name;
            }
            return std::string("?");
          }};
}

// Ordered so that to_text() groups related keys.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", number(&TrainConfig::seed)},
      {"precision", choice(&TrainConfig::precision, {{"32", Precision::kF32}, {"64", Precision::kF64}})},
      {"image_size", number(&TrainConfig::image_size)},
      {"iterations", number(&TrainConfig::iterations)},
      {"batch_size", number(&TrainConfig::batch_size)},
      {"lr.initial", number(&TrainConfig::lr_initial)},
      {"lr.decayed", number(&TrainConfig::lr_decayed)},
      {"lr.decay_iteration", number(&TrainConfig::lr_decay_iteration)},
      {"sgd.momentum", number(&TrainConfig::momentum)},
      {"sgd.weight_decay", number(&TrainConfig::weight_decay)},
      {"sgd.grad_clip", number(&TrainConfig::grad_clip)},
      {"loss.beta", number(&TrainConfig::beta)},
      {"loss.neg_weight", number(&TrainConfig::neg_weight)},
      {"loss.pos_iou", number(&TrainConfig::pos_iou)},
      {"head.alpha", number(&TrainConfig::alpha)},
      {"head.kernel_w", number(&TrainConfig::head_kernel_w)},
      {"anchor.base_size", number(&TrainConfig::base_size)},
      {"anchor.ratios", list(&TrainConfig::aspect_ratios)},
      {"backbone.channels", list(&TrainConfig::backbone_channels)},
      {"scale.grad_anchor", boolean(&TrainConfig::scale_grad_anchor)},
      {"scale.grad_conv", boolean(&TrainConfig::scale_grad_conv)},
      {"scale.conv_positive_only", boolean(&TrainConfig::scale_conv_positive_only)},
      {"scale.raw_decay", number(&TrainConfig::scale_raw_decay)},
      {"scale.freeze", boolean(&TrainConfig::freeze_scale)},
      {"scale.max", number(&TrainConfig::scale_max)},
      {"scale.lr_mult", number(&TrainConfig::scale_lr_mult)},
      {"scale.kernel_h", number(&TrainConfig::scale_kernel_h)},
      {"scale.kernel_w", number(&TrainConfig::scale_kernel_w)},
      {"scale.dilation", number(&TrainConfig::scale_dilation)},
      {"scene.min_objects", number(&TrainConfig::scene_min_objects)},
      {"scene.max_objects", number(&TrainConfig::scene_max_objects)},
      {"scene.min_width", number(&TrainConfig::scene_min_width)},
      {"scene.max_width", number(&TrainConfig::scene_max_width)},
      {"scene.min_aspect", number(&TrainConfig::scene_min_aspect)},
      {"scene.max_aspect", number(&TrainConfig::scene_max_aspect)},
      {"scene.min_height", number(&TrainConfig::scene_min_height)},
      {"scene.min_gap", number(&TrainConfig::scene_min_gap)},
      {"scene.background",
       choice(&TrainConfig::scene_background, {{"flat", BackgroundStyle::kFlat},
                                               {"gradient", BackgroundStyle::kGradient},
                                               {"noise", BackgroundStyle::kNoise},
                                               {"mixed", BackgroundStyle::kMixed}})},
      {"scene.glyph", choice(&TrainConfig::scene_glyph, {{"solid", GlyphStyle::kSolid},
                                                         {"striped", GlyphStyle::kStriped},
                                                         {"mixed", GlyphStyle::kMixed}})},
      {"scene.noise", number(&TrainConfig::scene_noise)},
      {"data.train_scenes", number(&TrainConfig::train_scenes)},
      {"data.test_scenes", number(&TrainConfig::test_scenes)},
      {"data.test_seed", number(&TrainConfig::test_seed)},
      {"infer.conf_thresh", number(&TrainConfig::conf_thresh)},
      {"infer.nms_thresh", number(&TrainConfig::nms_thresh)},
      {"infer.resolutions", list(&TrainConfig::resolutions)},
      {"eval.iou", number(&TrainConfig::eval_iou)},
      {"log.every", number(&TrainConfig::log_every)},
      {"checkpoint.every", number(&TrainConfig::checkpoint_every)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError("key '" + key + "': " + why);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

void TrainConfig::validate() const {
  require(image_size >= 8, "image_size", "must be at least 8");
  require(iterations >= 0, "iterations", "must be non-negative");
  require(batch_size >= 1, "batch_size", "must be positive");
  require(lr_initial > 0, "lr.initial", "must be positive");
  require(lr_decayed > 0, "lr.decayed", "must be positive");
  require(lr_decay_iteration >= 0, "lr.decay_iteration", "must be non-negative");
  require(momentum >= 0 && momentum < 1, "sgd.momentum", "must be in [0, 1)");
  require(weight_decay >= 0, "sgd.weight_decay", "must be non-negative");
  require(grad_clip >= 0, "sgd.grad_clip", "must be non-negative");
  require(scale_max == 0 || scale_max >= 1, "scale.max", "must be 0 or at least 1");
  require(scale_raw_decay >= 0, "scale.raw_decay", "must be non-negative");
  require(scale_lr_mult >= 0, "scale.lr_mult", "must be non-negative");
  require(scale_kernel_h >= 1 && scale_kernel_h % 2 == 1, "scale.kernel_h", "must be a positive odd number");
  require(scale_kernel_w >= 1 && scale_kernel_w % 2 == 1, "scale.kernel_w", "must be a positive odd number");
  require(scale_dilation >= 1, "scale.dilation", "must be positive");
  require(beta >= 0, "loss.beta", "must be non-negative");
  require(neg_weight > 0, "loss.neg_weight", "must be positive");
  require(pos_iou > 0 && pos_iou <= 1, "loss.pos_iou", "must be in (0, 1]");
  require(alpha >= 0 && alpha <= 1, "head.alpha", "must be in [0, 1]");
  require(head_kernel_w >= 1 && head_kernel_w % 2 == 1, "head.kernel_w", "must be a positive odd number");
  require(base_size > 0, "anchor.base_size", "must be positive");
  for (double r : aspect_ratios) require(r > 0, "anchor.ratios", "ratios must be positive");
  require(backbone_channels.size() == 4, "backbone.channels", "needs exactly 4 widths");
  for (int c : backbone_channels) require(c >= 1, "backbone.channels", "widths must be positive");
  require(scene_min_objects >= 0 && scene_min_objects <= scene_max_objects, "scene.min_objects",
          "must be in [0, scene.max_objects]");
  require(scene_min_width >= 1 && scene_min_width <= scene_max_width, "scene.min_width",
          "must be in [1, scene.max_width]");
  require(scene_max_width <= image_size, "scene.max_width", "must fit in the image");
  require(scene_min_aspect > 0 && scene_min_aspect <= scene_max_aspect, "scene.min_aspect",
          "must be in (0, scene.max_aspect]");
  require(scene_min_height >= 1 && scene_min_height <= image_size, "scene.min_height", "must be in [1, image_size]");
  require(scene_min_gap >= 0, "scene.min_gap", "must be non-negative");
  require(scene_noise >= 0 && scene_noise <= 1, "scene.noise", "must be in [0, 1]");
  require(train_scenes >= 0, "data.train_scenes", "must be non-negative");
  require(test_scenes >= 0, "data.test_scenes", "must be non-negative");
  require(conf_thresh >= 0 && conf_thresh < 1, "infer.conf_thresh", "must be in [0, 1)");
  require(nms_thresh > 0 && nms_thresh <= 1, "infer.nms_thresh", "must be in (0, 1]");
  for (double r : resolutions) require(r > 0, "infer.resolutions", "factors must be positive");
  require(eval_iou > 0 && eval_iou < 1, "eval.iou", "must be in (0, 1)");
  require(log_every >= 1, "log.every", "must be positive");
  require(checkpoint_every >= 0, "checkpoint.every", "must be non-negative");
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
  TrainConfig config;
  std::istringstream is(text);
  std::string line;
  for (int number = 1; std::getline(is, line); ++number) {
    const auto where = source + ":" + std::to_string(number) + ": ";
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected key=value");
    config.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  config.validate();
}

}  // namespace sadet
