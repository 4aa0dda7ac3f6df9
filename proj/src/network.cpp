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

#include "sadet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sadet/error.hpp"

namespace sadet::net {
namespace {

using geometry::AnchorBox;
using geometry::Box;

layers::Conv2dSpec conv3x3(int c_in, int c_out) {
  layers::Conv2dSpec s;
  s.c_in = c_in;
  s.c_out = c_out;
  return s;
}

layers::Conv2dSpec scale_spec(const TrainConfig& c) {
  layers::Conv2dSpec s = conv3x3(c.backbone_channels.back(), 1);
  s.k_h = c.scale_kernel_h;
  s.k_w = c.scale_kernel_w;
  s.d_h = s.d_w = c.scale_dilation;
  return s;
}

anchorconv::ConvSpec head_spec(const TrainConfig& c, int c_out) {
  anchorconv::ConvSpec s;
  s.k_h = 1;
  s.k_w = c.head_kernel_w;
  s.c_in = c.backbone_channels.back();
  s.c_out = c_out;
  s.alpha = c.alpha;
  return s;
}

// Box-Muller on a 53-bit uniform, so the stream does not depend on the
// standard library's distribution implementation.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : engine_(seed) {}
  double operator()() {
    const double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

double smooth_l1_grad(double r) { return std::abs(r) < 1 ? r : (r > 0 ? 1.0 : -1.0); }

}  // namespace

template <typename T>
Model<T>::Model(const TrainConfig& config)
    : channels_(config.backbone_channels),
      scale_cap_(config.scale_max),
      num_ratios_(static_cast<int>(config.aspect_ratios.size())),
      scale_conv_(scale_spec(config)),
      conf_conv_(head_spec(config, 2 * static_cast<int>(config.aspect_ratios.size()))),
      loc_conv_(head_spec(config, 4 * static_cast<int>(config.aspect_ratios.size()))) {
  SADET_CHECK(channels_.size() == 4, "the backbone needs exactly 4 conv widths");
  SADET_CHECK(num_ratios_ >= 1, "at least one anchor aspect ratio is required");
  const int kw = config.head_kernel_w;
  const std::int64_t c = channels_.back();
  auto add = [&](const std::string& name, Shape shape) {
    params_.push_back({name, Tensor<T>(shape)});
    grads_.push_back({name, Tensor<T>(shape)});
  };
  int c_in = 3;
  for (int i = 0; i < 4; ++i) {
    const std::string stem = "backbone.conv" + std::to_string(i + 1);
    add(stem + ".weight", {channels_[i], c_in, 3, 3});
    add(stem + ".bias", {channels_[i]});
    convs_.emplace_back(conv3x3(c_in, channels_[i]));
    relus_.emplace_back();
    c_in = channels_[i];
  }
  pools_.resize(2);
  add("scale.weight", {1, c, config.scale_kernel_h, config.scale_kernel_w});
  add("scale.bias", {1});
  add("head.conf.weight", {2 * num_ratios_, c, 1, kw});
  add("head.conf.bias", {2 * num_ratios_});
  add("head.loc.weight", {4 * num_ratios_, c, 1, kw});
  add("head.loc.bias", {4 * num_ratios_});
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
  Gaussian g(seed);
  for (int i = kConv1; i < kScale; i += 2) {
    auto& w = params_[i].value;
    const double fan_in = static_cast<double>(w.size() / static_cast<std::size_t>(w.dim(0)));
    const double sd = std::sqrt(2.0 / fan_in);
    for (auto& v : w.values()) v = static_cast<T>(sd * g());
    params_[i + 1].value.fill(T(0));
  }
  // Zero scale layer: s starts at 1 everywhere.
  params_[kScale].value.fill(T(0));
  params_[kScale + 1].value.fill(T(0));
  for (int i : {kConf, kLoc}) {
    for (auto& v : params_[i].value.values()) v = static_cast<T>(0.01 * g());
    params_[i + 1].value.fill(T(0));
  }
}

template <typename T>
Tensor<T>& Model<T>::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw InvalidArgument("no parameter named " + name);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& g : grads_) g.value.fill(T(0));
}

template <typename T>
Tensor<T> Model<T>::backbone_forward(const Tensor<T>& image) {
  SADET_CHECK(image.rank() == 3 && image.dim(0) == 3, "backbone: image must be 3 x H x W");
  SADET_CHECK(image.dim(1) >= kStride && image.dim(2) >= kStride, "backbone: image is smaller than the stride");
  Tensor<T> x = image;
  for (int i = 0; i < 4; ++i) {
    x = relus_[i].forward(convs_[i].forward(x, params_[2 * i].value, params_[2 * i + 1].value));
    if (i < 2) x = pools_[i].forward(x);
  }
  return x;
}

template <typename T>
ScaleMap<T> Model<T>::activate(const Tensor<T>& raw, double s_max) {
  SADET_CHECK(s_max >= 1, "scale: s_max must be at least 1");
  ScaleMap<T> m{raw, Tensor<T>(raw.shape()), Tensor<T>(raw.shape())};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double s = std::clamp(std::exp(static_cast<double>(raw[i])), 1.0 / s_max, s_max);
    if (!std::isfinite(s)) throw NumericError("scale map is NaN at cell " + std::to_string(i));
    m.value[i] = static_cast<T>(s);
  }
  return m;
}

template <typename T>
ScaleMap<T> Model<T>::scale_regression(const Tensor<T>& features, double s_max, bool freeze) {
  frozen_ = freeze;
  s_max_ = s_max;
  const Shape map{features.dim(1), features.dim(2)};
  if (freeze) return {Tensor<T>(map), Tensor<T>(map, T(1)), Tensor<T>(map)};
  const auto z = scale_conv_.forward(features, params_[kScale].value, params_[kScale + 1].value);
  return activate(z.reshaped(map), s_max);
}

template <typename T>
DetectionHeadOutput<T> Model<T>::detection_head(const Tensor<T>& features, const ScaleMap<T>& scale) {
  SADET_CHECK(features.rank() == 3 && features.dim(0) == channels_.back(), "head: feature channel mismatch");
  SADET_CHECK(scale.value.rank() == 2 && scale.value.dim(0) == features.dim(1) &&
                  scale.value.dim(1) == features.dim(2),
              "head: scale map does not match the feature map");
  DetectionHeadOutput<T> out;
  out.conf = conf_conv_.forward(features, {params_[kConf].value, params_[kConf + 1].value}, scale.value);
  out.loc = loc_conv_.forward(features, {params_[kLoc].value, params_[kLoc + 1].value}, scale.value);
  return out;
}

template <typename T>
typename Model<T>::Forward Model<T>::forward(const Tensor<T>& image, bool freeze) {
  Forward f;
  f.features = backbone_forward(image);
  const double s_max = scale_cap_ > 0 ? scale_cap_ : static_cast<double>(std::max(image.dim(1), image.dim(2)));
  f.scale = scale_regression(f.features, s_max, freeze);
  f.head = detection_head(f.features, f.scale);
  return f;
}

template <typename T>
Tensor<T> Model<T>::backward(ScaleMap<T>& scale, const DetectionHeadOutput<T>& grad_head,
                             const Tensor<T>& grad_scale_anchor, ScalePaths paths) {
  SADET_CHECK(conf_conv_.has_context() && loc_conv_.has_context(), "backward called before forward");
  SADET_CHECK(grad_scale_anchor.same_shape(scale.value), "backward: anchor-path gradient shape mismatch");
  const auto gc = conf_conv_.backward(grad_head.conf);
  const auto gl = loc_conv_.backward(grad_head.loc);
  accumulate(grads_[kConf].value, gc.kernel);
  accumulate(grads_[kConf + 1].value, gc.bias);
  accumulate(grads_[kLoc].value, gl.kernel);
  accumulate(grads_[kLoc + 1].value, gl.bias);
  Tensor<T> g = gc.input + gl.input;

  scale.grad = Tensor<T>(scale.value.shape());
  if (paths.conv) {
    SADET_CHECK(paths.conv_cells.empty() || paths.conv_cells.size() == scale.grad.size(),
                "backward: conv_cells must have one entry per scale cell");
    for (std::size_t i = 0; i < scale.grad.size(); ++i) {
      if (paths.conv_cells.empty() || paths.conv_cells[i]) scale.grad[i] += gc.scale[i] + gl.scale[i];
    }
  }
  if (paths.anchor) accumulate(scale.grad, grad_scale_anchor);

  Tensor<T> g_raw(scale.value.shape());
  if (!frozen_) {
    for (std::size_t i = 0; i < g_raw.size(); ++i) {
      // Past either clamp the activation is flat.
      const double e = std::exp(static_cast<double>(scale.raw[i]));
      const bool clamped = e >= s_max_ || e <= 1.0 / s_max_;
      g_raw[i] = clamped ? T(0) : scale.grad[i] * scale.value[i];
      g_raw[i] += static_cast<T>(paths.raw_decay * static_cast<double>(scale.raw[i]));
    }
    const auto gs = scale_conv_.backward(g_raw.reshaped({1, g_raw.dim(0), g_raw.dim(1)}));
    accumulate(grads_[kScale].value, gs.kernel);
    accumulate(grads_[kScale + 1].value, gs.bias);
    accumulate(g, gs.input);
  }

  for (int i = 3; i >= 0; --i) {
    if (i < 2) g = pools_[i].backward(g);
    const auto cg = convs_[i].backward(relus_[i].backward(g), i > 0);
    accumulate(grads_[2 * i].value, cg.kernel);
    accumulate(grads_[2 * i + 1].value, cg.bias);
    if (i > 0) g = cg.input;
  }
  return g_raw;
}

LossOptions LossOptions::from_config(const TrainConfig& c) { return {c.beta, c.neg_weight, c.pos_iou}; }

double smooth_l1(double r) {
  const double a = std::abs(r);
  return a < 1 ? 0.5 * r * r : a - 0.5;
}

template <typename T>
LossResult<T> compute_loss(const DetectionHeadOutput<T>& head, const ScaleMap<T>& scale,
                           std::span<const AnchorBox> anchors, std::span<const Box> gts,
                           const LossOptions& options) {
  SADET_CHECK(!anchors.empty(), "compute_loss: no anchors");
  SADET_CHECK(head.conf.rank() == 3 && head.loc.rank() == 3, "compute_loss: head outputs must be C x H x W");
  const std::int64_t n_c = head.conf.dim(0) / 2, H = head.conf.dim(1), W = head.conf.dim(2);
  SADET_CHECK(head.conf.dim(0) == 2 * n_c && head.loc.dim(0) == 4 * n_c && head.loc.dim(1) == H &&
                  head.loc.dim(2) == W,
              "compute_loss: conf/loc channel counts disagree");
  SADET_CHECK(scale.value.rank() == 2 && scale.value.dim(0) == H && scale.value.dim(1) == W,
              "compute_loss: scale map does not match the head");
  SADET_CHECK(static_cast<std::int64_t>(anchors.size()) == H * W * n_c,
              "compute_loss: anchor count does not match the head");

  const std::int64_t plane = H * W;
  auto cell_of = [&](const AnchorBox& a) { return static_cast<std::int64_t>(a.grid_row) * W + a.grid_col; };

  std::vector<Box> scaled(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    scaled[a] = geometry::apply_scale(anchors[a], static_cast<double>(scale.value[cell_of(anchors[a])]));
  }

  LossResult<T> res;
  res.matches = geometry::match_anchors(scaled, gts, options.pos_iou);
  res.grad.conf = Tensor<T>(head.conf.shape());
  res.grad.loc = Tensor<T>(head.loc.shape());
  res.grad_scale = Tensor<T>(scale.value.shape());

  std::int64_t n_pos = 0;
  for (const auto& m : res.matches) n_pos += m.positive;
  const double norm = n_pos > 0 ? 1.0 / static_cast<double>(n_pos) : 1.0 / static_cast<double>(anchors.size());

  double conf_sum = 0, loc_sum = 0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const auto& anchor = anchors[a];
    const std::int64_t cell = cell_of(anchor), r = anchor.ratio_index;
    const bool pos = res.matches[a].positive;
    const std::size_t i0 = static_cast<std::size_t>(2 * r * plane + cell), i1 = i0 + static_cast<std::size_t>(plane);
    const double l0 = head.conf[i0], l1 = head.conf[i1];
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    const double weight = pos ? 1.0 : options.neg_weight;
    conf_sum += weight * (lse - (pos ? l1 : l0));
    const double p1 = std::exp(l1 - lse);
    const double d1 = weight * (p1 - (pos ? 1.0 : 0.0)) * norm;
    res.grad.conf[i0] = static_cast<T>(-d1);
    res.grad.conf[i1] = static_cast<T>(d1);

    if (!pos) continue;
    const Box& g = gts[*res.matches[a].gt_index];
    const double s = scale.value[cell];
    const std::size_t base = static_cast<std::size_t>(4 * r * plane + cell);
    const geometry::Offsets off{head.loc[base], head.loc[base + plane], head.loc[base + 2 * plane],
                                head.loc[base + 3 * plane]};
    const Box dec = geometry::decode_box(scaled[a], off);
    const double w0 = anchor.base.w, h0 = anchor.base.h;
    const double res_x = (dec.x - g.x) / w0;
    const double res_y = (dec.y - g.y) / h0;
    const double res_w = off.dw - std::log(g.w / scaled[a].w);
    const double res_h = off.dh - std::log(g.h / scaled[a].h);
    loc_sum += smooth_l1(res_x) + smooth_l1(res_y) + smooth_l1(res_w) + smooth_l1(res_h);

    const double k = options.beta * norm;
    const double gx = smooth_l1_grad(res_x), gy = smooth_l1_grad(res_y);
    const double gw = smooth_l1_grad(res_w), gh = smooth_l1_grad(res_h);
    res.grad.loc[base] = static_cast<T>(k * gx * s);
    res.grad.loc[base + plane] = static_cast<T>(k * gy * s);
    res.grad.loc[base + 2 * plane] = static_cast<T>(k * gw);
    res.grad.loc[base + 3 * plane] = static_cast<T>(k * gh);
    const geometry::CoordGrad upstream{gx / w0, gy / h0, gw / dec.w, gh / dec.h};
    res.grad_scale[cell] += static_cast<T>(k * geometry::anchor_scale_gradient(anchor, off, upstream));
  }

  auto& b = res.breakdown;
  b.conf_term = conf_sum;
  b.loc_term = loc_sum;
  b.n_matched = n_pos;
  b.beta = options.beta;
  b.neg_weight = options.neg_weight;
  b.total = n_pos > 0 ? (conf_sum + options.beta * loc_sum) * norm : conf_sum * norm;
  if (!std::isfinite(b.total)) throw NumericError("loss is not finite");
  return res;
}

std::vector<AnchorBox> anchors_for(const TrainConfig& config, int map_h, int map_w) {
  return geometry::generate_initial_anchors(map_h, map_w, kStride, config.base_size, config.aspect_ratios);
}

template <typename T>
void sgd_step(Tensor<T>& w, const Tensor<T>& g, Tensor<T>& v, const SgdOptions& o) {
  SADET_CHECK(w.same_shape(g) && w.same_shape(v), "sgd_step: shape mismatch");
  const T mu = static_cast<T>(o.momentum), wd = static_cast<T>(o.weight_decay), lr = static_cast<T>(o.lr);
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] + g[i] + wd * w[i];
    w[i] -= lr * v[i];
  }
}

double learning_rate(const TrainConfig& config, int iteration) {
  return iteration < config.lr_decay_iteration ? config.lr_initial : config.lr_decayed;
}

template class Model<float>;
template class Model<double>;
template LossResult<float> compute_loss(const DetectionHeadOutput<float>&, const ScaleMap<float>&,
                                        std::span<const AnchorBox>, std::span<const Box>, const LossOptions&);
template LossResult<double> compute_loss(const DetectionHeadOutput<double>&, const ScaleMap<double>&,
                                         std::span<const AnchorBox>, std::span<const Box>, const LossOptions&);
template void sgd_step(Tensor<float>&, const Tensor<float>&, Tensor<float>&, const SgdOptions&);
template void sgd_step(Tensor<double>&, const Tensor<double>&, Tensor<double>&, const SgdOptions&);

}  // namespace sadet::net
