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

#include "sadet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "sadet/anchorconv.hpp"
#include "sadet/config.hpp"
#include "sadet/network.hpp"

namespace sadet::gradcheck {
namespace {

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  double operator()(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

template <typename Fill>
Tensor<double> random_tensor(Shape shape, Fill&& fill) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = fill();
  return t;
}

std::vector<double> central(Tensor<double>& t, double step, const std::function<double()>& f) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double saved = t[i];
    t[i] = saved + step;
    const double up = f();
    t[i] = saved - step;
    const double down = f();
    t[i] = saved;
    out[i] = (up - down) / (2 * step);
  }
  return out;
}

std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

double SuiteResult::worst() const {
  double w = 0;
  for (const auto& c : classes) w = std::max(w, c.rel_error);
  return w;
}

ClassResult compare(const std::string& name, const std::vector<double>& a, const std::vector<double>& n) {
  ClassResult r;
  r.name = name;
  r.checked = a.size();
  double scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    r.max_abs_diff = std::max(r.max_abs_diff, std::abs(a[i] - n[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(n[i])});
  }
  r.rel_error = scale > 0 ? r.max_abs_diff / scale : 0.0;
  return r;
}

SuiteResult anchorconv_suite(std::uint64_t seed, double step) {
  Uniform u(seed);
  const double scales[] = {0.5, 1.0, 1.7, 3.0};
  const int shapes[][2] = {{1, 3}, {2, 4}};  // batch, channels
  SuiteResult out;
  for (const auto& [batch, channels] : shapes) {
    for (double alpha : {0.0, 0.5, 1.0}) {
      const anchorconv::ConvSpec spec{1, 5, 1, 1, channels, 2, alpha};
      anchorconv::ConvParams<double> p{random_tensor({2, channels, 1, 5}, [&] { return u(-1, 1); }),
                                       random_tensor({2}, [&] { return u(-1, 1); })};
      std::vector<Tensor<double>> inputs, maps, upstream;
      for (int b = 0; b < batch; ++b) {
        inputs.push_back(random_tensor({channels, 9, 9}, [&] { return u(-1, 1); }));
        maps.push_back(random_tensor({9, 9}, [&] { return scales[u.index(4)]; }));
        upstream.push_back(random_tensor({2, 9, 9}, [&] { return u(-1, 1); }));
      }
      auto loss = [&] {
        double total = 0;
        for (int b = 0; b < batch; ++b) {
          anchorconv::AnchorConv<double> conv(spec);
          const auto y = conv.forward(inputs[b], p, maps[b]);
          for (std::size_t i = 0; i < y.size(); ++i) total += y[i] * upstream[b][i];
        }
        return total;
      };

      std::vector<double> g_in, n_in, g_map, n_map;
      Tensor<double> g_kernel(p.kernel.shape()), g_bias(p.bias.shape());
      for (int b = 0; b < batch; ++b) {
        anchorconv::AnchorConv<double> conv(spec);
        (void)conv.forward(inputs[b], p, maps[b]);
        const auto g = conv.backward(upstream[b]);
        accumulate(g_kernel, g.kernel);
        accumulate(g_bias, g.bias);
        const auto gi = as_vector(g.input), gm = as_vector(g.scale);
        g_in.insert(g_in.end(), gi.begin(), gi.end());
        g_map.insert(g_map.end(), gm.begin(), gm.end());
        const auto ni = central(inputs[b], step, loss), nm = central(maps[b], step, loss);
        n_in.insert(n_in.end(), ni.begin(), ni.end());
        n_map.insert(n_map.end(), nm.begin(), nm.end());
      }
      char tag[64];
      std::snprintf(tag, sizeof tag, "anchorconv %dx%dx9x9 alpha=%g ", batch, channels, alpha);
      out.classes.push_back(compare(std::string(tag) + "input", g_in, n_in));
      out.classes.push_back(compare(std::string(tag) + "kernel", as_vector(g_kernel), central(p.kernel, step, loss)));
      out.classes.push_back(compare(std::string(tag) + "bias", as_vector(g_bias), central(p.bias, step, loss)));
      out.classes.push_back(compare(std::string(tag) + "scale", g_map, n_map));
    }
  }
  return out;
}

SuiteResult whole_graph_suite(std::uint64_t seed, double step) {
  TrainConfig c;
  c.image_size = 32;
  c.aspect_ratios = {2.0, 4.0};
  c.backbone_channels = {4, 6, 6, 8};
  c.base_size = 8;
  c.neg_weight = 0.25;
  c.pos_iou = 0.4;
  net::Model<double> model(c);
  model.initialize(seed);

  Uniform u(seed ^ 0xabcdef);
  // Move away from the zero-initialised scale layer and the tiny head so
  // every path carries a visible gradient.
  for (auto& v : model.param("scale.weight").values()) v = u(-0.1, 0.1);
  model.param("scale.bias")[0] = u(-0.2, 0.2);
  for (const char* name : {"head.conf.weight", "head.loc.weight"}) {
    for (auto& v : model.param(name).values()) v = u(-0.2, 0.2);
  }
  for (const char* name : {"head.conf.bias", "head.loc.bias"}) {
    for (auto& v : model.param(name).values()) v = u(-0.3, 0.3);
  }

  const auto image = random_tensor({3, 32, 32}, [&] { return u(0, 1); });
  const std::vector<geometry::Box> gts{{9.5, 10.0, 14.0, 5.0}, {21.0, 24.5, 18.0, 6.0}};
  const auto anchors = net::anchors_for(c, 8, 8);
  const auto options = net::LossOptions::from_config(c);

  auto loss = [&] {
    const auto f = model.forward(image, false);
    return net::compute_loss(f.head, f.scale, anchors, gts, options).breakdown.total;
  };

  model.zero_grad();
  auto fwd = model.forward(image, false);
  const auto l = net::compute_loss(fwd.head, fwd.scale, anchors, gts, options);
  const auto g_raw = model.backward(fwd.scale, l.grad, l.grad_scale, {true, true, {}, 0});

  SuiteResult out;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto numeric = central(model.params()[i].value, step, loss);
    out.classes.push_back(compare("model " + model.params()[i].name, as_vector(model.grads()[i].value), numeric));
  }

  // The raw scale map as a free variable, features held fixed.
  const auto features = model.backbone_forward(image);
  Tensor<double> raw = fwd.scale.raw;
  const double s_max = 32;
  auto raw_loss = [&] {
    const auto m = net::Model<double>::activate(raw, s_max);
    const auto head = model.detection_head(features, m);
    return net::compute_loss(head, m, anchors, gts, options).breakdown.total;
  };
  out.classes.push_back(compare("model scale_map.raw", as_vector(g_raw), central(raw, step, raw_loss)));
  return out;
}

}  // namespace sadet::gradcheck
