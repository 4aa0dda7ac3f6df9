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

#include "sadet/anchorconv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sadet/colgemm.hpp"

namespace sadet::anchorconv {

void ConvSpec::validate() const {
  SADET_CHECK(k_h >= 1 && k_w >= 1 && k_h % 2 == 1 && k_w % 2 == 1, "ConvSpec: kernel extents must be odd and >= 1");
  SADET_CHECK(d_h >= 1 && d_w >= 1, "ConvSpec: dilation must be >= 1");
  SADET_CHECK(c_in >= 1 && c_out >= 1, "ConvSpec: channel counts must be >= 1");
  SADET_CHECK(alpha >= 0 && alpha <= 1, "ConvSpec: alpha must lie in [0, 1]");
}

template <typename T>
ConvParams<T> ConvParams<T>::zeros(const ConvSpec& spec) {
  spec.validate();
  return ConvParams{Tensor<T>({spec.c_out, spec.c_in, spec.k_h, spec.k_w}), Tensor<T>({spec.c_out})};
}

template <typename T>
void ConvParams<T>::check(const ConvSpec& spec) const {
  const Shape want{spec.c_out, spec.c_in, spec.k_h, spec.k_w};
  if (kernel.shape() != want) {
    throw InvalidArgument("anchor conv kernel shape " + shape_to_string(kernel.shape()) +
                          ", expected " + shape_to_string(want));
  }
  if (bias.shape() != Shape{spec.c_out}) {
    throw InvalidArgument("anchor conv bias shape " + shape_to_string(bias.shape()));
  }
}

SampleCoord sample_coords(double c_h, double c_w, int i, int j, const ConvSpec& spec, double s) {
  return SampleCoord{c_h + static_cast<double>(i * spec.d_h) * s,
                     c_w + static_cast<double>(j * spec.d_w) * s};
}

namespace {

struct Axis {
  int i0;
  int i1;
  double f;
};

Axis clamp_axis(int n, double c) {
  if (n == 1) return Axis{0, 0, 0.0};
  const double cc = std::clamp(c, 0.0, static_cast<double>(n - 1));
  int i0 = static_cast<int>(std::floor(cc));
  if (i0 >= n - 1) i0 = n - 2;
  return Axis{i0, i0 + 1, cc - i0};
}

// Value of the interpolant on integer row r at column coordinate `ax`.
template <typename T>
double along_row(std::span<const T> plane, int width, int r, const Axis& ax) {
  const std::size_t base = static_cast<std::size_t>(r) * width;
  return (1.0 - ax.f) * plane[base + ax.i0] + ax.f * plane[base + ax.i1];
}

template <typename T>
double along_col(std::span<const T> plane, int width, int c, const Axis& ax) {
  return (1.0 - ax.f) * plane[static_cast<std::size_t>(ax.i0) * width + c] +
         ax.f * plane[static_cast<std::size_t>(ax.i1) * width + c];
}

// Symmetric derivative of a clamped piecewise-linear profile f(k), k in
// [0, n), at coordinate c.
template <typename F>
double profile_slope(int n, double c, F&& f) {
  if (n == 1 || c < 0 || c > n - 1) return 0.0;
  const double fl = std::floor(c);
  const int k = static_cast<int>(fl);
  if (c == fl) {
    const double left = k >= 1 ? f(k) - f(k - 1) : 0.0;
    const double right = k <= n - 2 ? f(k + 1) - f(k) : 0.0;
    return 0.5 * (left + right);
  }
  return f(k + 1) - f(k);
}

}  // namespace

BilinearTap bilinear_tap(int height, int width, double h, double w) {
  const Axis ah = clamp_axis(height, h);
  const Axis aw = clamp_axis(width, w);
  BilinearTap t;
  t.index = {ah.i0 * width + aw.i0, ah.i0 * width + aw.i1, ah.i1 * width + aw.i0,
             ah.i1 * width + aw.i1};
  t.weight = {(1.0 - ah.f) * (1.0 - aw.f), (1.0 - ah.f) * aw.f, ah.f * (1.0 - aw.f), ah.f * aw.f};
  return t;
}

template <typename T>
T bilinear_sample(std::span<const T> plane, int height, int width, double h, double w) {
  SADET_CHECK(plane.size() == static_cast<std::size_t>(height) * width, "bilinear_sample: plane size");
  const BilinearTap t = bilinear_tap(height, width, h, w);
  double v = 0;
  for (int k = 0; k < 4; ++k) v += t.weight[k] * plane[t.index[k]];
  return static_cast<T>(v);
}

template <typename T>
BilinearGrad<T> bilinear_sample_grad(std::span<const T> plane, int height, int width, double h,
                                     double w) {
  const Axis ah = clamp_axis(height, h);
  const Axis aw = clamp_axis(width, w);
  const double value = (1.0 - ah.f) * along_row(plane, width, ah.i0, aw) + ah.f * along_row(plane, width, ah.i1, aw);
  const double d_h = profile_slope(height, h, [&](int r) { return along_row(plane, width, r, aw); });
  const double d_w = profile_slope(width, w, [&](int c) { return along_col(plane, width, c, ah); });
  return BilinearGrad<T>{static_cast<T>(value), static_cast<T>(d_h), static_cast<T>(d_w)};
}

template <typename T>
std::array<T, 2> row_slopes(std::span<const T> plane, int height, int width, int row, double w) {
  const Axis aw = clamp_axis(width, w);
  auto f = [&](int r) { return along_row(plane, width, r, aw); };
  const double left = row >= 1 && row <= height - 1 ? f(row) - f(row - 1) : 0.0;
  const double right = row >= 0 && row <= height - 2 ? f(row + 1) - f(row) : 0.0;
  return {static_cast<T>(left), static_cast<T>(right)};
}

SamplePlan plan_position(int c_h, int c_w, double s, const ConvSpec& spec, int height, int width) {
  SamplePlan plan;
  plan.c_h = c_h;
  plan.c_w = c_w;
  plan.scale = s;
  plan.taps.reserve(static_cast<std::size_t>(spec.taps()));
  const double half_rows = 0.5 * (s - 1.0);
  for (int ii = 0; ii < spec.k_h; ++ii) {
    const int i = ii - spec.k_h / 2;
    for (int jj = 0; jj < spec.k_w; ++jj) {
      const int j = jj - spec.k_w / 2;
      const SampleCoord sc = sample_coords(c_h, c_w, i, j, spec, s);
      const double dh = static_cast<double>(i * spec.d_h);
      const double dw = static_cast<double>(j * spec.d_w);
      TapPlan tp;
      tp.i = i;
      tp.j = j;
      auto add = [&](double h, double weight, double dh_ds) {
        Sample& smp = tp.samples[static_cast<std::size_t>(tp.count++)];
        smp.h = h;
        smp.w = sc.w;
        smp.weight = weight;
        smp.dh_ds = dh_ds;
        smp.dw_ds = dw;
        smp.tap = bilinear_tap(height, width, h, sc.w);
      };
      if (s > 1.0) {
        add(sc.h, 1.0 - spec.alpha, dh);
        add(sc.h - half_rows, 0.5 * spec.alpha, dh - 0.5);
        add(sc.h + half_rows, 0.5 * spec.alpha, dh + 0.5);
      } else {
        add(sc.h, 1.0, dh);
      }
      plan.taps.push_back(tp);
    }
  }
  return plan;
}

namespace {

template <typename T>
double gather(std::span<const T> plane, const TapPlan& tp) {
  double v = 0;
  for (int n = 0; n < tp.count; ++n) {
    const Sample& smp = tp.samples[static_cast<std::size_t>(n)];
    double sv = 0;
    for (int k = 0; k < 4; ++k) sv += smp.tap.weight[k] * plane[smp.tap.index[k]];
    v += smp.weight * sv;
  }
  return v;
}

void check_scale_value(double s, int r, int c) {
  if (!(s > 0) || !std::isfinite(s)) {
    throw InvalidArgument("anchor conv: scale at (" + std::to_string(r) + "," + std::to_string(c) +
                          ") must be positive and finite, got " + std::to_string(s));
  }
}

}  // namespace

template <typename T>
std::vector<T> build_feature_vector(const Tensor<T>& input, int channel, int c_h, int c_w, double s,
                                    const ConvSpec& spec) {
  spec.validate();
  SADET_CHECK(input.rank() == 3, "build_feature_vector: input must be C x H x W");
  SADET_CHECK(channel >= 0 && channel < input.dim(0), "build_feature_vector: channel out of range");
  check_scale_value(s, c_h, c_w);
  const int height = static_cast<int>(input.dim(1));
  const int width = static_cast<int>(input.dim(2));
  const SamplePlan plan = plan_position(c_h, c_w, s, spec, height, width);
  std::vector<T> out;
  out.reserve(plan.taps.size());
  for (const TapPlan& tp : plan.taps) out.push_back(static_cast<T>(gather(input.slab(channel), tp)));
  return out;
}

template <typename T>
AnchorConv<T>::AnchorConv(ConvSpec spec) : spec_(spec) {
  spec_.validate();
}

template <typename T>
Tensor<T> AnchorConv<T>::forward(const Tensor<T>& input, const ConvParams<T>& params,
                                 const Tensor<T>& scale_map) {
  params.check(spec_);
  if (input.rank() != 3 || input.dim(0) != spec_.c_in) {
    throw InvalidArgument("anchor conv input shape " + shape_to_string(input.shape()) +
                          ", expected c_in=" + std::to_string(spec_.c_in));
  }
  const int height = static_cast<int>(input.dim(1));
  const int width = static_cast<int>(input.dim(2));
  if (scale_map.shape() != Shape{height, width}) {
    throw InvalidArgument("scale map shape " + shape_to_string(scale_map.shape()) +
                          " does not match feature map " + shape_to_string(input.shape()));
  }
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  const auto taps = static_cast<std::size_t>(spec_.taps());

  Context ctx;
  ctx.height = height;
  ctx.width = width;
  ctx.plans.reserve(positions);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double s = static_cast<double>(scale_map(r, c));
      check_scale_value(s, r, c);
      ctx.plans.push_back(plan_position(r, c, s, spec_, height, width));
    }
  }

  ctx.col = Tensor<T>({static_cast<std::int64_t>(spec_.c_in * taps), static_cast<std::int64_t>(positions)});
  for (int ch = 0; ch < spec_.c_in; ++ch) {
    const std::span<const T> plane = input.slab(ch);
    for (std::size_t t = 0; t < taps; ++t) {
      T* row = ctx.col.data() + (static_cast<std::size_t>(ch) * taps + t) * positions;
      for (std::size_t p = 0; p < positions; ++p) row[p] = static_cast<T>(gather(plane, ctx.plans[p].taps[t]));
    }
  }

  Tensor<T> out({spec_.c_out, height, width});
  colgemm::forward(params.kernel, params.bias, ctx.col, out);
  ctx.input = input;
  ctx.kernel = params.kernel;
  ctx_ = std::move(ctx);
  return out;
}

template <typename T>
Gradients<T> AnchorConv<T>::backward(const Tensor<T>& grad_out) const {
  if (!ctx_) throw InvalidArgument("anchor conv backward called without a forward context");
  const Context& ctx = *ctx_;
  const int height = ctx.height;
  const int width = ctx.width;
  if (grad_out.shape() != Shape{spec_.c_out, height, width}) {
    throw InvalidArgument("anchor conv grad_out shape " + shape_to_string(grad_out.shape()));
  }
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  const auto taps = static_cast<std::size_t>(spec_.taps());

  Gradients<T> g{Tensor<T>(ctx.input.shape()), Tensor<T>(ctx.kernel.shape()),
                 Tensor<T>({spec_.c_out}), Tensor<T>({height, width})};
  Tensor<T> grad_col(ctx.col.shape());
  colgemm::backward(ctx.kernel, ctx.col, grad_out, g.kernel, g.bias, grad_col);

  const double blend_kink = spec_.alpha / 8.0;
  for (std::size_t p = 0; p < positions; ++p) {
    const SamplePlan& plan = ctx.plans[p];
    const bool at_unit_scale = plan.scale == 1.0;
    double gs = 0;
    for (std::size_t t = 0; t < taps; ++t) {
      const TapPlan& tp = plan.taps[t];
      for (int ch = 0; ch < spec_.c_in; ++ch) {
        const double gi = grad_col[(static_cast<std::size_t>(ch) * taps + t) * positions + p];
        if (gi == 0) continue;
        const std::span<const T> plane = ctx.input.slab(ch);
        const std::span<T> gplane = g.input.slab(ch);
        for (int n = 0; n < tp.count; ++n) {
          const Sample& smp = tp.samples[static_cast<std::size_t>(n)];
          const double gw = smp.weight * gi;
          for (int k = 0; k < 4; ++k) gplane[smp.tap.index[k]] += static_cast<T>(smp.tap.weight[k] * gw);
          const auto bg = bilinear_sample_grad(plane, height, width, smp.h, smp.w);
          gs += gw * (smp.dh_ds * static_cast<double>(bg.d_h) + smp.dw_ds * static_cast<double>(bg.d_w));
        }
        // At s == 1 the row blend switches on; its one-sided slope from above
        // is alpha/4 * (right - left) and zero from below.
        if (at_unit_scale && tp.i == 0 && blend_kink != 0) {
          const auto sl = row_slopes(plane, height, width, plan.c_h, tp.samples[0].w);
          gs += gi * blend_kink * (static_cast<double>(sl[1]) - static_cast<double>(sl[0]));
        }
      }
    }
    g.scale[p] = static_cast<T>(gs);
  }
  return g;
}

#define SADET_INSTANTIATE(T)                                                                   \
  template struct ConvParams<T>;                                                               \
  template T bilinear_sample(std::span<const T>, int, int, double, double);                    \
  template BilinearGrad<T> bilinear_sample_grad(std::span<const T>, int, int, double, double); \
  template std::array<T, 2> row_slopes(std::span<const T>, int, int, int, double);             \
  template std::vector<T> build_feature_vector(const Tensor<T>&, int, int, int, double,        \
                                               const ConvSpec&);                               \
  template class AnchorConv<T>;

SADET_INSTANTIATE(float)
SADET_INSTANTIATE(double)
#undef SADET_INSTANTIATE

}  // namespace sadet::anchorconv
