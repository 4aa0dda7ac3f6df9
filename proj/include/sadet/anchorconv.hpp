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

// Anchor convolution: a same-size convolution whose sampling grid at output
// position y stretches with the scale s_y of a shared single-channel scale
// map. Tap (i, j) samples at
//
//   h = c_h + i * d_h * s,   w = c_w + j * d_w * s
//
// through bilinear interpolation with border clamping. When s > 1 each tap
// blends three rows: weight (1 - alpha) at h and alpha / 2 at h -/+ (s - 1) / 2.
// When s <= 1 only row h is read, with weight 1, so at s == 1 the operator is
// exactly a standard dilated convolution with replicate padding.
//
// Gradients of the bilinear samples with respect to their coordinates use the
// mean of the left and right slopes on grid lines (where the interpolant has
// a kink), which is what a central difference measures there. The same rule
// is applied to the s == 1 switch of the row blend.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sadet/tensor.hpp"

namespace sadet::anchorconv {

struct ConvSpec {
  int k_h = 1;
  int k_w = 5;
  int d_h = 1;
  int d_w = 1;
  int c_in = 1;
  int c_out = 1;
  double alpha = 0.5;

  int taps() const { return k_h * k_w; }
  void validate() const;
};

template <typename T>
struct ConvParams {
  Tensor<T> kernel;  // c_out x c_in x k_h x k_w
  Tensor<T> bias;    // c_out

  static ConvParams zeros(const ConvSpec& spec);
  void check(const ConvSpec& spec) const;
};

struct SampleCoord {
  double h = 0;
  double w = 0;
};

SampleCoord sample_coords(double c_h, double c_w, int i, int j, const ConvSpec& spec, double s);

// Four clamped corners of one bilinear read; weights sum to 1.
struct BilinearTap {
  std::array<std::int32_t, 4> index{};
  std::array<double, 4> weight{};
};

BilinearTap bilinear_tap(int height, int width, double h, double w);

template <typename T>
T bilinear_sample(std::span<const T> plane, int height, int width, double h, double w);

template <typename T>
struct BilinearGrad {
  T value;
  T d_h;
  T d_w;
};

template <typename T>
BilinearGrad<T> bilinear_sample_grad(std::span<const T> plane, int height, int width, double h,
                                     double w);

// Left and right row slopes of the interpolant at integer row `row`,
// column coordinate w. Clamped sides have slope 0.
template <typename T>
std::array<T, 2> row_slopes(std::span<const T> plane, int height, int width, int row, double w);

struct Sample {
  double h = 0;
  double w = 0;
  double weight = 0;
  double dh_ds = 0;  // coordinate derivatives with respect to s
  double dw_ds = 0;
  BilinearTap tap;
};

struct TapPlan {
  std::array<Sample, 3> samples;
  int count = 0;
  int i = 0;
  int j = 0;
};

// Every read made for one output position.
struct SamplePlan {
  int c_h = 0;
  int c_w = 0;
  double scale = 1;
  std::vector<TapPlan> taps;  // k_h * k_w, row-major in (i, j)
};

SamplePlan plan_position(int c_h, int c_w, double s, const ConvSpec& spec, int height, int width);

// I_cy: the k_h * k_w blended samples of one input channel at one position.
template <typename T>
std::vector<T> build_feature_vector(const Tensor<T>& input, int channel, int c_h, int c_w, double s,
                                    const ConvSpec& spec);

template <typename T>
struct Gradients {
  Tensor<T> input;   // c_in x H x W
  Tensor<T> kernel;  // like ConvParams::kernel
  Tensor<T> bias;    // c_out
  Tensor<T> scale;   // H x W
};

template <typename T>
class AnchorConv {
 public:
  explicit AnchorConv(ConvSpec spec);

  const ConvSpec& spec() const { return spec_; }

  // input: c_in x H x W, scale_map: H x W (strictly positive). Output is
  // c_out x H x W. Keeps the sampling plans for backward().
  Tensor<T> forward(const Tensor<T>& input, const ConvParams<T>& params, const Tensor<T>& scale_map);

  Gradients<T> backward(const Tensor<T>& grad_out) const;

  bool has_context() const { return ctx_.has_value(); }
  void clear() { ctx_.reset(); }

 private:
  struct Context {
    Tensor<T> input;
    Tensor<T> kernel;
    Tensor<T> col;
    std::vector<SamplePlan> plans;
    int height = 0;
    int width = 0;
  };

  ConvSpec spec_;
  std::optional<Context> ctx_;
};

}  // namespace sadet::anchorconv
