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

// Standard layers of the backbone: same-size dilated convolution, ReLU,
// 2x2 max pooling, and bilinear image resizing.

#include <cstdint>
#include <optional>
#include <vector>

#include "sadet/tensor.hpp"

namespace sadet::layers {

enum class Padding { kZero, kReplicate };

struct Conv2dSpec {
  int c_in = 1;
  int c_out = 1;
  int k_h = 3;
  int k_w = 3;
  int d_h = 1;
  int d_w = 1;
  Padding padding = Padding::kZero;

  void validate() const;
};

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernel;
  Tensor<T> bias;
};

// Stride-1 convolution with output size equal to input size.
template <typename T>
class Conv2d {
 public:
  explicit Conv2d(Conv2dSpec spec);

  const Conv2dSpec& spec() const { return spec_; }

  // kernel: c_out x c_in x k_h x k_w, bias: c_out.
  Tensor<T> forward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias);
  // need_input = false skips d(input), e.g. for the first layer.
  Conv2dGrads<T> backward(const Tensor<T>& grad_out, bool need_input = true) const;

 private:
  void build_index(int height, int width);

  Conv2dSpec spec_;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::int32_t> index_;  // taps x positions, -1 = zero padding
  std::optional<Tensor<T>> col_;
  std::optional<Tensor<T>> kernel_;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  std::vector<bool> active_;
  Shape shape_;
};

// 2x2 window, stride 2, floor on odd extents. Ties pick the first element in
// row-major window order.
template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  std::vector<std::int32_t> argmax_;
  Shape in_shape_;
  Shape out_shape_;
};

// Bilinear resize of a C x H x W image using pixel-center alignment.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& image, int out_h, int out_w);

}  // namespace sadet::layers
