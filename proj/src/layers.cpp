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

#include "sadet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "sadet/colgemm.hpp"

namespace sadet::layers {

void Conv2dSpec::validate() const {
  SADET_CHECK(c_in >= 1 && c_out >= 1, "Conv2d: channel counts must be >= 1");
  SADET_CHECK(k_h >= 1 && k_w >= 1 && k_h % 2 == 1 && k_w % 2 == 1, "Conv2d: kernel extents must be odd");
  SADET_CHECK(d_h >= 1 && d_w >= 1, "Conv2d: dilation must be >= 1");
}

template <typename T>
Conv2d<T>::Conv2d(Conv2dSpec spec) : spec_(spec) {
  spec_.validate();
}

template <typename T>
void Conv2d<T>::build_index(int height, int width) {
  if (height == height_ && width == width_ && !index_.empty()) return;
  height_ = height;
  width_ = width;
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  index_.assign(static_cast<std::size_t>(spec_.k_h * spec_.k_w) * positions, -1);
  std::size_t t = 0;
  for (int ii = 0; ii < spec_.k_h; ++ii) {
    const int di = (ii - spec_.k_h / 2) * spec_.d_h;
    for (int jj = 0; jj < spec_.k_w; ++jj, ++t) {
      const int dj = (jj - spec_.k_w / 2) * spec_.d_w;
      std::int32_t* row = index_.data() + t * positions;
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
          int sr = r + di;
          int sc = c + dj;
          if (spec_.padding == Padding::kReplicate) {
            sr = std::clamp(sr, 0, height - 1);
            sc = std::clamp(sc, 0, width - 1);
          } else if (sr < 0 || sr >= height || sc < 0 || sc >= width) {
            continue;
          }
          row[static_cast<std::size_t>(r) * width + c] = sr * width + sc;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  const Shape kshape{spec_.c_out, spec_.c_in, spec_.k_h, spec_.k_w};
  if (kernel.shape() != kshape || bias.shape() != Shape{spec_.c_out}) {
    throw InvalidArgument("Conv2d parameter shape " + shape_to_string(kernel.shape()) + ", expected " +
                          shape_to_string(kshape));
  }
  if (input.rank() != 3 || input.dim(0) != spec_.c_in) {
    throw InvalidArgument("Conv2d input shape " + shape_to_string(input.shape()));
  }
  const int height = static_cast<int>(input.dim(1));
  const int width = static_cast<int>(input.dim(2));
  build_index(height, width);
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  const auto taps = static_cast<std::size_t>(spec_.k_h * spec_.k_w);

  Tensor<T> col({static_cast<std::int64_t>(spec_.c_in * taps), static_cast<std::int64_t>(positions)});
  for (int ch = 0; ch < spec_.c_in; ++ch) {
    const T* plane = input.slab(ch).data();
    for (std::size_t t = 0; t < taps; ++t) {
      const std::int32_t* idx = index_.data() + t * positions;
      T* row = col.data() + (static_cast<std::size_t>(ch) * taps + t) * positions;
      for (std::size_t p = 0; p < positions; ++p) row[p] = idx[p] >= 0 ? plane[idx[p]] : T{0};
    }
  }
  Tensor<T> out({spec_.c_out, height, width});
  colgemm::forward(kernel, bias, col, out);
  col_ = std::move(col);
  kernel_ = kernel;
  return out;
}

template <typename T>
Conv2dGrads<T> Conv2d<T>::backward(const Tensor<T>& grad_out, bool need_input) const {
  if (!col_) throw InvalidArgument("Conv2d backward called without a forward context");
  const std::size_t positions = static_cast<std::size_t>(height_) * width_;
  const auto taps = static_cast<std::size_t>(spec_.k_h * spec_.k_w);
  Conv2dGrads<T> g{Tensor<T>({spec_.c_in, height_, width_}), Tensor<T>(kernel_->shape()),
                   Tensor<T>({spec_.c_out})};
  Tensor<T> grad_col(col_->shape());
  colgemm::backward(*kernel_, *col_, grad_out, g.kernel, g.bias, grad_col);
  if (!need_input) return g;
  for (int ch = 0; ch < spec_.c_in; ++ch) {
    T* gplane = g.input.slab(ch).data();
    for (std::size_t t = 0; t < taps; ++t) {
      const std::int32_t* idx = index_.data() + t * positions;
      const T* row = grad_col.data() + (static_cast<std::size_t>(ch) * taps + t) * positions;
      for (std::size_t p = 0; p < positions; ++p) {
        if (idx[p] >= 0) gplane[idx[p]] += row[p];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  active_.assign(x.size(), false);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > T{0}) {
      out[i] = x[i];
      active_[i] = true;
    }
  }
  shape_ = x.shape();
  return out;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_out) const {
  SADET_CHECK(grad_out.shape() == shape_, "Relu backward: shape mismatch");
  Tensor<T> g(shape_);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = active_[i] ? grad_out[i] : T{0};
  return g;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
  SADET_CHECK(x.rank() == 3, "MaxPool2: input must be C x H x W");
  const std::int64_t ch = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::int64_t oh = height / 2, ow = width / 2;
  SADET_CHECK(oh >= 1 && ow >= 1, "MaxPool2: input smaller than the pooling window");
  Tensor<T> out({ch, oh, ow});
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (std::int64_t c = 0; c < ch; ++c) {
    for (std::int64_t r = 0; r < oh; ++r) {
      for (std::int64_t q = 0; q < ow; ++q, ++o) {
        std::int64_t best = (c * height + 2 * r) * width + 2 * q;
        for (std::int64_t dr = 0; dr < 2; ++dr) {
          for (std::int64_t dq = 0; dq < 2; ++dq) {
            const std::int64_t idx = (c * height + 2 * r + dr) * width + 2 * q + dq;
            if (x[static_cast<std::size_t>(idx)] > x[static_cast<std::size_t>(best)]) best = idx;
          }
        }
        out[o] = x[static_cast<std::size_t>(best)];
        argmax_[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  in_shape_ = x.shape();
  out_shape_ = out.shape();
  return out;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out) const {
  SADET_CHECK(grad_out.shape() == out_shape_, "MaxPool2 backward: shape mismatch");
  Tensor<T> g(in_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g[static_cast<std::size_t>(argmax_[o])] += grad_out[o];
  return g;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& image, int out_h, int out_w) {
  SADET_CHECK(image.rank() == 3, "resize_bilinear: image must be C x H x W");
  SADET_CHECK(out_h >= 1 && out_w >= 1, "resize_bilinear: empty output");
  const auto ch = image.dim(0);
  const auto in_h = static_cast<int>(image.dim(1));
  const auto in_w = static_cast<int>(image.dim(2));
  if (in_h == out_h && in_w == out_w) return image;
  Tensor<T> out({ch, out_h, out_w});
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (std::int64_t c = 0; c < ch; ++c) {
    const auto plane = image.slab(c);
    for (int r = 0; r < out_h; ++r) {
      const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, in_h - 1);
      const double wy = fy - y0;
      for (int q = 0; q < out_w; ++q) {
        const double fx = std::clamp((q + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, in_w - 1);
        const double wx = fx - x0;
        const double v = (1 - wy) * ((1 - wx) * plane[y0 * in_w + x0] + wx * plane[y0 * in_w + x1]) +
                         wy * ((1 - wx) * plane[y1 * in_w + x0] + wx * plane[y1 * in_w + x1]);
        out(c, r, q) = static_cast<T>(v);
      }
    }
  }
  return out;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Relu<float>;
template class Relu<double>;
template class MaxPool2<float>;
template class MaxPool2<double>;
template Tensor<float> resize_bilinear(const Tensor<float>&, int, int);
template Tensor<double> resize_bilinear(const Tensor<double>&, int, int);

}  // namespace sadet::layers
