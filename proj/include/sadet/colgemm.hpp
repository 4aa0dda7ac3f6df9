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

// Column-matrix products shared by the standard and anchor convolutions.
// A convolution is expressed as out[x][p] = b[x] + sum_k K[x][k] * col[k][p]
// with col laid out as (taps*channels) x positions, so the inner loops run
// along positions through the SIMD kernels.

#include <span>

#include "sadet/simd.hpp"
#include "sadet/tensor.hpp"

namespace sadet::colgemm {

// kernel: c_out x k (any trailing shape flattened), col: k x p, out: c_out x p.
// Each output element accumulates bias first, then taps in ascending k.
template <typename T>
void forward(const Tensor<T>& kernel, const Tensor<T>& bias, const Tensor<T>& col, Tensor<T>& out) {
  const auto c_out = static_cast<std::size_t>(kernel.dim(0));
  const std::size_t k_len = kernel.size() / c_out;
  const std::size_t p_len = col.size() / k_len;
  SADET_CHECK(col.size() == k_len * p_len && out.size() == c_out * p_len, "colgemm: shape mismatch");
  const T* kd = kernel.data();
  for (std::size_t x = 0; x < c_out; ++x) {
    std::span<T> orow(out.data() + x * p_len, p_len);
    std::fill(orow.begin(), orow.end(), bias[x]);
    for (std::size_t k = 0; k < k_len; ++k) {
      const T a = kd[x * k_len + k];
      simd::axpy(std::span<const T>(col.data() + k * p_len, p_len), a, orow);
    }
  }
}

// Accumulates d(kernel), d(bias) and d(col) from d(out). grad_col is
// overwritten.
template <typename T>
void backward(const Tensor<T>& kernel, const Tensor<T>& col, const Tensor<T>& grad_out,
              Tensor<T>& grad_kernel, Tensor<T>& grad_bias, Tensor<T>& grad_col) {
  const auto c_out = static_cast<std::size_t>(kernel.dim(0));
  const std::size_t k_len = kernel.size() / c_out;
  const std::size_t p_len = col.size() / k_len;
  SADET_CHECK(grad_out.size() == c_out * p_len && grad_col.size() == col.size() &&
                  grad_kernel.size() == kernel.size() && grad_bias.size() == c_out,
              "colgemm: gradient shape mismatch");
  const T* kd = kernel.data();
  for (std::size_t x = 0; x < c_out; ++x) {
    std::span<const T> grow(grad_out.data() + x * p_len, p_len);
    T bsum = 0;
    for (T v : grow) bsum += v;
    grad_bias[x] += bsum;
    for (std::size_t k = 0; k < k_len; ++k) {
      grad_kernel[x * k_len + k] += simd::dot(grow, std::span<const T>(col.data() + k * p_len, p_len));
    }
  }
  grad_col.fill(T{0});
  for (std::size_t k = 0; k < k_len; ++k) {
    std::span<T> gcol(grad_col.data() + k * p_len, p_len);
    for (std::size_t x = 0; x < c_out; ++x) {
      simd::axpy(std::span<const T>(grad_out.data() + x * p_len, p_len), kd[x * k_len + k], gcol);
    }
  }
}

}  // namespace sadet::colgemm
