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

#include "sadet/simd.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

namespace sadet::simd::detail {
namespace {

void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  const float32x4_t va = vdupq_n_f32(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vy = vld1q_f32(y + i);
    vy = vaddq_f32(vy, vmulq_f32(va, vld1q_f32(x + i)));
    vst1q_f32(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

float dot_f32(std::size_t n, const float* x, const float* y) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  float lanes[4];
  vst1q_f32(lanes, acc);
  float sum = 0;
  for (float v : lanes) sum += v;
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  double lanes[2];
  vst1q_f64(lanes, acc);
  double sum = lanes[0] + lanes[1];
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

constexpr KernelTable<float> kNeonF32{&axpy_f32, &dot_f32};
constexpr KernelTable<double> kNeonF64{&axpy_f64, &dot_f64};

}  // namespace

const KernelTable<float>* neon_f32() { return &kNeonF32; }
const KernelTable<double>* neon_f64() { return &kNeonF64; }

}  // namespace sadet::simd::detail

#else

namespace sadet::simd::detail {
const KernelTable<float>* neon_f32() { return nullptr; }
const KernelTable<double>* neon_f64() { return nullptr; }
}  // namespace sadet::simd::detail

#endif
