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

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#define SADET_AVX2 __attribute__((target("avx2")))

namespace sadet::simd::detail {
namespace {

SADET_AVX2 void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_add_ps(vy, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

SADET_AVX2 void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

// Lane k of the accumulator sums elements i = k (mod 8); lanes are folded in
// ascending order, then the tail is added in ascending order.
SADET_AVX2 float dot_f32(std::size_t n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  float sum = 0;
  for (float v : lanes) sum += v;
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

SADET_AVX2 double dot_f64(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = 0;
  for (double v : lanes) sum += v;
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

constexpr KernelTable<float> kAvx2F32{&axpy_f32, &dot_f32};
constexpr KernelTable<double> kAvx2F64{&axpy_f64, &dot_f64};

}  // namespace

const KernelTable<float>* avx2_f32() { return &kAvx2F32; }
const KernelTable<double>* avx2_f64() { return &kAvx2F64; }

}  // namespace sadet::simd::detail

#else

namespace sadet::simd::detail {
const KernelTable<float>* avx2_f32() { return nullptr; }
const KernelTable<double>* avx2_f64() { return nullptr; }
}  // namespace sadet::simd::detail

#endif
