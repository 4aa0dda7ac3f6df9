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

namespace sadet::simd::detail {
namespace {

template <typename T>
void axpy_scalar(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot_scalar(std::size_t n, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

constexpr KernelTable<float> kScalarF32{&axpy_scalar<float>, &dot_scalar<float>};
constexpr KernelTable<double> kScalarF64{&axpy_scalar<double>, &dot_scalar<double>};

}  // namespace

const KernelTable<float>& scalar_f32() { return kScalarF32; }
const KernelTable<double>& scalar_f64() { return kScalarF64; }

}  // namespace sadet::simd::detail
