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

// Data-parallel inner loops used by the convolution layers. Every kernel has
// a portable scalar reference and vector variants compiled for a specific
// instruction set; the variant is chosen once at startup from the running
// CPU and can be forced with set_level() or the SADET_SIMD environment
// variable ("scalar", "avx2", "neon").
//
// axpy is elementwise and does not use fused multiply-add, so every variant
// is bit-identical to the scalar loop. dot accumulates in a fixed lane-striped
// order: results are reproducible run to run at a given level, and agree
// with the ascending scalar sum to rounding.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sadet::simd {

enum class Level { kScalar, kAvx2, kNeon };

std::string_view level_name(Level level);
Level parse_level(std::string_view name);

// Levels the running CPU can execute, scalar first.
std::vector<Level> available_levels();
Level active_level();
void set_level(Level level);

// y += a * x
void axpy(std::span<const float> x, float a, std::span<float> y);
void axpy(std::span<const double> x, double a, std::span<double> y);

float dot(std::span<const float> x, std::span<const float> y);
double dot(std::span<const double> x, std::span<const double> y);

// Direct access to one variant, for equivalence tests and benchmarks.
void axpy_at(Level level, std::span<const float> x, float a, std::span<float> y);
void axpy_at(Level level, std::span<const double> x, double a, std::span<double> y);
float dot_at(Level level, std::span<const float> x, std::span<const float> y);
double dot_at(Level level, std::span<const double> x, std::span<const double> y);

namespace detail {

template <typename T>
struct KernelTable {
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
};

const KernelTable<float>& scalar_f32();
const KernelTable<double>& scalar_f64();
const KernelTable<float>* avx2_f32();   // nullptr when not compiled in
const KernelTable<double>* avx2_f64();
const KernelTable<float>* neon_f32();
const KernelTable<double>* neon_f64();

}  // namespace detail
}  // namespace sadet::simd
