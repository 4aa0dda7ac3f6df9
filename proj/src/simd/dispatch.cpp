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

#include <atomic>
#include <cstdlib>
#include <string>

#include "sadet/error.hpp"
#include "sadet/simd.hpp"

namespace sadet::simd {
namespace {

bool cpu_supports(Level level) {
  switch (level) {
    case Level::kScalar:
      return true;
    case Level::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return detail::avx2_f32() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Level::kNeon:
      return detail::neon_f32() != nullptr;
  }
  return false;
}

Level best_level() {
  if (const char* env = std::getenv("SADET_SIMD")) {
    Level forced = parse_level(env);
    if (!cpu_supports(forced)) {
      throw InvalidArgument(std::string("SADET_SIMD=") + env + " is not supported on this CPU");
    }
    return forced;
  }
  if (cpu_supports(Level::kAvx2)) return Level::kAvx2;
  if (cpu_supports(Level::kNeon)) return Level::kNeon;
  return Level::kScalar;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{best_level()};
  return level;
}

const detail::KernelTable<float>& table_f32(Level level) {
  switch (level) {
    case Level::kAvx2:
      return *detail::avx2_f32();
    case Level::kNeon:
      return *detail::neon_f32();
    case Level::kScalar:
      break;
  }
  return detail::scalar_f32();
}

const detail::KernelTable<double>& table_f64(Level level) {
  switch (level) {
    case Level::kAvx2:
      return *detail::avx2_f64();
    case Level::kNeon:
      return *detail::neon_f64();
    case Level::kScalar:
      break;
  }
  return detail::scalar_f64();
}

void require(Level level) {
  if (!cpu_supports(level)) {
    throw InvalidArgument("SIMD level " + std::string(level_name(level)) + " unavailable");
  }
}

template <typename T>
void check_same(std::span<const T> x, std::span<T> y) {
  SADET_CHECK(x.size() == y.size(), "axpy: length mismatch");
}

}  // namespace

std::string_view level_name(Level level) {
  switch (level) {
    case Level::kScalar:
      return "scalar";
    case Level::kAvx2:
      return "avx2";
    case Level::kNeon:
      return "neon";
  }
  return "?";
}

Level parse_level(std::string_view name) {
  if (name == "scalar") return Level::kScalar;
  if (name == "avx2") return Level::kAvx2;
  if (name == "neon") return Level::kNeon;
  throw InvalidArgument("unknown SIMD level '" + std::string(name) + "'");
}

std::vector<Level> available_levels() {
  std::vector<Level> out;
  for (Level l : {Level::kScalar, Level::kAvx2, Level::kNeon}) {
    if (cpu_supports(l)) out.push_back(l);
  }
  return out;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_level(Level level) {
  require(level);
  current().store(level, std::memory_order_relaxed);
}

void axpy(std::span<const float> x, float a, std::span<float> y) {
  check_same(x, y);
  table_f32(active_level()).axpy(x.size(), a, x.data(), y.data());
}

void axpy(std::span<const double> x, double a, std::span<double> y) {
  check_same(x, y);
  table_f64(active_level()).axpy(x.size(), a, x.data(), y.data());
}

float dot(std::span<const float> x, std::span<const float> y) {
  SADET_CHECK(x.size() == y.size(), "dot: length mismatch");
  return table_f32(active_level()).dot(x.size(), x.data(), y.data());
}

double dot(std::span<const double> x, std::span<const double> y) {
  SADET_CHECK(x.size() == y.size(), "dot: length mismatch");
  return table_f64(active_level()).dot(x.size(), x.data(), y.data());
}

void axpy_at(Level level, std::span<const float> x, float a, std::span<float> y) {
  require(level);
  check_same(x, y);
  table_f32(level).axpy(x.size(), a, x.data(), y.data());
}

void axpy_at(Level level, std::span<const double> x, double a, std::span<double> y) {
  require(level);
  check_same(x, y);
  table_f64(level).axpy(x.size(), a, x.data(), y.data());
}

float dot_at(Level level, std::span<const float> x, std::span<const float> y) {
  require(level);
  SADET_CHECK(x.size() == y.size(), "dot: length mismatch");
  return table_f32(level).dot(x.size(), x.data(), y.data());
}

double dot_at(Level level, std::span<const double> x, std::span<const double> y) {
  require(level);
  SADET_CHECK(x.size() == y.size(), "dot: length mismatch");
  return table_f64(level).dot(x.size(), x.data(), y.data());
}

}  // namespace sadet::simd
