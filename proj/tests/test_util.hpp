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

// Shared helpers for the test binaries: a seeded generator and independent
// numerical oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sadet/tensor.hpp"

namespace sadet::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  template <typename T>
  Tensor<T> tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Neumaier-compensated sum of products.
inline double compensated_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0, comp = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] * b[i];
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Relative error of a whole gradient tensor: max-norm of the difference over
// the larger max-norm of the two.
inline double tensor_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale == 0 ? 0 : diff / scale;
}

// Central difference of f with respect to values[i].
template <typename T>
double central_difference(std::span<T> values, std::size_t i, double step,
                          const std::function<double()>& f) {
  const T saved = values[i];
  values[i] = static_cast<T>(saved + step);
  const double up = f();
  values[i] = static_cast<T>(saved - step);
  const double down = f();
  values[i] = saved;
  return (up - down) / (2 * step);
}

}  // namespace sadet::testing
