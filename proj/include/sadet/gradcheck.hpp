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

// Finite-difference verification of every hand-written backward pass, in
// 64-bit. A class's error is max|analytic - numeric| over
// max(max|analytic|, max|numeric|) across that gradient tensor.

#include <cstdint>
#include <string>
#include <vector>

namespace sadet::gradcheck {

struct ClassResult {
  std::string name;
  double rel_error = 0;
  double max_abs_diff = 0;
  std::size_t checked = 0;
};

struct SuiteResult {
  std::vector<ClassResult> classes;

  double worst() const;
  bool passed(double tolerance) const { return worst() <= tolerance; }
};

// Relative error of one gradient tensor (see above).
ClassResult compare(const std::string& name, const std::vector<double>& analytic, const std::vector<double>& numeric);

// Anchor convolution on inputs 1x3x9x9 and 2x4x9x9 (batch x channels x
// H x W), a 1x5 kernel, alpha in {0, 0.5, 1} and per-position scales drawn
// from {0.5, 1, 1.7, 3}: input, kernel, bias and scale gradients.
SuiteResult anchorconv_suite(std::uint64_t seed, double step = 1e-5);

// A small model on a 32x32 image (8x8 feature map, two aspect ratios, two
// ground truths): d(loss) for every parameter tensor and for the raw scale
// map, with both scale-gradient paths active.
SuiteResult whole_graph_suite(std::uint64_t seed, double step = 1e-5);

}  // namespace sadet::gradcheck
