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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sadet/anchorconv.hpp"
#include "sadet/simd.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace ac = sadet::anchorconv;
using sadet::Shape;
using sadet::Tensor;

using namespace sadet::testing;

namespace {

double weighted_sum(const Tensor<double>& a, const Tensor<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i];
  return s;
}

ac::ConvParams<double> random_params(sadet::testing::Rng& rng, const ac::ConvSpec& spec) {
  return {rng.tensor<double>({spec.c_out, spec.c_in, spec.k_h, spec.k_w}), rng.tensor<double>({spec.c_out})};
}

}  // namespace

TEST_CASE("sample coordinates") {
  ac::ConvSpec spec;
  auto c = ac::sample_coords(5, 5, 0, 2, spec, 1);
  CHECK(c.h == 5);
  CHECK(c.w == 7);
  c = ac::sample_coords(5, 5, 0, 2, spec, 2);
  CHECK(c.w == 9);
  c = ac::sample_coords(5, 5, 0, -2, spec, 1.5);
  CHECK(c.h == 5);
  CHECK(c.w == 2);
}

TEST_CASE("bilinear sampling") {
  sadet::testing::Rng rng(1);
  const auto map = rng.tensor<double>({1, 6, 7});
  const auto plane = map.slab(0);
  for (int r = 0; r < 6; ++r)
    for (int q = 0; q < 7; ++q) CHECK(ac::bilinear_sample(plane, 6, 7, r, q) == map(0, r, q));
  const double mid = ac::bilinear_sample(plane, 6, 7, 2.5, 3.5);
  CHECK(mid == doctest::Approx((map(0, 2, 3) + map(0, 2, 4) + map(0, 3, 3) + map(0, 3, 4)) / 4));
  CHECK(ac::bilinear_sample(plane, 6, 7, -3.0, 50.0) == map(0, 0, 6));

  for (int k = 0; k < 500; ++k) {
    const double h = rng.uniform(-1.5, 6.5), w = rng.uniform(-1.5, 7.5);
    const auto tap = ac::bilinear_tap(6, 7, h, w);
    CHECK(tap.weight[0] + tap.weight[1] + tap.weight[2] + tap.weight[3] == doctest::Approx(1.0).epsilon(1e-15));
    const auto g = ac::bilinear_sample_grad(plane, 6, 7, h, w);
    CHECK(g.value == doctest::Approx(oracle_bilinear(map, 0, h, w)).epsilon(1e-14));
    const double step = 1e-6;
    const double nh = (oracle_bilinear(map, 0, h + step, w) - oracle_bilinear(map, 0, h - step, w)) / (2 * step);
    const double nw = (oracle_bilinear(map, 0, h, w + step) - oracle_bilinear(map, 0, h, w - step)) / (2 * step);
    CHECK(sadet::testing::rel_err(g.d_h, nh, 1e-3) <= 1e-7);
    CHECK(sadet::testing::rel_err(g.d_w, nw, 1e-3) <= 1e-7);
  }
  // On grid lines and borders the derivative is the mean of both sides.
  for (double h : {0.0, 2.0, 5.0}) {
    const auto g = ac::bilinear_sample_grad(plane, 6, 7, h, 3.25);
    const double step = 1e-6;
    const double nh = (oracle_bilinear(map, 0, h + step, 3.25) - oracle_bilinear(map, 0, h - step, 3.25)) / (2 * step);
    CHECK(sadet::testing::rel_err(g.d_h, nh, 1e-3) <= 1e-7);
  }
}

TEST_CASE("feature vector") {
  ac::ConvSpec spec;
  spec.alpha = 0.5;
  sadet::testing::Rng rng(2);
  const auto in = rng.tensor<double>({2, 7, 9});

  for (double alpha : {0.0, 0.3, 1.0}) {
    spec.alpha = alpha;
    const auto f = ac::build_feature_vector(in, 1, 3, 4, 1.0, spec);
    REQUIRE(f.size() == 5);
    for (int j = -2; j <= 2; ++j) CHECK(f[j + 2] == in(1, 3, 4 + j));
  }

  // s = 3: side rows sit exactly one row above and below.
  spec.alpha = 0.5;
  Tensor<double> col({1, 3, 9});
  for (int q = 0; q < 9; ++q) {
    col(0, 0, q) = 10 + q;  // a
    col(0, 1, q) = 20 + q;  // b
    col(0, 2, q) = 40 + q;  // c
  }
  const auto f3 = ac::build_feature_vector(col, 0, 1, 4, 3.0, spec);
  const double expect_center = 0.5 * 24 + 0.25 * 14 + 0.25 * 44;
  CHECK(f3[2] == doctest::Approx(expect_center));

  for (int k = 0; k < 50; ++k) {
    spec.alpha = rng.uniform();
    const int r = rng.integer(0, 6), q = rng.integer(0, 8);
    const auto f = ac::build_feature_vector(in, 0, r, q, 1.7, spec);
    for (int j = -2; j <= 2; ++j) CHECK(f[j + 2] == doctest::Approx(oracle_feature(in, 0, r, q, 0, j, 1.7, spec)).epsilon(1e-14));
  }
}

TEST_CASE("forward examples") {
  ac::ConvSpec spec;
  ac::AnchorConv<double> conv(spec);
  auto params = ac::ConvParams<double>::zeros(spec);
  params.kernel.fill(1.0);
  Tensor<double> in({1, 1, 5});
  for (int q = 0; q < 5; ++q) in(0, 0, q) = q + 1;
  const Tensor<double> ones({1, 5}, 1.0);
  CHECK(conv.forward(in, params, ones)(0, 0, 2) == 15);

  params.kernel.fill(0.0);
  params.bias[0] = 0.75;
  const auto out = conv.forward(in, params, ones);
  for (double v : out.values()) CHECK(v == 0.75);

  CHECK_THROWS_AS(conv.forward(in, params, Tensor<double>({1, 4}, 1.0)), sadet::InvalidArgument);
  Tensor<double> bad({1, 5}, 1.0);
  bad[3] = 0;
  CHECK_THROWS_AS(conv.forward(in, params, bad), sadet::InvalidArgument);
  bad[3] = -2;
  CHECK_THROWS_AS(conv.forward(in, params, bad), sadet::InvalidArgument);
  CHECK_THROWS_AS(conv.forward(Tensor<double>({2, 1, 5}), params, ones), sadet::InvalidArgument);
}

TEST_CASE("forward matches the scalar oracle at arbitrary scales") {
  sadet::testing::Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ac::ConvSpec spec{rng.integer(0, 1) * 2 + 1, 5, rng.integer(1, 2), rng.integer(1, 2), 2, 3, rng.uniform()};
    const auto in = rng.tensor<double>({2, 8, 9});
    const auto p = random_params(rng, spec);
    const auto scale = rng.tensor<double>({8, 9}, 0.2, 4.0);
    ac::AnchorConv<double> conv(spec);
    const auto got = conv.forward(in, p, scale);
    const auto want = oracle_forward(in, p, scale, spec);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("unit scale reduces to the dilated convolution") {
  sadet::testing::Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    ac::ConvSpec spec{1, 5, 1, rng.integer(1, 3), 3, 2, rng.uniform()};
    const auto in = rng.tensor<double>({3, 7, 10});
    const auto p = random_params(rng, spec);
    ac::AnchorConv<double> conv(spec);
    const auto got = conv.forward(in, p, Tensor<double>({7, 10}, 1.0));
    const auto want = dilated_conv_reference(in, p, spec);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("doubling kernel and bias doubles the output") {
  sadet::testing::Rng rng(8);
  ac::ConvSpec spec{1, 5, 1, 1, 2, 2, 0.5};
  const auto in = rng.tensor<double>({2, 6, 6});
  auto p = random_params(rng, spec);
  const auto scale = rng.tensor<double>({6, 6}, 0.5, 3.0);
  ac::AnchorConv<double> conv(spec);
  const auto once = conv.forward(in, p, scale);
  p.kernel = sadet::scale(p.kernel, 2.0);
  p.bias = sadet::scale(p.bias, 2.0);
  const auto twice = conv.forward(in, p, scale);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * once[i]).epsilon(1e-14));
}

TEST_CASE("backward edge cases") {
  ac::ConvSpec spec{1, 5, 1, 1, 2, 2, 0.5};
  ac::AnchorConv<double> fresh(spec);
  CHECK_THROWS_AS(fresh.backward(Tensor<double>({2, 4, 4})), sadet::InvalidArgument);

  sadet::testing::Rng rng(10);
  const auto p = random_params(rng, spec);
  const auto scale = rng.tensor<double>({5, 6}, 0.4, 3.0);
  ac::AnchorConv<double> conv(spec);
  (void)conv.forward(rng.tensor<double>({2, 5, 6}), p, scale);
  const auto zero = conv.backward(Tensor<double>({2, 5, 6}));
  for (const auto* t : {&zero.input, &zero.kernel, &zero.bias, &zero.scale})
    for (double v : t->values()) CHECK(v == 0);

  (void)conv.forward(Tensor<double>({2, 5, 6}, 0.7), p, scale);
  const auto flat = conv.backward(rng.tensor<double>({2, 5, 6}));
  for (double v : flat.scale.values()) CHECK(v == doctest::Approx(0).scale(1));
}

TEST_CASE("backward matches central differences") {
  sadet::testing::Rng rng(12);
  const double scales[] = {0.5, 1.0, 1.7, 3.0};
  for (double alpha : {0.0, 0.5, 1.0}) {
    ac::ConvSpec spec{1, 5, 1, 1, 3, 1, alpha};
    auto p = random_params(rng, spec);
    auto in = rng.tensor<double>({3, 9, 9});
    Tensor<double> scale({9, 9});
    for (auto& s : scale.values()) s = scales[rng.integer(0, 3)];
    const auto upstream = rng.tensor<double>({1, 9, 9});

    ac::AnchorConv<double> conv(spec);
    (void)conv.forward(in, p, scale);
    const auto g = conv.backward(upstream);
    auto loss = [&] {
      ac::AnchorConv<double> c(spec);
      return weighted_sum(c.forward(in, p, scale), upstream);
    };
    auto numeric = [&](Tensor<double>& t, double step) {
      std::vector<double> out(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        out[i] = sadet::testing::central_difference(t.values(), i, step, loss);
      return out;
    };
    const std::pair<const Tensor<double>*, Tensor<double>*> classes[] = {
        {&g.input, &in}, {&g.kernel, &p.kernel}, {&g.bias, &p.bias}, {&g.scale, &scale}};
    CAPTURE(alpha);
    for (const auto& [analytic, param] : classes) {
      const std::vector<double> a(analytic->values().begin(), analytic->values().end());
      CHECK(sadet::testing::tensor_rel_err(a, numeric(*param, 1e-5)) <= 1e-4);
      // Element-wise, with a step small enough that the truncation error at
      // bilinear cell corners is negligible.
      const auto fine = numeric(*param, 1e-7);
      double worst = 0;
      for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, sadet::testing::rel_err(a[i], fine[i], 1e-4));
      CHECK(worst <= 1e-4);
    }
  }
}

TEST_CASE("forward and backward are deterministic and level independent") {
  sadet::testing::Rng rng(14);
  ac::ConvSpec spec{1, 5, 1, 1, 4, 3, 0.5};
  const auto in = rng.tensor<double>({4, 8, 8});
  const auto p = random_params(rng, spec);
  const auto scale = rng.tensor<double>({8, 8}, 0.3, 3.5);
  const auto up = rng.tensor<double>({3, 8, 8});
  ac::AnchorConv<double> a(spec), b(spec);
  const auto oa = a.forward(in, p, scale);
  const auto ob = b.forward(in, p, scale);
  CHECK(oa == ob);
  const auto ga = a.backward(up), gb = b.backward(up);
  CHECK(ga.input == gb.input);
  CHECK(ga.kernel == gb.kernel);
  CHECK(ga.scale == gb.scale);

  const auto before = sadet::simd::active_level();
  sadet::simd::set_level(sadet::simd::Level::kScalar);
  ac::AnchorConv<double> s(spec);
  const auto os = s.forward(in, p, scale);
  const auto gs = s.backward(up);
  sadet::simd::set_level(before);
  CHECK(os == oa);  // axpy-only path is bit-identical across levels
  CHECK(gs.input == ga.input);
  CHECK(gs.scale == ga.scale);
  for (std::size_t i = 0; i < gs.kernel.size(); ++i) CHECK(gs.kernel[i] == doctest::Approx(ga.kernel[i]).epsilon(1e-13));
}

TEST_CASE("float precision tracks double") {
  sadet::testing::Rng rng(15);
  ac::ConvSpec spec{1, 5, 1, 1, 2, 2, 0.5};
  const auto in = rng.tensor<double>({2, 6, 7});
  const auto p = random_params(rng, spec);
  const auto scale = rng.tensor<double>({6, 7}, 0.5, 2.5);
  ac::AnchorConv<double> d(spec);
  ac::AnchorConv<float> f(spec);
  const auto od = d.forward(in, p, scale);
  const auto of = f.forward(in.cast<float>(), {p.kernel.cast<float>(), p.bias.cast<float>()}, scale.cast<float>());
  for (std::size_t i = 0; i < od.size(); ++i) CHECK(of[i] == doctest::Approx(od[i]).epsilon(1e-5));
}
