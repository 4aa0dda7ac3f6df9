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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "sadet/geometry.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace g = sadet::geometry;
using g::Box;

using namespace sadet::testing;

namespace {

}  // namespace

TEST_CASE("initial anchors") {
  const std::vector<double> five{1, 3, 5, 7, 10};
  CHECK(g::generate_initial_anchors(38, 38, 8, 16, five).size() == 7220);

  const std::vector<double> one{1};
  const auto single = g::generate_initial_anchors(1, 1, 8, 4, one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].base == Box{4, 4, 4, 4});

  const std::vector<double> four{4};
  const auto wide = g::generate_initial_anchors(1, 1, 8, 4, four);
  CHECK(wide[0].base.w == doctest::Approx(8));
  CHECK(wide[0].base.h == doctest::Approx(2));
  CHECK(wide[0].base.area() == doctest::Approx(16));

  const auto grid = g::generate_initial_anchors(2, 3, 4, 8, std::vector<double>{1, 2});
  CHECK(grid[(1 * 3 + 2) * 2 + 1].grid_row == 1);
  CHECK(grid[(1 * 3 + 2) * 2 + 1].grid_col == 2);
  CHECK(grid[(1 * 3 + 2) * 2 + 1].ratio_index == 1);
  CHECK(grid[(1 * 3 + 2) * 2 + 1].base.x == 10);

  CHECK_THROWS_AS(g::generate_initial_anchors(2, 2, 4, 8, std::vector<double>{}), sadet::InvalidArgument);
}

TEST_CASE("apply_scale") {
  const g::AnchorBox a{Box{10, 10, 4, 2}};
  CHECK(g::apply_scale(a, 2) == Box{10, 10, 8, 4});
  CHECK(g::apply_scale(a, 1) == a.base);
  CHECK(g::apply_scale(a, 0.5) == Box{10, 10, 2, 1});
  CHECK_THROWS_AS(g::apply_scale(a, 0), sadet::InvalidArgument);
  CHECK_THROWS_AS(g::apply_scale(a, -1), sadet::InvalidArgument);

  sadet::testing::Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    const g::AnchorBox an{random_box(rng)};
    const double s = rng.uniform(0.05, 8);
    const Box b = g::apply_scale(an, s);
    CHECK(b.x == an.base.x);
    CHECK(b.y == an.base.y);
    CHECK(b.w / b.h == doctest::Approx(an.base.w / an.base.h).epsilon(1e-15));
  }
}

TEST_CASE("decode and encode") {
  const Box b{0, 0, 2, 2};
  CHECK(g::decode_box(b, {}) == b);
  CHECK(g::decode_box(b, {0.5, 0, 0, 0}).x == 1);
  CHECK(g::decode_box(b, {0, 0, std::log(2.0), 0}).w == doctest::Approx(4));
  CHECK_THROWS_AS(g::decode_box(b, {NAN, 0, 0, 0}), sadet::NumericError);

  const auto self = g::encode_box(b, b);
  CHECK(self.dx == 0);
  CHECK(self.dy == 0);
  CHECK(self.dw == 0);
  CHECK(self.dh == 0);
  CHECK(g::encode_box(b, Box{1, 0, 2, 2}).dx == 0.5);
  CHECK_THROWS_AS(g::encode_box(b, Box{1, 0, 0, 2}), sadet::InvalidArgument);

  sadet::testing::Rng rng(9);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const Box anchor = random_box(rng);
    const Box gt = random_box(rng);
    const Box back = g::decode_box(anchor, g::encode_box(anchor, gt));
    worst = std::max({worst, sadet::testing::rel_err(back.x, gt.x, 1), sadet::testing::rel_err(back.y, gt.y, 1),
                      sadet::testing::rel_err(back.w, gt.w), sadet::testing::rel_err(back.h, gt.h)});
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("anchor scale gradient") {
  const g::AnchorBox a{Box{3, 3, 4, 2}};
  CHECK(g::anchor_scale_gradient(a, {}, {1, 1, 1, 1}) == doctest::Approx(6));
  CHECK(g::anchor_scale_gradient(a, {0.3, -0.2, 0.1, 0.4}, {}) == 0);

  // Finite differences of a smooth loss of the decoded box.
  sadet::testing::Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    const g::AnchorBox an{random_box(rng)};
    const g::Offsets off{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double s = rng.uniform(0.3, 3);
    const double cx = rng.uniform(), cy = rng.uniform(), cw = rng.uniform(), ch = rng.uniform();
    auto loss = [&](double scale) {
      const Box d = g::decode_box(g::apply_scale(an, scale), off);
      return cx * d.x * d.x + cy * std::sin(d.y) + cw * std::log(d.w) + ch * d.h * d.h * d.h;
    };
    const Box d = g::decode_box(g::apply_scale(an, s), off);
    const g::CoordGrad up{2 * cx * d.x, cy * std::cos(d.y), cw / d.w, 3 * ch * d.h * d.h};
    const double analytic = g::anchor_scale_gradient(an, off, up);
    const double h = 1e-6;
    const double numeric = (loss(s + h) - loss(s - h)) / (2 * h);
    CHECK(sadet::testing::rel_err(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("iou") {
  const Box a{1, 1, 2, 2};
  CHECK(g::iou(a, a) == 1);
  CHECK(g::iou(a, Box{10, 10, 2, 2}) == 0);
  CHECK(g::iou(a, Box{2, 1, 2, 2}) == doctest::Approx(1.0 / 3.0));

  sadet::testing::Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    const Box p = random_box(rng, 20), q = random_box(rng, 20);
    const double v = g::iou(p, q);
    CHECK(v == g::iou(q, p));
    CHECK(v >= 0);
    CHECK(v < 1);
  }
}

TEST_CASE("match_anchors") {
  const std::vector<Box> anchors{{4, 4, 8, 8}, {12, 4, 8, 8}, {20, 4, 8, 8}};
  const std::vector<Box> exact{{12, 4, 8, 8}};
  const auto m = g::match_anchors(anchors, exact, 0.5);
  CHECK(m[1].positive);
  CHECK(m[1].iou == 1);
  CHECK(*m[1].gt_index == 0);
  CHECK_FALSE(m[0].positive);
  CHECK_FALSE(m[2].positive);

  const auto none = g::match_anchors(anchors, std::vector<Box>{}, 0.5);
  CHECK(std::none_of(none.begin(), none.end(), [](const auto& a) { return a.positive; }));
  CHECK_THROWS_AS(g::match_anchors(std::vector<Box>{}, exact, 0.5), sadet::InvalidArgument);

  // A poorly covered gt still gets its best anchor.
  const std::vector<Box> tiny{{13, 5, 1, 1}};
  const auto forced = g::match_anchors(anchors, tiny, 0.5);
  CHECK(forced[1].positive);
  CHECK(forced[1].forced);

  sadet::testing::Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Box> an, gts;
    for (int k = 0, n = rng.integer(1, 40); k < n; ++k) an.push_back(random_box(rng, 32));
    for (int k = 0, n = rng.integer(0, 4); k < n; ++k) gts.push_back(random_box(rng, 32));
    const auto got = g::match_anchors(an, gts, 0.5);
    const auto want = brute_force_match(an, gts, 0.5);
    for (std::size_t a = 0; a < an.size(); ++a) {
      CHECK(got[a].positive == (want[a] >= 0));
      if (got[a].positive) CHECK(static_cast<int>(*got[a].gt_index) == want[a]);
    }
  }
}

TEST_CASE("nms") {
  const std::vector<g::Detection> dup{{{5, 5, 4, 4}, 0.6}, {{5, 5, 4, 4}, 0.9}};
  const auto kept = g::nms(dup, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);

  const std::vector<g::Detection> apart{{{5, 5, 4, 4}, 0.6}, {{50, 50, 4, 4}, 0.9}, {{20, 5, 4, 4}, 0.1}};
  CHECK(g::nms(apart, 0.5).size() == 3);

  sadet::testing::Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<g::Detection> dets;
    for (int k = 0; k < 50; ++k) dets.push_back({random_box(rng, 40), rng.uniform()});
    const double t = rng.uniform(0.2, 0.7);
    const auto got = g::nms(dets, t);
    const auto want = brute_force_nms(dets, t);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].box == want[k].box);
      CHECK(got[k].score == want[k].score);
    }
    for (std::size_t p = 0; p < got.size(); ++p)
      for (std::size_t q = p + 1; q < got.size(); ++q) CHECK(g::iou(got[p].box, got[q].box) < t);
  }
}

TEST_CASE("anchor budget") {
  const std::vector<std::int64_t> conv4{38 * 38};
  CHECK(g::anchor_budget(true, conv4, 5).total == 7220);
  const std::vector<std::int64_t> pyramid{38 * 38, 19 * 19, 10 * 10, 5 * 5, 3 * 3, 1};
  CHECK(g::anchor_budget(false, pyramid, 5).total == 9700);  // (1444+361+100+25+9+1) * 5
  CHECK(g::anchor_budget(true, std::vector<std::int64_t>{1}, 1).total == 1);
  for (std::size_t depth = 1; depth <= pyramid.size(); ++depth) {
    const std::span<const std::int64_t> layers(pyramid.data(), depth);
    CHECK(g::anchor_budget(true, layers, 5).total == 7220);
  }
  CHECK_THROWS_AS(g::anchor_budget(true, std::vector<std::int64_t>{}, 5), sadet::InvalidArgument);
}

TEST_CASE("box text format") {
  const std::vector<g::Detection> dets{{{1.5, 2.25, 3, 4}, 0.75}, {{10, 11, 12, 13}, 0.125}};
  std::stringstream ss;
  g::write_detections(ss, dets);
  const auto back = g::read_detections(ss, "mem");
  REQUIRE(back.size() == 2);
  CHECK(back[0].box == dets[0].box);
  CHECK(back[1].score == 0.125);

  std::stringstream plain("1 2 3 4\n\n5 6 7 8\n");
  const auto boxes = g::read_boxes(plain, "gt.txt");
  CHECK(boxes.size() == 2);
  CHECK(boxes[1] == Box{5, 6, 7, 8});

  std::stringstream bad("1 2 3 4\n1 2 x 4\n");
  try {
    (void)g::read_boxes(bad, "bad.txt");
    FAIL("expected ParseError");
  } catch (const sadet::ParseError& e) {
    CHECK(e.offset() == 8 + 4);
  }
}
