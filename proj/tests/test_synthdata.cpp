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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sadet/error.hpp"
#include "sadet/synthdata.hpp"

namespace sy = sadet::synth;
namespace fs = std::filesystem;
using sadet::geometry::Box;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("sadet_test_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("scenes are a pure function of seed and index") {
  sy::SceneSpec spec;
  spec.seed = 42;
  const auto a = sy::generate_scene(spec, 5), b = sy::generate_scene(spec, 5);
  CHECK(a.image == b.image);
  CHECK(a.gts == b.gts);
  CHECK(a.meta == b.meta);
  CHECK_FALSE(sy::generate_scene(spec, 6).image == a.image);
  spec.seed = 43;
  CHECK_FALSE(sy::generate_scene(spec, 5).image == a.image);
}

TEST_CASE("zero objects give a background-only scene") {
  sy::SceneSpec spec;
  spec.min_objects = spec.max_objects = 0;
  const auto s = sy::generate_scene(spec, 0);
  CHECK(s.gts.empty());
  CHECK(s.meta.placed == 0);
  CHECK(s.image.rgb.size() == 64u * 64u * 3u);
}

TEST_CASE("ground truths stay inside the image and apart") {
  sy::SceneSpec spec;
  for (std::uint64_t i = 0; i < 300; ++i) {
    const auto s = sy::generate_scene(spec, i);
    CHECK(s.meta.placed == static_cast<int>(s.gts.size()));
    CHECK(s.meta.placed <= s.meta.requested);
    for (std::size_t a = 0; a < s.gts.size(); ++a) {
      const Box& g = s.gts[a];
      CHECK(g.left() >= 0);
      CHECK(g.top() >= 0);
      CHECK(g.right() <= 64);
      CHECK(g.bottom() <= 64);
      for (std::size_t b = a + 1; b < s.gts.size(); ++b) CHECK(sadet::geometry::iou(g, s.gts[b]) < 0.2);
    }
  }
}

TEST_CASE("object widths span the configured range") {
  sy::SceneSpec spec;
  std::vector<double> widths;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    for (const auto& g : sy::generate_scene(spec, i).gts) widths.push_back(g.w);
  }
  std::sort(widths.begin(), widths.end());
  const double d1 = widths[widths.size() / 10], d9 = widths[widths.size() * 9 / 10];
  CAPTURE(d1);
  CAPTURE(d9);
  CHECK(d9 / d1 >= 4.0);
  CHECK(widths.front() >= 8);
  CHECK(widths.back() <= 48);
}

TEST_CASE("boxes tightly bound the rendered bars") {
  sy::SceneSpec spec;
  spec.noise = 0;
  spec.background = sadet::BackgroundStyle::kFlat;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto s = sy::generate_scene(spec, i);
    const auto& im = s.image;
    auto px = [&](int x, int y, int c) { return im.rgb[(static_cast<std::size_t>(y) * im.width + x) * 3 + c]; };
    // Background colour: a pixel outside every (gap-expanded) box.
    int bx = -1, by = -1;
    for (int y = 0; y < im.height && bx < 0; ++y)
      for (int x = 0; x < im.width && bx < 0; ++x) {
        bool free = true;
        for (const auto& g : s.gts) free &= !(x + 1 > g.left() - 1 && x < g.right() + 1 && y + 1 > g.top() - 1 && y < g.bottom() + 1);
        if (free) bx = x, by = y;
      }
    REQUIRE(bx >= 0);
    for (const auto& g : s.gts) {
      int x0 = 1 << 20, y0 = 1 << 20, x1 = -1, y1 = -1;
      // Search a window one pixel larger than the gap around the label.
      for (int y = std::max(0, int(g.top()) - 2); y < std::min(im.height, int(g.bottom()) + 2); ++y)
        for (int x = std::max(0, int(g.left()) - 2); x < std::min(im.width, int(g.right()) + 2); ++x) {
          bool differs = false;
          for (int c = 0; c < 3; ++c) differs |= px(x, y, c) != px(bx, by, c);
          if (differs) {
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x + 1);
            y1 = std::max(y1, y + 1);
          }
        }
      REQUIRE(x1 > 0);
      const Box measured = sadet::geometry::box_from_corners(x0, y0, x1, y1);
      CHECK(sadet::geometry::iou(measured, g) >= 0.95);
    }
  }
}

TEST_CASE("crowded specs place fewer objects and record it") {
  sy::SceneSpec spec;
  spec.min_objects = spec.max_objects = 30;
  spec.min_width = spec.max_width = 40;
  spec.max_retries = 20;
  const auto s = sy::generate_scene(spec, 1);
  CHECK(s.meta.requested == 30);
  CHECK(s.meta.placed < 30);
  CHECK(s.meta.placed == static_cast<int>(s.gts.size()));
}

TEST_CASE("invalid specs are rejected") {
  sy::SceneSpec spec;
  spec.max_width = 100;
  CHECK_THROWS_AS(sy::generate_scene(spec, 0), sadet::InvalidArgument);
  spec = {};
  spec.min_objects = 3;
  spec.max_objects = 2;
  CHECK_THROWS_AS(sy::generate_scene(spec, 0), sadet::InvalidArgument);
}

TEST_CASE("image tensors hold quantized values") {
  const auto s = sy::generate_scene({}, 3);
  const auto t = s.image.to_tensor<double>();
  REQUIRE(t.shape() == sadet::Shape{3, 64, 64});
  CHECK(t(1, 2, 5) == s.image.rgb[(2 * 64 + 5) * 3 + 1] / 255.0);
  for (double v : t.values()) CHECK((v >= 0 && v <= 1));
}

TEST_CASE("PPM round-trip and errors") {
  const auto dir = scratch("ppm");
  fs::create_directories(dir);
  const auto s = sy::generate_scene({}, 9);
  const auto path = (dir / "a.ppm").string();
  sy::write_ppm(path, s.image);
  CHECK(sy::read_ppm(path) == s.image);

  const std::string bytes = slurp(path);
  const std::string header = "P6\n64 64\n255\n";
  REQUIRE(bytes.compare(0, header.size(), header) == 0);
  try {
    (void)sy::parse_ppm(bytes.substr(0, 500), "cut.ppm");
    FAIL("expected ParseError");
  } catch (const sadet::ParseError& e) {
    CHECK(e.file() == "cut.ppm");
    CHECK(e.offset() == 500);
  }
  try {
    (void)sy::parse_ppm("P6\n# c\n4 x\n255\n", "bad.ppm");
    FAIL("expected ParseError");
  } catch (const sadet::ParseError& e) {
    CHECK(e.offset() == 9);
  }
  CHECK_THROWS_AS(sy::parse_ppm("P3\n1 1\n255\n", "p3"), sadet::ParseError);
  CHECK_THROWS_AS(sy::parse_ppm("P6\n1 1\n65535\n", "wide"), sadet::ParseError);
  const auto commented = sy::parse_ppm(std::string("P6 # x\n1 1 255\n") + std::string("\x01\x02\x03", 3), "c");
  CHECK(commented.rgb == std::vector<std::uint8_t>{1, 2, 3});
  fs::remove_all(dir);
}

TEST_CASE("dataset directories round-trip") {
  const auto dir = scratch("dataset");
  std::vector<sy::Scene> scenes;
  for (int i = 0; i < 4; ++i) scenes.push_back(sy::generate_scene({}, i));
  sy::write_dataset(dir.string(), scenes);
  const auto back = sy::read_dataset(dir.string());
  REQUIRE(back.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(back[i].image == scenes[i].image);
    CHECK(back[i].gts == scenes[i].gts);
  }

  std::ofstream(dir / "manifest.txt", std::ios::app) << "only_one_field\n";
  try {
    (void)sy::read_dataset(dir.string());
    FAIL("expected ParseError");
  } catch (const sadet::ParseError& e) {
    CHECK(e.offset() == slurp(dir / "manifest.txt").size() - std::string("only_one_field\n").size());
  }
  fs::remove_all(dir);

  fs::create_directories(dir);
  CHECK(sy::read_dataset(dir.string()).empty());
  fs::remove_all(dir);
  CHECK_THROWS_AS(sy::read_dataset(dir.string()), sadet::IoError);
}
