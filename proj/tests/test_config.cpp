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

#include <string>

#include "doctest.h"
#include "sadet/config.hpp"
#include "sadet/error.hpp"

using sadet::TrainConfig;

TEST_CASE("defaults validate and round-trip through text") {
  const TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(sadet::parse_config(c.to_text()) == c);
  CHECK(c.momentum == 0.9);
  CHECK(c.weight_decay == 5e-4);
  CHECK(c.lr_initial == 1e-3);
  CHECK(c.lr_decayed == 1e-4);
  CHECK(c.aspect_ratios.size() == 3);
  CHECK(c.image_size == 64);
}

TEST_CASE("parsing handles comments, whitespace and lists") {
  const auto c = sadet::parse_config(
      "# comment\n"
      "  seed = 7   # trailing\n"
      "\n"
      "precision=64\n"
      "anchor.ratios = 1, 2.5 ,4\n"
      "scale.freeze = true\n"
      "scene.background = gradient\n");
  CHECK(c.seed == 7);
  CHECK(c.precision == sadet::Precision::kF64);
  CHECK(c.aspect_ratios == std::vector<double>{1, 2.5, 4});
  CHECK(c.freeze_scale);
  CHECK(c.scene_background == sadet::BackgroundStyle::kGradient);
}

TEST_CASE("errors name the key and line") {
  try {
    (void)sadet::parse_config("seed = 1\nbogus.key = 3\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const sadet::ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("run.cfg:2") != std::string::npos);
    CHECK(what.find("bogus.key") != std::string::npos);
  }
  CHECK_THROWS_AS(sadet::parse_config("iterations = ten\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::parse_config("iterations\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::parse_config("sgd.momentum = 1.5\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::parse_config("head.alpha = nan\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::parse_config("scale.freeze = maybe\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::parse_config("scene.min_width = 50\n"), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::load_config("/nonexistent/file.cfg"), sadet::IoError);
}

TEST_CASE("overrides apply after the file and are validated") {
  TrainConfig c;
  sadet::apply_overrides(c, {"head.alpha=0.25", "loss.beta = 2", "scale.grad_conv=false"});
  CHECK(c.alpha == 0.25);
  CHECK(c.beta == 2);
  CHECK_FALSE(c.scale_grad_conv);
  CHECK(c.get("head.alpha") == "0.25");
  CHECK_THROWS_AS(sadet::apply_overrides(c, {"head.alpha"}), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::apply_overrides(c, {"nope=1"}), sadet::ConfigError);
  CHECK_THROWS_AS(sadet::apply_overrides(c, {"batch_size=0"}), sadet::ConfigError);
}

TEST_CASE("every key is listed and readable") {
  const TrainConfig c;
  for (const auto& k : TrainConfig::keys()) CHECK_FALSE(c.get(k).empty());
}
