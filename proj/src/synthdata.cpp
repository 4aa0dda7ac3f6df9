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

#include "sadet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sadet/error.hpp"

namespace sadet::synth {
namespace fs = std::filesystem;
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0, double hi = 1) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

struct Rgb {
  double c[3];
};

Rgb tinted(Draw& d, double level) {
  Rgb out;
  for (double& c : out.c) c = std::clamp(level + d.uniform(-0.08, 0.08), 0.0, 1.0);
  return out;
}

// A level at least 0.35 away from `from` and inside [0, 1].
double contrasting(Draw& d, double from) {
  const double delta = d.uniform(0.35, 0.55);
  return from < 0.5 ? std::min(1.0, from + delta) : std::max(0.0, from - delta);
}

bool too_close(const geometry::Box& a, const geometry::Box& b, int gap) {
  if (geometry::iou(a, b) >= 0.2) return true;
  const double g = gap;
  return a.left() < b.right() + g && b.left() < a.right() + g && a.top() < b.bottom() + g &&
         b.top() < a.bottom() + g;
}

}  // namespace

void SceneSpec::validate() const {
  SADET_CHECK(width >= 1 && height >= 1, "scene size must be positive");
  SADET_CHECK(min_objects >= 0 && min_objects <= max_objects, "object count range is invalid");
  SADET_CHECK(min_width >= 1 && min_width <= max_width, "object width range is invalid");
  SADET_CHECK(max_width <= width, "object width range exceeds the image");
  SADET_CHECK(min_aspect > 0 && min_aspect <= max_aspect, "aspect range is invalid");
  SADET_CHECK(min_height >= 1 && min_height <= height, "minimum height is invalid");
  SADET_CHECK(min_gap >= 0 && max_retries >= 1, "gap and retry budget must be non-negative");
  SADET_CHECK(noise >= 0 && noise <= 1, "noise amplitude must be in [0, 1]");
}

std::uint64_t SceneSpec::hash() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << width << ' ' << height << ' ' << min_objects << ' ' << max_objects << ' ' << min_width << ' '
     << max_width << ' ' << min_aspect << ' ' << max_aspect << ' ' << min_height << ' ' << min_gap << ' '
     << static_cast<int>(background) << ' ' << static_cast<int>(glyph) << ' ' << noise << ' ' << seed << ' '
     << max_retries;
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : ss.str()) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

SceneSpec SceneSpec::from_config(const TrainConfig& c, std::uint64_t seed) {
  SceneSpec s;
  s.width = s.height = c.image_size;
  s.min_objects = c.scene_min_objects;
  s.max_objects = c.scene_max_objects;
  s.min_width = c.scene_min_width;
  s.max_width = c.scene_max_width;
  s.min_aspect = c.scene_min_aspect;
  s.max_aspect = c.scene_max_aspect;
  s.min_height = c.scene_min_height;
  s.min_gap = c.scene_min_gap;
  s.background = c.scene_background;
  s.glyph = c.scene_glyph;
  s.noise = c.scene_noise;
  s.seed = seed;
  return s;
}

template <typename T>
Tensor<T> Image::to_tensor() const {
  Tensor<T> out({3, height, width});
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + p] = static_cast<T>(rgb[3 * p + c]) / T(255);
  }
  return out;
}

template Tensor<float> Image::to_tensor<float>() const;
template Tensor<double> Image::to_tensor<double>() const;

Scene generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  Draw d(splitmix(spec.seed ^ splitmix(index)));
  const int W = spec.width, H = spec.height;

  auto background = spec.background;
  if (background == BackgroundStyle::kMixed) background = static_cast<BackgroundStyle>(d.integer(0, 2));
  const double bg_level = d.uniform(0.05, 0.95);
  const Rgb bg = tinted(d, bg_level);
  const double ramp = d.uniform(-0.15, 0.15);
  const bool ramp_vertical = d.integer(0, 1) == 1;

  std::vector<double> canvas(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double shift = 0;
      if (background == BackgroundStyle::kGradient) {
        const double t = ramp_vertical ? (y + 0.5) / H : (x + 0.5) / W;
        shift = ramp * (2 * t - 1);
      } else if (background == BackgroundStyle::kNoise) {
        shift = d.uniform(-0.08, 0.08);
      }
      for (int c = 0; c < 3; ++c) canvas[(static_cast<std::size_t>(y) * W + x) * 3 + c] = bg.c[c] + shift;
    }
  }

  Scene scene;
  scene.meta.seed = spec.seed;
  scene.meta.index = index;
  scene.meta.spec_hash = spec.hash();
  scene.meta.requested = d.integer(spec.min_objects, spec.max_objects);

  const double log_lo = std::log(spec.min_width), log_hi = std::log(spec.max_width);
  for (int k = 0; k < scene.meta.requested; ++k) {
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
      const int w = std::clamp(static_cast<int>(std::lround(std::exp(d.uniform(log_lo, log_hi)))), 1, W);
      const double aspect = d.uniform(spec.min_aspect, spec.max_aspect);
      const int h = std::clamp(static_cast<int>(std::lround(w / aspect)), spec.min_height, H);
      const int left = d.integer(0, W - w);
      const int top = d.integer(0, H - h);
      const auto box = geometry::box_from_corners(left, top, left + w, top + h);
      if (std::any_of(scene.gts.begin(), scene.gts.end(),
                      [&](const geometry::Box& g) { return too_close(box, g, spec.min_gap); })) {
        continue;
      }

      auto glyph = spec.glyph;
      if (glyph == GlyphStyle::kMixed) glyph = static_cast<GlyphStyle>(d.integer(0, 1));
      const double level = contrasting(d, bg_level);
      const Rgb ink = tinted(d, level);
      // Second strip colour sits further from the background than the ink.
      const double away = level > bg_level ? 1.0 : -1.0;
      const Rgb ink2 = tinted(d, std::clamp(level + away * 0.2, 0.0, 1.0));
      const int strip = d.integer(1, 3);
      for (int y = top; y < top + h; ++y) {
        for (int x = left; x < left + w; ++x) {
          const bool alt = glyph == GlyphStyle::kStriped && ((x - left) / strip) % 2 == 1;
          const Rgb& col = alt ? ink2 : ink;
          for (int c = 0; c < 3; ++c) canvas[(static_cast<std::size_t>(y) * W + x) * 3 + c] = col.c[c];
        }
      }
      scene.gts.push_back(box);
      break;
    }
  }
  scene.meta.placed = static_cast<int>(scene.gts.size());

  scene.image.width = W;
  scene.image.height = H;
  scene.image.rgb.resize(canvas.size());
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double v = canvas[i] + (spec.noise > 0 ? d.uniform(-spec.noise, spec.noise) : 0.0);
    scene.image.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
  }
  return scene;
}

void write_ppm(const std::string& path, const Image& image) {
  SADET_CHECK(image.rgb.size() == static_cast<std::size_t>(image.width) * image.height * 3,
              "image buffer does not match its size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("write failed: " + path);
}

Image parse_ppm(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto header_int = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])) && pos - start < 9) {
      v = v * 10 + (bytes[pos++] - '0');
    }
    if (pos == start) throw ParseError(source, start, std::string("expected ") + what);
    return static_cast<int>(v);
  };

  if (bytes.compare(0, 2, "P6") != 0) throw ParseError(source, 0, "not a binary PPM (P6)");
  pos = 2;
  Image img;
  img.width = header_int("width");
  img.height = header_int("height");
  const std::size_t maxval_at = pos;
  const int maxval = header_int("maxval");
  if (img.width < 1 || img.height < 1) throw ParseError(source, maxval_at, "image size must be positive");
  if (maxval != 255) throw ParseError(source, maxval_at, "only 8-bit PPM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError(source, pos, "expected whitespace after maxval");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - pos < need) {
    throw ParseError(source, bytes.size(),
                     "truncated pixel data: " + std::to_string(bytes.size() - pos) + " of " +
                         std::to_string(need) + " bytes");
  }
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ppm(ss.str(), path);
}

void write_dataset(const std::string& dir, const std::vector<Scene>& scenes) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%06zu", i);
    const std::string image = std::string(stem) + ".ppm", boxes = std::string(stem) + ".txt";
    write_ppm((fs::path(dir) / image).string(), scenes[i].image);
    std::ofstream gt(fs::path(dir) / boxes);
    if (!gt) throw IoError("cannot write " + (fs::path(dir) / boxes).string());
    geometry::write_boxes(gt, scenes[i].gts);
    manifest << image << ' ' << boxes << '\n';
  }
  if (!manifest) throw IoError("write failed: manifest in " + dir);
}

std::vector<Scene> read_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
  const auto manifest_path = (fs::path(dir) / "manifest.txt").string();
  std::vector<Scene> scenes;
  std::ifstream manifest(manifest_path, std::ios::binary);
  if (!manifest) return scenes;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(manifest, line)) {
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string image, boxes, extra;
    if (!(ls >> image >> boxes) || (ls >> extra)) {
      throw ParseError(manifest_path, line_offset, "expected 'image_path gt_path'");
    }
    Scene s;
    s.image = read_ppm((fs::path(dir) / image).string());
    s.gts = geometry::read_boxes_file((fs::path(dir) / boxes).string());
    s.meta.index = scenes.size();
    s.meta.placed = s.meta.requested = static_cast<int>(s.gts.size());
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace sadet::synth
