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

#include "sadet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sadet/error.hpp"

namespace sadet::geometry {

double Box::diagonal() const { return std::sqrt(w * w + h * h); }

Box box_from_corners(double x0, double y0, double x1, double y1) {
  return Box{0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

std::vector<AnchorBox> generate_initial_anchors(int map_h, int map_w, double stride,
                                                double base_size,
                                                std::span<const double> aspect_ratios) {
  SADET_CHECK(!aspect_ratios.empty(), "generate_initial_anchors: empty aspect ratio list");
  SADET_CHECK(map_h >= 1 && map_w >= 1, "generate_initial_anchors: empty feature map");
  SADET_CHECK(stride >= 1, "generate_initial_anchors: stride must be >= 1");
  SADET_CHECK(base_size > 0, "generate_initial_anchors: base_size must be > 0");
  for (double r : aspect_ratios) SADET_CHECK(r > 0, "generate_initial_anchors: ratio must be > 0");

  std::vector<AnchorBox> anchors;
  anchors.reserve(static_cast<std::size_t>(map_h) * map_w * aspect_ratios.size());
  for (int row = 0; row < map_h; ++row) {
    for (int col = 0; col < map_w; ++col) {
      const double cx = (col + 0.5) * stride;
      const double cy = (row + 0.5) * stride;
      for (std::size_t k = 0; k < aspect_ratios.size(); ++k) {
        const double root = std::sqrt(aspect_ratios[k]);
        anchors.push_back(AnchorBox{Box{cx, cy, base_size * root, base_size / root}, row, col,
                                    static_cast<int>(k)});
      }
    }
  }
  return anchors;
}

Box apply_scale(const AnchorBox& anchor, double scale) {
  if (!(scale > 0) || !std::isfinite(scale)) {
    throw InvalidArgument("apply_scale: scale must be positive and finite, got " + std::to_string(scale));
  }
  return Box{anchor.base.x, anchor.base.y, anchor.base.w * scale, anchor.base.h * scale};
}

Box decode_box(const Box& scaled, const Offsets& off) {
  SADET_CHECK(scaled.w > 0 && scaled.h > 0, "decode_box: degenerate anchor");
  if (!std::isfinite(off.dx) || !std::isfinite(off.dy) || !std::isfinite(off.dw) ||
      !std::isfinite(off.dh)) {
    throw NumericError("decode_box: non-finite offsets");
  }
  return Box{scaled.x + scaled.w * off.dx, scaled.y + scaled.h * off.dy,
             scaled.w * std::exp(off.dw), scaled.h * std::exp(off.dh)};
}

Offsets encode_box(const Box& scaled, const Box& gt) {
  SADET_CHECK(scaled.w > 0 && scaled.h > 0 && gt.w > 0 && gt.h > 0, "encode_box: degenerate box");
  return Offsets{(gt.x - scaled.x) / scaled.w, (gt.y - scaled.y) / scaled.h,
                 std::log(gt.w / scaled.w), std::log(gt.h / scaled.h)};
}

double anchor_scale_gradient(const AnchorBox& anchor, const Offsets& off, const CoordGrad& g) {
  // x = x0 + w0*s*dx, w = w0*s*exp(dw), and likewise for y, h.
  const double w0 = anchor.base.w;
  const double h0 = anchor.base.h;
  return g.x * w0 * off.dx + g.y * h0 * off.dy + g.w * w0 * std::exp(off.dw) +
         g.h * h0 * std::exp(off.dh);
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<MatchAssignment> match_anchors(std::span<const Box> scaled_anchors,
                                           std::span<const Box> gts, double pos_thresh) {
  SADET_CHECK(!scaled_anchors.empty(), "match_anchors: no anchors");
  SADET_CHECK(pos_thresh > 0 && pos_thresh < 1, "match_anchors: threshold must be in (0,1)");
  const std::size_t n_anchor = scaled_anchors.size();
  std::vector<MatchAssignment> out(n_anchor);
  for (std::size_t a = 0; a < n_anchor; ++a) out[a].anchor_index = a;
  if (gts.empty()) return out;

  const std::size_t n_gt = gts.size();
  std::vector<double> overlap(n_anchor * n_gt);
  for (std::size_t a = 0; a < n_anchor; ++a) {
    for (std::size_t g = 0; g < n_gt; ++g) overlap[a * n_gt + g] = iou(scaled_anchors[a], gts[g]);
  }

  for (std::size_t a = 0; a < n_anchor; ++a) {
    double best = -1;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (overlap[a * n_gt + g] > best) {
        best = overlap[a * n_gt + g];
        best_g = g;
      }
    }
    out[a].iou = best;
    if (best >= pos_thresh) {
      out[a].positive = true;
      out[a].gt_index = best_g;
    }
  }

  std::vector<bool> taken(n_anchor, false);
  for (std::size_t g = 0; g < n_gt; ++g) {
    double best = -1;
    std::size_t best_a = n_anchor;
    for (std::size_t a = 0; a < n_anchor; ++a) {
      if (taken[a]) continue;
      if (overlap[a * n_gt + g] > best) {
        best = overlap[a * n_gt + g];
        best_a = a;
      }
    }
    if (best_a == n_anchor) continue;  // more gts than anchors
    taken[best_a] = true;
    auto& m = out[best_a];
    m.forced = best < pos_thresh;
    m.positive = true;
    m.gt_index = g;
    m.iou = best;
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, dets[idx].box) >= iou_thresh;
    });
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

AnchorBudget anchor_budget(bool single_layer, std::span<const std::int64_t> layer_sizes,
                           std::int64_t anchors_per_cell) {
  SADET_CHECK(!layer_sizes.empty(), "anchor_budget: empty layer list");
  AnchorBudget b;
  b.anchors_per_cell = anchors_per_cell;
  if (single_layer) {
    b.n_layers = 1;
    b.layer_sizes = {layer_sizes.front()};
  } else {
    b.n_layers = layer_sizes.size();
    b.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  }
  for (std::int64_t d : b.layer_sizes) b.total += d * anchors_per_cell;
  return b;
}

Box clip_box(const Box& b, double image_w, double image_h) {
  const double x0 = std::clamp(b.left(), 0.0, image_w);
  const double x1 = std::clamp(b.right(), 0.0, image_w);
  const double y0 = std::clamp(b.top(), 0.0, image_h);
  const double y1 = std::clamp(b.bottom(), 0.0, image_h);
  return box_from_corners(x0, y0, x1, y1);
}

void write_boxes(std::ostream& os, std::span<const Box> boxes) {
  const auto old = os.precision(17);
  for (const Box& b : boxes) os << b.x << ' ' << b.y << ' ' << b.w << ' ' << b.h << '\n';
  os.precision(old);
}

void write_detections(std::ostream& os, std::span<const Detection> dets) {
  const auto old = os.precision(17);
  for (const Detection& d : dets) {
    os << d.box.x << ' ' << d.box.y << ' ' << d.box.w << ' ' << d.box.h << ' ' << d.score << '\n';
  }
  os.precision(old);
}

std::vector<Detection> read_detections(std::istream& is, const std::string& source) {
  std::vector<Detection> out;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(is, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw ParseError(source, line_start + line.find(tok), "invalid number '" + tok + "'");
      }
      vals.push_back(v);
    }
    if (vals.size() != 4 && vals.size() != 5) {
      throw ParseError(source, line_start, "expected 4 or 5 fields, got " + std::to_string(vals.size()));
    }
    if (!(vals[2] > 0) || !(vals[3] > 0)) throw ParseError(source, line_start, "non-positive box size");
    out.push_back(Detection{Box{vals[0], vals[1], vals[2], vals[3]}, vals.size() == 5 ? vals[4] : 1.0});
  }
  return out;
}

std::vector<Box> read_boxes(std::istream& is, const std::string& source) {
  std::vector<Box> out;
  for (const Detection& d : read_detections(is, source)) out.push_back(d.box);
  return out;
}

std::vector<Box> read_boxes_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_boxes(in, path);
}

}  // namespace sadet::geometry
