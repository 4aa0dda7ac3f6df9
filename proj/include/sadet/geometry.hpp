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

// Anchor boxes, their scale adaptation, box regression encode/decode and the
// detection post-processing helpers (IoU, matching, NMS). All quantities are
// in pixels of the image the boxes belong to; boxes are center-size.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sadet::geometry {

struct Box {
  double x = 0;  // center
  double y = 0;
  double w = 0;
  double h = 0;

  double left() const { return x - 0.5 * w; }
  double right() const { return x + 0.5 * w; }
  double top() const { return y - 0.5 * h; }
  double bottom() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  double diagonal() const;

  friend bool operator==(const Box&, const Box&) = default;
};

Box box_from_corners(double x0, double y0, double x1, double y1);

struct AnchorBox {
  Box base;  // initial (unscaled) anchor
  int grid_row = 0;
  int grid_col = 0;
  int ratio_index = 0;
};

struct Offsets {
  double dx = 0;
  double dy = 0;
  double dw = 0;
  double dh = 0;
};

// Loss gradient with respect to each coordinate of a decoded box.
struct CoordGrad {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

struct MatchAssignment {
  std::size_t anchor_index = 0;
  bool positive = false;
  // True when the anchor became positive only because it is the best anchor
  // of some ground truth; its iou may then be below the threshold.
  bool forced = false;
  std::optional<std::size_t> gt_index;
  double iou = 0;  // with the matched gt, or the best gt for negatives
};

struct Detection {
  Box box;
  double score = 0;
};

struct AnchorBudget {
  std::size_t n_layers = 0;
  std::vector<std::int64_t> layer_sizes;
  std::int64_t anchors_per_cell = 0;
  std::int64_t total = 0;
};

// One anchor per (cell, ratio), cells in row-major order and the ratio index
// varying fastest. A ratio r yields an area-preserving anchor of
// base_size*sqrt(r) by base_size/sqrt(r).
std::vector<AnchorBox> generate_initial_anchors(int map_h, int map_w, double stride,
                                                double base_size,
                                                std::span<const double> aspect_ratios);

Box apply_scale(const AnchorBox& anchor, double scale);
Box decode_box(const Box& scaled, const Offsets& off);
Offsets encode_box(const Box& scaled, const Box& gt);

// d(loss)/d(scale) through the decoded box of one anchor, given the loss
// gradient with respect to each decoded coordinate.
double anchor_scale_gradient(const AnchorBox& anchor, const Offsets& off, const CoordGrad& upstream);

double iou(const Box& a, const Box& b);

// Per-anchor labels: every gt forces its best anchor positive (each anchor
// taken by at most one gt, processed in gt order); any other anchor with
// IoU >= pos_thresh to some gt is positive for its best gt. Ties go to the
// lowest index.
std::vector<MatchAssignment> match_anchors(std::span<const Box> scaled_anchors,
                                           std::span<const Box> gts, double pos_thresh);

// Greedy suppression in descending score order (ties: lower input index first).
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh);

AnchorBudget anchor_budget(bool single_layer, std::span<const std::int64_t> layer_sizes,
                           std::int64_t anchors_per_cell);

Box clip_box(const Box& b, double image_w, double image_h);

// Text box format: one `x_center y_center w h [score]` per line.
void write_boxes(std::ostream& os, std::span<const Box> boxes);
void write_detections(std::ostream& os, std::span<const Detection> dets);
std::vector<Detection> read_detections(std::istream& is, const std::string& source);
std::vector<Box> read_boxes(std::istream& is, const std::string& source);
std::vector<Box> read_boxes_file(const std::string& path);

}  // namespace sadet::geometry
