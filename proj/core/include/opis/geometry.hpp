#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace opis {

/// Axis-aligned box with continuous coordinates. A valid box has finite
/// coordinates and strictly positive width and height.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// A scored, class-tagged box. `class_id` is zero-based over the C
/// foreground classes.
struct ScoredBox {
  BBox box;
  double score = 0.0;
  std::size_t class_id = 0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

/// Intersection over union. Throws InvalidInput for a degenerate box.
double iou(const BBox& a, const BBox& b);

/// Greedy per-class non-maximum suppression.
///
/// Boxes are visited in descending score order (ties: lower input index
/// first); a box is dropped when its IoU with an already-kept box of the
/// same class exceeds `iou_threshold`. The result is ordered by descending
/// score with the same tie rule.
std::vector<ScoredBox> nms(std::span<const ScoredBox> dets, double iou_threshold);

}  // namespace opis
