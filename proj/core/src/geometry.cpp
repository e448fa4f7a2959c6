#include "opis/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "opis/error.hpp"

namespace opis {

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x2 > x1 && y2 > y1;
}

namespace {

void check_box(const BBox& b) {
  if (!b.valid()) {
    std::ostringstream os;
    os << "degenerate box (" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << ")";
    throw InvalidInput(os.str());
  }
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  check_box(a);
  check_box(b);
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  // Union is summed in a fixed order of the two areas; min/max keeps the
  // result bitwise symmetric in (a, b).
  const double area_a = a.area();
  const double area_b = b.area();
  const double uni = std::min(area_a, area_b) + std::max(area_a, area_b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> dets, double iou_threshold) {
  detail::require(iou_threshold > 0.0 && iou_threshold < 1.0, "nms: iou_threshold must lie in (0, 1)");

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return dets[i].score > dets[j].score; });

  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    const ScoredBox& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredBox& k) {
      return k.class_id == cand.class_id && iou(k.box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace opis
