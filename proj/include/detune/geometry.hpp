#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "detune/error.hpp"

namespace detune {

/// Axis-aligned box in corner form. Zero-area boxes are legal.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
  }
  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  BBox translated(double dx, double dy) const noexcept {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox box;
  int class_id = 0;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruth {
  BBox box;
  int class_id = 0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) throw InvalidArgument("iou: invalid box (min > max or non-finite)");
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Pr(Object) x IoU.
inline double confidence_score(double pr_object, double overlap) {
  detail::require(pr_object >= 0.0 && pr_object <= 1.0,
                  "confidence_score: pr_object outside [0, 1]");
  detail::require(overlap >= 0.0 && overlap <= 1.0, "confidence_score: iou outside [0, 1]");
  return pr_object * overlap;
}

/// Softmax over class logits with max-shift.
inline std::vector<double> class_probabilities(std::span<const double> logits) {
  detail::require(!logits.empty(), "class_probabilities: empty logits");
  for (double z : logits) {
    detail::require(std::isfinite(z), "class_probabilities: non-finite logit");
  }
  const double z_max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - z_max);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

/// Greedy per-class non-maximum suppression.
///
/// Drops detections with confidence below `confidence_threshold`, then walks
/// the rest by descending confidence (ties: lower input index first) and
/// suppresses a detection when its IoU with an already kept detection of the
/// same class is strictly greater than `iou_threshold`. Output is in that
/// walk order.
inline std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                                  double confidence_threshold) {
  detail::require(iou_threshold >= 0.0 && iou_threshold <= 1.0,
                  "nms: iou_threshold outside [0, 1]");
  detail::require(confidence_threshold >= 0.0 && confidence_threshold <= 1.0,
                  "nms: confidence_threshold outside [0, 1]");

  std::vector<std::size_t> order;
  order.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].confidence >= confidence_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  for (std::size_t idx : order) {
    if (!detections[idx].box.valid()) throw InvalidArgument("nms: invalid box");
  }

  std::vector<Detection> kept;
  std::vector<double> kept_area;
  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    const double area = d.box.area();
    bool suppressed = false;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (kept[k].class_id != d.class_id) continue;
      const double inter = intersection_area(kept[k].box, d.box);
      if (inter <= 0.0) continue;
      const double uni = kept_area[k] + area - inter;
      if (uni > 0.0 && std::min(1.0, inter / uni) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(d);
      kept_area.push_back(area);
    }
  }
  return kept;
}

}  // namespace detune
