#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "detune/error.hpp"
#include "detune/geometry.hpp"

namespace detune {

/// Predictions and ground truth for one image.
struct ImageSample {
  std::vector<Detection> predictions;
  std::vector<GroundTruth> ground_truths;
};

struct MatchedDetection {
  double confidence = 0.0;
  int class_id = 0;
  bool true_positive = false;
  std::size_t image = 0;  // index of the source image
  std::size_t index = 0;  // index within that image's prediction list
};

/// TP/FP flags in descending-confidence order plus ground-truth accounting.
struct MatchResult {
  std::vector<MatchedDetection> detections;
  std::size_t gt_count = 0;
  std::size_t fn_count = 0;

  std::size_t tp_count() const {
    return static_cast<std::size_t>(std::count_if(
        detections.begin(), detections.end(), [](const auto& d) { return d.true_positive; }));
  }
  std::size_t fp_count() const { return detections.size() - tp_count(); }

  MatchResult for_class(int class_id, std::size_t class_gt_count) const {
    MatchResult out;
    out.gt_count = class_gt_count;
    for (const auto& d : detections) {
      if (d.class_id == class_id) out.detections.push_back(d);
    }
    out.fn_count = out.gt_count - out.tp_count();
    return out;
  }
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double confidence = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  std::size_t gt_count = 0;
};

struct APResult {
  std::map<int, double> per_class_ap;
  double map = 0.0;
};

namespace detail {

inline void require_iou_threshold(double t, const char* who) {
  if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument(std::string(who) + ": IoU threshold outside (0, 1]");
}

inline bool by_confidence(const MatchedDetection& a, const MatchedDetection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.image != b.image) return a.image < b.image;
  return a.index < b.index;
}

}  // namespace detail

/// Greedy one-to-one matching for one image.
///
/// Detections are visited by descending confidence (ties: input order). Each
/// one is a TP if some not-yet-matched ground truth of the same class has
/// IoU >= `iou_threshold` with it; it then claims the highest-IoU such ground
/// truth (ties: lower index). Otherwise it is an FP.
inline MatchResult match_detections(std::span<const Detection> preds,
                                    std::span<const GroundTruth> gts, double iou_threshold,
                                    std::size_t image_index = 0) {
  detail::require_iou_threshold(iou_threshold, "match_detections");
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  std::vector<bool> claimed(gts.size(), false);
  MatchResult out;
  out.gt_count = gts.size();
  out.detections.reserve(preds.size());
  for (std::size_t idx : order) {
    const Detection& p = preds[idx];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (claimed[j] || gts[j].class_id != p.class_id) continue;
      const double o = iou(p.box, gts[j].box);
      if (o >= iou_threshold && o > best_iou) {
        best = j;
        best_iou = o;
      }
    }
    if (best) claimed[*best] = true;
    out.detections.push_back({p.confidence, p.class_id, best.has_value(), image_index, idx});
  }
  out.fn_count = out.gt_count - out.tp_count();
  return out;
}

/// Matches every image independently and merges into one confidence-ordered list.
inline MatchResult match_images(std::span<const ImageSample> images, double iou_threshold) {
  MatchResult all;
  for (std::size_t i = 0; i < images.size(); ++i) {
    MatchResult m =
        match_detections(images[i].predictions, images[i].ground_truths, iou_threshold, i);
    all.gt_count += m.gt_count;
    all.detections.insert(all.detections.end(), m.detections.begin(), m.detections.end());
  }
  std::sort(all.detections.begin(), all.detections.end(), detail::by_confidence);
  all.fn_count = all.gt_count - all.tp_count();
  return all;
}

inline double precision(long long tp, long long fp) {
  detail::require(tp >= 0 && fp >= 0, "precision: negative count");
  if (tp + fp == 0) return 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

inline double recall(long long tp, long long fn) {
  detail::require(tp >= 0 && fn >= 0, "recall: negative count");
  if (tp + fn == 0) return 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

inline double f1_score(double p, double r) { return (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0; }

/// Cumulative (recall, precision) after each detection in confidence order.
inline PRCurve pr_curve(const MatchResult& match) {
  PRCurve curve;
  curve.gt_count = match.gt_count;
  curve.points.reserve(match.detections.size());
  long long tp = 0;
  long long seen = 0;
  for (const auto& d : match.detections) {
    ++seen;
    if (d.true_positive) ++tp;
    const double r = match.gt_count == 0
                         ? 0.0
                         : static_cast<double>(tp) / static_cast<double>(match.gt_count);
    curve.points.push_back({r, precision(tp, seen - tp), d.confidence});
  }
  return curve;
}

/// All-point interpolated AP: precision is replaced by its running maximum
/// from the right, then integrated exactly over recall as a step function.
inline double average_precision(const PRCurve& curve) {
  if (curve.points.empty()) return 0.0;
  std::vector<double> envelope(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    ap += (curve.points[i].recall - prev_recall) * envelope[i];
    prev_recall = curve.points[i].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

inline std::map<int, std::size_t> ground_truth_counts(std::span<const ImageSample> images) {
  std::map<int, std::size_t> counts;
  for (const auto& img : images) {
    for (const auto& g : img.ground_truths) ++counts[g.class_id];
  }
  return counts;
}

/// Per-class AP over classes that have ground truth, and their unweighted mean.
inline APResult mean_average_precision(std::span<const ImageSample> images, double iou_threshold) {
  detail::require_iou_threshold(iou_threshold, "mean_average_precision");
  const auto counts = ground_truth_counts(images);
  if (counts.empty()) throw InvalidArgument("mean_average_precision: no ground truths");
  const MatchResult all = match_images(images, iou_threshold);
  APResult out;
  double total = 0.0;
  for (const auto& [cls, n] : counts) {
    const double ap = average_precision(pr_curve(all.for_class(cls, n)));
    out.per_class_ap[cls] = ap;
    total += ap;
  }
  out.map = total / static_cast<double>(counts.size());
  return out;
}

inline APResult mean_average_precision(std::span<const Detection> preds,
                                       std::span<const GroundTruth> gts, double iou_threshold) {
  const ImageSample img{{preds.begin(), preds.end()}, {gts.begin(), gts.end()}};
  return mean_average_precision(std::span<const ImageSample>(&img, 1), iou_threshold);
}

// 0.50, 0.55, ..., 0.95
inline std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(static_cast<double>(50 + 5 * k) / 100.0);
  return t;
}

inline double map_over_thresholds(std::span<const ImageSample> images,
                                  std::span<const double> thresholds) {
  detail::require(!thresholds.empty(), "map_over_thresholds: empty threshold list");
  double total = 0.0;
  for (double t : thresholds) total += mean_average_precision(images, t).map;
  return total / static_cast<double>(thresholds.size());
}

struct SweepRow {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ConfidenceSweep {
  std::vector<SweepRow> rows;
  std::size_t best_index = 0;  // first row with maximal F1

  const SweepRow& best() const { return rows.at(best_index); }
};

/// Precision, recall and F1 (pooled over classes) after dropping detections
/// below each grid confidence.
///
/// Greedy matching of the higher-confidence detections never depends on the
/// lower ones, so one full match is filtered by prefix for every grid value.
inline ConfidenceSweep confidence_sweep(std::span<const ImageSample> images, double iou_threshold,
                                        std::span<const double> grid) {
  detail::require(!grid.empty(), "confidence_sweep: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::require(grid[i] >= 0.0 && grid[i] <= 1.0, "confidence_sweep: grid value outside [0, 1]");
    detail::require(i == 0 || grid[i - 1] <= grid[i], "confidence_sweep: grid must be sorted");
  }
  const MatchResult all = match_images(images, iou_threshold);
  const auto gt_total = static_cast<long long>(all.gt_count);

  ConfidenceSweep sweep;
  sweep.rows.reserve(grid.size());
  // all.detections is sorted by descending confidence; walk grid from the top.
  std::vector<SweepRow> rows(grid.size());
  std::size_t cursor = 0;
  long long tp = 0;
  for (std::size_t gi = grid.size(); gi-- > 0;) {
    while (cursor < all.detections.size() && all.detections[cursor].confidence >= grid[gi]) {
      if (all.detections[cursor].true_positive) ++tp;
      ++cursor;
    }
    const long long fp = static_cast<long long>(cursor) - tp;
    SweepRow row;
    row.threshold = grid[gi];
    row.precision = precision(tp, fp);
    row.recall = recall(tp, gt_total - tp);
    row.f1 = f1_score(row.precision, row.recall);
    rows[gi] = row;
  }
  sweep.rows = std::move(rows);
  for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
    if (sweep.rows[i].f1 > sweep.rows[sweep.best_index].f1) sweep.best_index = i;
  }
  return sweep;
}

// 0.00, 0.01, ..., 1.00
inline std::vector<double> default_confidence_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 100; ++k) g.push_back(static_cast<double>(k) / 100.0);
  return g;
}

}  // namespace detune
