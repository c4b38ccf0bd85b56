#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "detune/error.hpp"
#include "detune/geometry.hpp"
#include "detune/numerics.hpp"
#include "detune/rng.hpp"
#include "detune/surrogate/scene.hpp"

namespace detune::surrogate {

// Squared-error weight of the box term relative to the objectness BCE.
inline constexpr double kBoxLossWeight = 0.05;

/// Parameter layout: [objectness weights (D) | left | right | top | bottom offset weights (D each)].
inline std::size_t detector_param_count(int feature_dim) {
  return static_cast<std::size_t>(feature_dim) * (1 + 4);
}

struct DetectorOptions {
  double confidence_threshold = 0.25;
  double nms_iou_threshold = 0.5;
};

inline double logistic(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)), overflow-safe.
inline double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

struct CellOutput {
  double logit = 0.0;
  std::array<double, 4> offsets{};
};

inline CellOutput cell_output(std::span<const double> params, const double* f, std::size_t d,
                              const double* mask = nullptr) {
  CellOutput out;
  for (std::size_t c = 0; c < d; ++c) {
    const double x = mask ? f[c] * mask[c] : f[c];
    out.logit += params[c] * x;
    for (std::size_t k = 0; k < 4; ++k) out.offsets[k] += params[(k + 1) * d + c] * x;
  }
  return out;
}

/// Decodes offsets (cell units beyond each cell edge) into a box clipped to [0, 1]^2.
inline BBox decode_box(int grid_size, std::size_t cell, const std::array<double, 4>& o) {
  const BBox c = cell_box(grid_size, cell);
  const double n = grid_size;
  BBox b{std::clamp(c.x_min - o[0] / n, 0.0, 1.0), std::clamp(c.y_min - o[2] / n, 0.0, 1.0),
         std::clamp(c.x_max + o[1] / n, 0.0, 1.0), std::clamp(c.y_max + o[3] / n, 0.0, 1.0)};
  if (b.x_min > b.x_max) b.x_min = b.x_max = 0.5 * (b.x_min + b.x_max);
  if (b.y_min > b.y_max) b.y_min = b.y_max = 0.5 * (b.y_min + b.y_max);
  return b;
}

/// Raw per-cell detections before thresholding, one per cell, confidence =
/// objectness probability.
inline std::vector<Detection> detector_raw(std::span<const double> params, const SyntheticScene& scene) {
  const auto d = static_cast<std::size_t>(scene.feature_dim);
  if (params.size() != detector_param_count(scene.feature_dim)) {
    throw InvalidArgument("detector: parameter length " + std::to_string(params.size()) +
                          " does not match " + std::to_string(detector_param_count(scene.feature_dim)));
  }
  std::vector<Detection> raw;
  raw.reserve(scene.cell_count());
  for (std::size_t cell = 0; cell < scene.cell_count(); ++cell) {
    const CellOutput out = cell_output(params, scene.cell_features(cell), d);
    if (!std::isfinite(out.logit) || !all_finite(out.offsets)) {
      throw NumericError("detector: non-finite cell output");
    }
    raw.push_back({decode_box(scene.grid_size, cell, out.offsets), 0, logistic(out.logit)});
  }
  return raw;
}

inline std::vector<Detection> detector_forward(std::span<const double> params, const SyntheticScene& scene,
                                               const DetectorOptions& opts = {}) {
  const auto raw = detector_raw(params, scene);
  return nms(raw, opts.nms_iou_threshold, opts.confidence_threshold);
}

/// Inverted-dropout multipliers for every (scene, cell, channel) of a batch:
/// 0 with probability p, otherwise 1 / (1 - p). Channel 0 (the constant) is
/// never dropped. Empty when p == 0.
struct DropoutMask {
  double rate = 0.0;
  std::vector<std::vector<double>> per_scene;

  bool active() const { return rate > 0.0; }
};

inline DropoutMask draw_dropout_mask(std::span<const SyntheticScene* const> batch, double rate, Stream& rng) {
  detail::require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
  DropoutMask mask;
  mask.rate = rate;
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (const SyntheticScene* s : batch) {
    const auto d = static_cast<std::size_t>(s->feature_dim);
    std::vector<double> m(s->features.size(), 1.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i % d == 0) continue;
      m[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
    }
    mask.per_scene.push_back(std::move(m));
  }
  return mask;
}

/// Batch-mean of per-scene loss:
///   mean over cells of BCE(objectness, cell is crack-owned)
///   + kBoxLossWeight * mean over owned cells of |offsets - targets|^2
/// with the exact gradient for the given mask.
inline ObjectiveEval loss_and_gradient(std::span<const double> params,
                                       std::span<const SyntheticScene* const> batch,
                                       const DropoutMask& mask) {
  detail::require(!batch.empty(), "loss_and_gradient: empty batch");
  const int feature_dim = batch.front()->feature_dim;
  const auto d = static_cast<std::size_t>(feature_dim);
  if (params.size() != detector_param_count(feature_dim)) {
    throw InvalidArgument("loss_and_gradient: parameter length mismatch");
  }
  detail::require(!mask.active() || mask.per_scene.size() == batch.size(),
                  "loss_and_gradient: mask does not match batch");

  ObjectiveEval out{0.0, std::vector<double>(params.size(), 0.0)};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> xbuf(d);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SyntheticScene& s = *batch[b];
    detail::require(s.feature_dim == feature_dim, "loss_and_gradient: mixed feature widths in batch");
    const double inv_cells = 1.0 / static_cast<double>(s.cell_count());
    const std::size_t positives = s.positive_count();
    const double box_norm = positives > 0 ? kBoxLossWeight / static_cast<double>(positives) : 0.0;
    for (std::size_t cell = 0; cell < s.cell_count(); ++cell) {
      const double* f = s.cell_features(cell);
      const double* m = mask.active() ? mask.per_scene[b].data() + cell * d : nullptr;
      for (std::size_t c = 0; c < d; ++c) xbuf[c] = m ? f[c] * m[c] : f[c];
      const CellOutput o = cell_output(params, xbuf.data(), d);
      const int owner = s.owner[cell];
      const double y = owner >= 0 ? 1.0 : 0.0;
      // BCE with logits: softplus(s) - y s.
      out.loss += inv_batch * inv_cells * (softplus(o.logit) - y * o.logit);
      const double dlogit = inv_batch * inv_cells * (logistic(o.logit) - y);
      for (std::size_t c = 0; c < d; ++c) out.gradient[c] += dlogit * xbuf[c];
      if (owner >= 0) {
        const auto t = box_targets(s.grid_size, cell, s.ground_truths[static_cast<std::size_t>(owner)].box);
        for (std::size_t k = 0; k < 4; ++k) {
          const double r = o.offsets[k] - t[k];
          out.loss += inv_batch * box_norm * r * r;
          const double dr = inv_batch * box_norm * 2.0 * r;
          for (std::size_t c = 0; c < d; ++c) out.gradient[(k + 1) * d + c] += dr * xbuf[c];
        }
      }
    }
  }
  return out;
}

inline ObjectiveEval loss_and_gradient(std::span<const double> params,
                                       std::span<const SyntheticScene* const> batch, double dropout,
                                       Stream& rng) {
  detail::require(dropout >= 0.0 && dropout < 1.0, "loss_and_gradient: dropout must be in [0, 1)");
  return loss_and_gradient(params, batch, draw_dropout_mask(batch, dropout, rng));
}

/// A batch with a frozen dropout mask viewed as a differentiable objective.
class BatchObjective {
 public:
  BatchObjective(std::vector<const SyntheticScene*> batch, DropoutMask mask = {})
      : batch_(std::move(batch)), mask_(std::move(mask)) {
    detail::require(!batch_.empty(), "BatchObjective: empty batch");
  }

  std::size_t dim() const { return detector_param_count(batch_.front()->feature_dim); }
  ObjectiveEval evaluate(std::span<const double> params) const {
    return loss_and_gradient(params, batch_, mask_);
  }

 private:
  std::vector<const SyntheticScene*> batch_;
  DropoutMask mask_;
};

}  // namespace detune::surrogate
