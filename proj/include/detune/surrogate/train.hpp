#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detune/error.hpp"
#include "detune/metrics.hpp"
#include "detune/optimizers.hpp"
#include "detune/parallel.hpp"
#include "detune/rng.hpp"
#include "detune/surrogate/detector.hpp"
#include "detune/surrogate/scene.hpp"

namespace detune::surrogate {

/// Dataset recipe shared by every scale: the base grid and feature width are
/// multiplied by a DetectorScale when a dataset is materialized.
struct DataSpec {
  int grid_size = 12;
  int base_feature_dim = 6;
  int min_cracks = 1;
  int max_cracks = 3;
  double noise_level = 0.1;
  std::size_t train_size = 600;
  std::size_t val_size = 300;
  std::size_t test_size = 270;

  SceneSpec scene_spec(const DetectorScale& scale, std::uint64_t seed) const {
    SceneSpec s;
    s.grid_size = scale.grid_size(grid_size);
    s.feature_dim = scale.feature_dim(base_feature_dim);
    s.min_cracks = min_cracks;
    s.max_cracks = max_cracks;
    s.noise_level = noise_level;
    s.seed = seed;
    return s;
  }
};

struct Split {
  std::string name;
  std::vector<SyntheticScene> scenes;

  std::vector<const SyntheticScene*> pointers() const {
    std::vector<const SyntheticScene*> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) out.push_back(&s);
    return out;
  }
};

struct Dataset {
  SceneSpec spec;
  Split train;
  Split val;
  Split test;
};

/// Scene i of a split draws geometry from stream ("geometry/<split>", i),
/// which does not depend on the scale, and noise from a stream keyed by the
/// feature width. Splits are disjoint by construction.
inline Split make_split(const SceneSpec& spec, const std::string& name, std::size_t count) {
  Split split{name, {}};
  split.scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Stream geometry(spec.seed, "geometry/" + name, i);
    Stream noise(spec.seed, "noise/" + name + "/" + std::to_string(spec.feature_dim), i);
    split.scenes.push_back(render_scene(spec, draw_cracks(spec, geometry), noise));
  }
  return split;
}

inline Dataset make_dataset(const DataSpec& data, const DetectorScale& scale, std::uint64_t seed) {
  Dataset ds;
  ds.spec = data.scene_spec(scale, seed);
  ds.spec.validate();
  ds.train = make_split(ds.spec, "train", data.train_size);
  ds.val = make_split(ds.spec, "val", data.val_size);
  ds.test = make_split(ds.spec, "test", data.test_size);
  return ds;
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 64;
  OptimizerKind optimizer = OptimizerKind::SGD;
  OptimizerHyper hyper;
  double dropout = 0.0;
  DetectorScale scale = scale_ladder()[2];
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(batch >= 1, "train config: batch must be >= 1");
    detail::require(dropout >= 0.0 && dropout < 1.0, "train config: dropout must be in [0, 1)");
    hyper.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_map50 = 0.0;
};

struct TrainResult {
  ParamVector params;
  std::vector<EpochRecord> history;
  bool diverged = false;
  std::uint64_t gradient_evaluations = 0;
  double wall_time_s = 0.0;
};

struct MetricsBundle {
  double precision = 0.0;
  double recall = 0.0;
  double map50 = 0.0;
  double map50_95 = 0.0;
  double best_f1 = 0.0;
  double best_f1_confidence = 0.0;
};

// Low threshold so AP sees (almost) the whole ranking, as detection validators do.
inline DetectorOptions evaluation_options() { return {0.001, 0.5}; }

inline std::vector<ImageSample> predict_split(std::span<const double> params, const Split& split,
                                              const DetectorOptions& opts, std::size_t workers = 1) {
  std::vector<ImageSample> samples(split.scenes.size());
  parallel_for(split.scenes.size(), workers, [&](std::size_t i) {
    samples[i].predictions = detector_forward(params, split.scenes[i], opts);
    samples[i].ground_truths = split.scenes[i].ground_truths;
  });
  return samples;
}

inline double split_map50(std::span<const double> params, const Split& split) {
  const auto samples = predict_split(params, split, evaluation_options());
  return mean_average_precision(samples, 0.5).map;
}

/// Precision and recall are read at the confidence of maximal F1.
inline MetricsBundle evaluate_samples(std::span<const ImageSample> samples) {
  MetricsBundle m;
  m.map50 = mean_average_precision(samples, 0.5).map;
  const auto thresholds = coco_iou_thresholds();
  m.map50_95 = map_over_thresholds(samples, thresholds);
  const auto grid = default_confidence_grid();
  const auto sweep = confidence_sweep(samples, 0.5, grid);
  m.precision = sweep.best().precision;
  m.recall = sweep.best().recall;
  m.best_f1 = sweep.best().f1;
  m.best_f1_confidence = sweep.best().threshold;
  return m;
}

inline MetricsBundle evaluate_split(std::span<const double> params, const Split& split,
                                    std::size_t workers = 1) {
  detail::require(!split.scenes.empty(), "evaluate_split: empty split");
  const auto samples = predict_split(params, split, evaluation_options(), workers);
  return evaluate_samples(samples);
}

inline ParamVector initial_params(int feature_dim, std::uint64_t seed) {
  Stream rng(seed, "init");
  ParamVector p(detector_param_count(feature_dim));
  for (auto& v : p) v = 0.01 * rng.normal();
  return p;
}

/// Minibatch training. Each epoch shuffles the training split with stream
/// ("shuffle", epoch); the dropout mask of step k comes from ("dropout", k)
/// and is shared by both gradient evaluations of a NAdam step.
/// A non-finite loss, gradient or parameter stops training and flags the run
/// as diverged; the history up to that point is kept.
inline TrainResult train(const TrainConfig& cfg, const Split& train_split, const Split& val_split) {
  cfg.validate();
  detail::require(!train_split.scenes.empty(), "train: empty training split");
  const auto start = std::chrono::steady_clock::now();
  const int feature_dim = train_split.scenes.front().feature_dim;

  TrainResult result;
  result.params = initial_params(feature_dim, cfg.seed);
  OptimizerState state(result.params.size());

  std::vector<std::size_t> order(train_split.scenes.size());
  std::uint64_t step_index = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Stream shuffle_rng(cfg.seed, "shuffle", epoch);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch);
      std::vector<const SyntheticScene*> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_split.scenes[order[i]]);

      Stream dropout_rng(cfg.seed, "dropout", step_index++);
      const DropoutMask mask = draw_dropout_mask(batch, cfg.dropout, dropout_rng);
      double step_loss = 0.0;
      bool first = true;
      const GradientProvider provider = [&](std::span<const double> theta) {
        ObjectiveEval e = loss_and_gradient(theta, batch, mask);
        ++result.gradient_evaluations;
        if (first) {
          step_loss = e.loss;
          first = false;
        }
        return std::move(e.gradient);
      };
      try {
        step(cfg.optimizer, state, result.params, cfg.hyper, provider);
      } catch (const NumericError&) {
        result.diverged = true;
      }
      if (result.diverged || !std::isfinite(step_loss) || !all_finite(result.params)) {
        result.diverged = true;
        break;
      }
      loss_sum += step_loss;
      ++steps;
    }
    if (result.diverged) break;
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(steps);
    try {
      rec.val_map50 = val_split.scenes.empty() ? 0.0 : split_map50(result.params, val_split);
    } catch (const NumericError&) {
      result.diverged = true;
      break;
    }
    result.history.push_back(rec);
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace detune::surrogate
