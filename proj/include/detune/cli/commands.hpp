#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detune/error.hpp"
#include "detune/hpo/campaign.hpp"
#include "detune/hpo/surrogate_trainer.hpp"
#include "detune/io/csv.hpp"
#include "detune/io/files.hpp"
#include "detune/io/format.hpp"
#include "detune/io/json.hpp"
#include "detune/io/labels.hpp"
#include "detune/metrics.hpp"
#include "detune/parallel.hpp"
#include "detune/surrogate/train.hpp"

// Subcommand bodies for the `detune` executable. Each takes a plain options
// struct, writes its files atomically, and reports errors as InvalidArgument
// (bad flags) or DataError (bad inputs).

namespace detune::cli {

namespace fs = std::filesystem;
using io::json;

struct DataFlags {
  std::size_t train_size = 600;
  std::size_t val_size = 300;
  std::size_t test_size = 270;

  surrogate::DataSpec spec() const {
    surrogate::DataSpec d;
    d.train_size = train_size;
    d.val_size = val_size;
    d.test_size = test_size;
    return d;
  }
};

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
  fs::path out = "data";
  std::uint64_t seed = 0;
  std::string scale = "m";
  DataFlags data;
};

inline std::string scene_stem(std::size_t i) {
  std::string digits = std::to_string(i);
  return "scene_" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

inline std::string features_csv(const surrogate::SyntheticScene& s) {
  std::string out;
  const auto d = static_cast<std::size_t>(s.feature_dim);
  for (std::size_t cell = 0; cell < s.cell_count(); ++cell) {
    const double* f = s.cell_features(cell);
    for (std::size_t c = 0; c < d; ++c) {
      if (c) out += ',';
      out += io::format_double(f[c]);
    }
    out += '\n';
  }
  return out;
}

/// Layout: <out>/<split>/labels/scene_NNNNNN.txt, <out>/<split>/features/scene_NNNNNN.csv
/// (one row per cell, row-major), and <out>/dataset.json.
inline surrogate::Dataset cmd_gen_data(const GenDataOptions& o) {
  const auto& scale = surrogate::parse_scale(o.scale);
  auto ds = surrogate::make_dataset(o.data.spec(), scale, o.seed);
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (std::size_t i = 0; i < split->scenes.size(); ++i) {
      const auto& s = split->scenes[i];
      io::write_atomic(o.out / split->name / "labels" / (scene_stem(i) + ".txt"),
                       io::format_annotations(s.ground_truths));
      io::write_atomic(o.out / split->name / "features" / (scene_stem(i) + ".csv"), features_csv(s));
    }
  }
  const json meta{{"version", io::kToolkitVersion},
                  {"seed", o.seed},
                  {"scale", o.scale},
                  {"grid_size", ds.spec.grid_size},
                  {"feature_dim", ds.spec.feature_dim},
                  {"noise_level", ds.spec.noise_level},
                  {"cracks", {ds.spec.min_cracks, ds.spec.max_cracks}},
                  {"splits", {{"train", ds.train.scenes.size()}, {"val", ds.val.scenes.size()}, {"test", ds.test.scenes.size()}}}};
  io::write_atomic(o.out / "dataset.json", io::dump_canonical(meta));
  return ds;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path preds;
  fs::path gts;
  fs::path out = "eval";
  double iou_thresh = 0.5;
  double conf_thresh = 0.25;
};

struct EvalReport {
  std::size_t images = 0;
  double map = 0.0;  // at iou_thresh
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::map<int, double> per_class_ap;
  double precision = 0.0;  // at conf_thresh
  double recall = 0.0;
  double f1 = 0.0;
  double best_f1 = 0.0;
  double best_f1_confidence = 0.0;
};

/// A ground-truth stem with no prediction file counts as an image with no
/// detections. A prediction stem with no ground-truth file is an error.
inline std::vector<ImageSample> load_eval_pairs(const fs::path& preds_dir, const fs::path& gts_dir) {
  if (!fs::is_directory(gts_dir)) throw DataError("missing ground-truth directory: " + gts_dir.string());
  if (!fs::is_directory(preds_dir)) throw DataError("missing prediction directory: " + preds_dir.string());
  auto gts = io::read_annotation_dir(gts_dir);
  auto preds = io::read_prediction_dir(preds_dir);
  std::string unmatched;
  for (const auto& [stem, _] : preds) {
    if (!gts.contains(stem)) unmatched += (unmatched.empty() ? "" : ", ") + stem;
  }
  if (!unmatched.empty()) throw DataError("prediction files without ground truth: " + unmatched);
  std::vector<ImageSample> samples;
  for (auto& [stem, g] : gts) {
    ImageSample s;
    s.ground_truths = std::move(g);
    if (auto it = preds.find(stem); it != preds.end()) s.predictions = std::move(it->second);
    samples.push_back(std::move(s));
  }
  return samples;
}

inline EvalReport evaluate_samples(const std::vector<ImageSample>& samples, double iou_thresh, double conf_thresh) {
  detail::require(iou_thresh > 0.0 && iou_thresh <= 1.0, "--iou-thresh must be in (0, 1]");
  detail::require(conf_thresh >= 0.0 && conf_thresh <= 1.0, "--conf-thresh must be in [0, 1]");
  if (ground_truth_counts(samples).empty()) throw DataError("ground-truth directory holds no boxes");
  EvalReport r;
  r.images = samples.size();
  const auto at = mean_average_precision(samples, iou_thresh);
  r.map = at.map;
  r.per_class_ap = at.per_class_ap;
  r.map50 = mean_average_precision(samples, 0.5).map;
  const auto thresholds = coco_iou_thresholds();
  r.map50_95 = map_over_thresholds(samples, thresholds);
  const std::vector<double> point{conf_thresh};
  const auto at_conf = confidence_sweep(samples, iou_thresh, point).rows.front();
  r.precision = at_conf.precision;
  r.recall = at_conf.recall;
  r.f1 = at_conf.f1;
  const auto grid = default_confidence_grid();
  const auto sweep = confidence_sweep(samples, iou_thresh, grid);
  r.best_f1 = sweep.best().f1;
  r.best_f1_confidence = sweep.best().threshold;
  return r;
}

/// Writes metrics.json plus pr_curve.csv, precision_confidence.csv,
/// recall_confidence.csv and f1_confidence.csv under `out`.
inline EvalReport cmd_eval(const EvalOptions& o) {
  const auto samples = load_eval_pairs(o.preds, o.gts);
  const EvalReport r = evaluate_samples(samples, o.iou_thresh, o.conf_thresh);

  json per_class = json::object();
  for (const auto& [cls, ap] : r.per_class_ap) per_class[std::to_string(cls)] = ap;
  const json metrics{{"images", r.images},
                     {"iou_threshold", o.iou_thresh},
                     {"confidence_threshold", o.conf_thresh},
                     {"map", r.map},
                     {"map50", r.map50},
                     {"map50_95", r.map50_95},
                     {"per_class_ap", per_class},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"best_f1", r.best_f1},
                     {"best_f1_confidence", r.best_f1_confidence},
                     {"ap_integration", io::kApIntegration}};

  PRCurve pooled = pr_curve(match_images(samples, o.iou_thresh));
  const auto grid = default_confidence_grid();
  const auto sweep = confidence_sweep(samples, o.iou_thresh, grid);
  io::write_atomic(o.out / "pr_curve.csv", io::pr_curve_csv(pooled));
  io::write_atomic(o.out / "precision_confidence.csv", io::confidence_curve_csv(sweep, "precision"));
  io::write_atomic(o.out / "recall_confidence.csv", io::confidence_curve_csv(sweep, "recall"));
  io::write_atomic(o.out / "f1_confidence.csv", io::confidence_curve_csv(sweep, "f1"));
  io::write_atomic(o.out / "metrics.json", io::dump_canonical(metrics));
  return r;
}

// ---------------------------------------------------------------------------
// sweep / ofat / search / campaign all run a protocol through the surrogate.

struct RunFlags {
  fs::path out = "runs";
  std::uint64_t seed = 0;
  std::size_t workers = default_workers();
  std::optional<std::size_t> epochs;  // overrides every step's epoch count
  DataFlags data;
};

inline std::vector<OptimizerKind> parse_optimizer_list(const std::vector<std::string>& names) {
  std::vector<OptimizerKind> out;
  for (const auto& n : names) out.push_back(parse_optimizer_kind(n));
  return out;
}

inline void check_scales(const std::vector<std::string>& names) {
  for (const auto& n : names) surrogate::parse_scale(n);
}

inline hpo::SearchSpace load_space(const fs::path& path) {
  try {
    return io::space_from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline hpo::Protocol load_protocol(const std::string& which, std::uint64_t seed) {
  if (which == "paper") return hpo::paper_protocol(seed);
  json j;
  try {
    j = json::parse(io::read_file(which));
  } catch (const json::exception& e) {
    throw DataError(which + ": " + e.what());
  }
  auto p = io::protocol_from_json(j);
  p.base.seed = seed;
  return p;
}

inline void apply_epoch_override(hpo::Protocol& p, std::optional<std::size_t> epochs) {
  if (!epochs) return;
  p.base.epochs = *epochs;
  if (p.step2) {
    for (auto& s : p.step2->sets) s.epochs = *epochs;
  }
  if (p.step3) p.step3->epochs = *epochs;
}

/// Runs the protocol and writes manifest.json, leaderboard.csv (every trial,
/// ranked) and one <step>_leaderboard.csv per step. On abort the partial
/// manifest is still written before the error propagates.
inline hpo::CampaignReport run_protocol(hpo::Protocol protocol, const RunFlags& f, std::ostream& log = std::cout) {
  apply_epoch_override(protocol, f.epochs);
  protocol.base.seed = f.seed;
  protocol.validate();
  hpo::SurrogateTrainer trainer(f.data.spec());
  Stream rng(f.seed, "search");

  auto write_outputs = [&](const hpo::CampaignReport& report) {
    std::vector<hpo::TrialRecord> all;
    for (const auto& s : report.steps) {
      io::write_atomic(f.out / (s.name + "_leaderboard.csv"), io::leaderboard_csv(s.board));
      all.insert(all.end(), s.board.rows.begin(), s.board.rows.end());
    }
    const auto board = hpo::make_leaderboard(std::move(all), hpo::RankMetric::ValMap50, hpo::TieBreak::Work);
    io::write_atomic(f.out / "leaderboard.csv", io::leaderboard_csv(board));
    io::write_atomic(f.out / "manifest.json", io::dump_canonical(io::manifest_json(report, protocol)));
  };

  try {
    auto report = hpo::run_campaign(protocol, hpo::Trainer(trainer), rng, f.workers);
    write_outputs(report);
    const auto& best = report.selected;
    log << "selected: " << best.config.scale << " " << to_string(best.config.optimizer) << " "
        << best.config.label << "  val mAP50 " << io::format_double(best.metrics.map50_val) << "\n";
    return report;
  } catch (const hpo::CampaignAborted& e) {
    write_outputs(e.partial());
    throw;
  }
}

struct SweepOptions {
  RunFlags run;
  std::vector<std::string> scales{"n", "s", "m", "l", "x"};
  std::vector<std::string> optimizers{"sgd", "rmsprop", "adam", "adamw", "radam", "nadam"};
};

inline hpo::CampaignReport cmd_sweep(const SweepOptions& o, std::ostream& log = std::cout) {
  check_scales(o.scales);
  hpo::Protocol p;
  p.name = "sweep";
  p.step1 = hpo::Step1{o.scales, parse_optimizer_list(o.optimizers)};
  return run_protocol(std::move(p), o.run, log);
}

struct OfatOptions {
  RunFlags run;
  std::string scale = "m";
  std::vector<std::string> optimizers{"sgd", "adam", "adamw"};
  bool paper_faithful = false;
};

inline hpo::CampaignReport cmd_ofat(const OfatOptions& o, std::ostream& log = std::cout) {
  check_scales({o.scale});
  hpo::Protocol p;
  p.name = "ofat";
  p.base.scale = o.scale;
  hpo::Step2 s2;
  s2.optimizers = parse_optimizer_list(o.optimizers);
  s2.paper_faithful = o.paper_faithful;
  p.step2 = std::move(s2);
  return run_protocol(std::move(p), o.run, log);
}

struct SearchOptions {
  RunFlags run;
  std::size_t trials = 20;
  std::optional<fs::path> space;  // reference ranges when absent
  std::string scale = "m";
  std::string optimizer = "sgd";
};

inline hpo::CampaignReport cmd_search(const SearchOptions& o, std::ostream& log = std::cout) {
  check_scales({o.scale});
  detail::require(o.trials >= 1, "--trials must be >= 1");
  hpo::Protocol p;
  p.name = "search";
  p.base.scale = o.scale;
  p.base.optimizer = parse_optimizer_kind(o.optimizer);
  hpo::Step3 s3;
  s3.trials = o.trials;
  if (o.space) s3.space = load_space(*o.space);
  p.step3 = std::move(s3);
  return run_protocol(std::move(p), o.run, log);
}

struct CampaignOptions {
  RunFlags run;
  std::string protocol = "paper";  // "paper" or a protocol JSON path
};

inline hpo::CampaignReport cmd_campaign(const CampaignOptions& o, std::ostream& log = std::cout) {
  return run_protocol(load_protocol(o.protocol, o.run.seed), o.run, log);
}

}  // namespace detune::cli
