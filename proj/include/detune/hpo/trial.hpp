#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "detune/error.hpp"
#include "detune/io/format.hpp"
#include "detune/optimizers.hpp"
#include "detune/parallel.hpp"

namespace detune::hpo {

/// Everything a trainer needs to run one trial.
struct TrialConfig {
  std::string label = "default";  // e.g. "default", "H-4", "search-07"
  std::string scale = "m";
  OptimizerKind optimizer = OptimizerKind::SGD;
  std::size_t epochs = 100;
  std::size_t batch = 64;
  OptimizerHyper hyper;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

/// Canonical one-line rendering, used as the last ranking tie-break.
inline std::string config_key(const TrialConfig& c) {
  using io::format_double;
  return "batch=" + std::to_string(c.batch) + ";beta2=" + format_double(c.hyper.beta2) +
         ";dropout=" + format_double(c.dropout) + ";epochs=" + std::to_string(c.epochs) +
         ";epsilon=" + format_double(c.hyper.epsilon) + ";label=" + c.label +
         ";lr0=" + format_double(c.hyper.lr0) + ";momentum=" + format_double(c.hyper.momentum) +
         ";optimizer=" + std::string(to_string(c.optimizer)) + ";scale=" + c.scale +
         ";seed=" + std::to_string(c.seed) + ";weight_decay=" + format_double(c.hyper.weight_decay);
}

struct TrialMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double map50_train = 0.0;
  double map50_val = 0.0;
  double map50_test = 0.0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

enum class TrialStatus { Ok, Diverged };

inline std::string_view to_string(TrialStatus s) { return s == TrialStatus::Ok ? "ok" : "diverged"; }

inline TrialStatus parse_status(std::string_view s) {
  if (s == "ok") return TrialStatus::Ok;
  if (s == "diverged") return TrialStatus::Diverged;
  throw InvalidArgument("unknown trial status: " + std::string(s));
}

/// What a trainer reports back for one configuration.
struct TrialOutcome {
  TrialMetrics metrics;
  TrialStatus status = TrialStatus::Ok;
  std::uint64_t work = 0;  // gradient evaluations; deterministic cost proxy
  std::string note;
};

struct TrialRecord {
  std::size_t index = 0;  // logical position within its step
  TrialConfig config;
  TrialMetrics metrics;
  double wall_time_s = 0.0;
  std::uint64_t work = 0;
  TrialStatus status = TrialStatus::Ok;
  std::string note;
};

using Trainer = std::function<TrialOutcome(const TrialConfig&)>;

enum class RankMetric { ValMap50, TrainMap50, TestMap50, Precision, Recall };

inline double metric_value(const TrialRecord& r, RankMetric m) {
  switch (m) {
    case RankMetric::ValMap50: return r.metrics.map50_val;
    case RankMetric::TrainMap50: return r.metrics.map50_train;
    case RankMetric::TestMap50: return r.metrics.map50_test;
    case RankMetric::Precision: return r.metrics.precision;
    case RankMetric::Recall: return r.metrics.recall;
  }
  return 0.0;
}

/// Secondary key after the ranking metric. WallTime is the measured duration;
/// Work counts gradient evaluations and is reproducible run to run.
enum class TieBreak { WallTime, Work };

/// Strict weak order: higher metric first, then cheaper, then config_key.
inline bool ranks_before(const TrialRecord& a, const TrialRecord& b, RankMetric metric,
                         TieBreak tie) {
  const double ma = metric_value(a, metric);
  const double mb = metric_value(b, metric);
  if (ma != mb) return ma > mb;
  if (tie == TieBreak::WallTime) {
    if (a.wall_time_s != b.wall_time_s) return a.wall_time_s < b.wall_time_s;
  } else if (a.work != b.work) {
    return a.work < b.work;
  }
  return config_key(a.config) < config_key(b.config);
}

struct Leaderboard {
  std::vector<TrialRecord> rows;  // ranked
  RankMetric metric = RankMetric::ValMap50;
  TieBreak tie_break = TieBreak::WallTime;

  bool empty() const { return rows.empty(); }
};

inline Leaderboard make_leaderboard(std::vector<TrialRecord> rows,
                                    RankMetric metric = RankMetric::ValMap50,
                                    TieBreak tie = TieBreak::WallTime) {
  std::stable_sort(rows.begin(), rows.end(), [&](const TrialRecord& a, const TrialRecord& b) {
    return ranks_before(a, b, metric, tie);
  });
  return {std::move(rows), metric, tie};
}

inline const TrialRecord& select_best(const Leaderboard& board, RankMetric metric,
                                      TieBreak tie = TieBreak::WallTime) {
  if (board.rows.empty()) throw InvalidArgument("select_best: empty leaderboard");
  const TrialRecord* best = &board.rows.front();
  for (const auto& r : board.rows) {
    if (ranks_before(r, *best, metric, tie)) best = &r;
  }
  return *best;
}

inline const TrialRecord& select_best(const Leaderboard& board) {
  return select_best(board, board.metric, board.tie_break);
}

inline bool all_diverged(const Leaderboard& board) {
  return std::all_of(board.rows.begin(), board.rows.end(),
                     [](const TrialRecord& r) { return r.status == TrialStatus::Diverged; });
}

struct RunOptions {
  std::size_t workers = 1;
  RankMetric metric = RankMetric::ValMap50;
  TieBreak tie_break = TieBreak::WallTime;
};

/// Runs every config through the trainer on a bounded pool. Records come back
/// in logical (input) order regardless of completion order. A trainer that
/// throws yields a diverged record with zeroed metrics.
inline std::vector<TrialRecord> run_trials(const std::vector<TrialConfig>& configs,
                                           const Trainer& trainer, std::size_t workers) {
  std::vector<TrialRecord> records(configs.size());
  parallel_for(configs.size(), workers, [&](std::size_t i) {
    TrialRecord& rec = records[i];
    rec.index = i;
    rec.config = configs[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      TrialOutcome out = trainer(configs[i]);
      rec.metrics = out.metrics;
      rec.status = out.status;
      rec.work = out.work;
      rec.note = std::move(out.note);
    } catch (const std::exception& e) {
      rec.metrics = {};
      rec.status = TrialStatus::Diverged;
      rec.note = e.what();
    }
    if (rec.status == TrialStatus::Diverged) rec.metrics = {};
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return records;
}

}  // namespace detune::hpo
